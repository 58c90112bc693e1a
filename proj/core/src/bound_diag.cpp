// segota: simulator for segmented over-the-air aggregation in federated learning
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "segota/bound_diag.hpp"

#include <cmath>
#include <stdexcept>

namespace segota {

void BoundConstants::validate() const {
    if (!(smoothness > 0.0))
        throw std::invalid_argument("bounds: smoothness L must be > 0");
    if (!(strong_convexity > 0.0))
        throw std::invalid_argument("bounds: strong convexity lambda must be > 0");
    if (strong_convexity > smoothness)
        throw std::invalid_argument("bounds: lambda must not exceed L");
    if (grad_divergence < 0.0 || minibatch_variance < 0.0)
        throw std::invalid_argument("bounds: phi and mu must be >= 0");
}

ContractionTerms eval_contraction(const BoundConstants& constants, double eta, int iterations,
                                  int num_segments, int num_devices) {
    constants.validate();
    if (!(eta > 0.0) || iterations < 1 || num_segments < 1 || num_devices < 1)
        throw std::invalid_argument("eval_contraction: bad arguments");
    if (!(eta < 1.0 / constants.smoothness))
        throw std::invalid_argument("eval_contraction: learning rate must satisfy eta < 1/L");

    ContractionTerms terms;
    terms.contraction =
        4.0 * std::pow(1.0 - eta * constants.strong_convexity, 2.0 * iterations);
    const double k = static_cast<double>(num_devices);
    terms.drift = 4.0 * eta * eta * static_cast<double>(iterations) * iterations *
                  static_cast<double>(num_segments) *
                  (constants.grad_divergence + k * k * constants.minibatch_variance);
    return terms;
}

namespace {

// The shared per-group sum of Eq.-level noise and interference ratios; the
// penalty H_t is 4*nu times this, the delta bound is nu times this.
double penalty_core(const SegmentPlan& plan, const ChannelSet& channels,
                    const BeamformingSolution& solution) {
    const int S = plan.num_segments;
    const double sigma_tilde_sq =
        channels.noise_power_linear * static_cast<double>(plan.segment_len) / 2.0;

    double total = 0.0;
    for (int i = 0; i < S; ++i) {
        const Eigen::VectorXcd& w = solution.beamformers[i];
        double coherent = 0.0;
        for (int k : plan.groups[i])
            coherent += std::sqrt(solution.powers(k)) * std::abs(channels.channels[k].dot(w));
        const double denom = coherent * coherent;
        if (!(denom > 0.0))
            throw std::runtime_error("penalty: zero coherent gain in group " + std::to_string(i));

        double cross = 0.0;
        for (int j = 0; j < S; ++j) {
            if (j == i)
                continue;
            for (int q : plan.groups[j])
                cross += solution.powers(q) * std::norm(channels.channels[q].dot(w));
        }
        const double z = static_cast<double>(plan.out_of_group_count(i));
        total += (sigma_tilde_sq + z * cross) / denom;
    }
    return total;
}

} // namespace

double eval_Ht(const SegmentPlan& plan, const ChannelSet& channels,
               const BeamformingSolution& solution, double nu) {
    if (nu < 0.0)
        throw std::invalid_argument("eval_Ht: nu must be >= 0");
    return 4.0 * nu * penalty_core(plan, channels, solution);
}

double delta_norm_bound(const SegmentPlan& plan, const ChannelSet& channels,
                        const BeamformingSolution& solution, double nu) {
    if (nu < 0.0)
        throw std::invalid_argument("delta_norm_bound: nu must be >= 0");
    return nu * penalty_core(plan, channels, solution);
}

DeltaEstimate estimate_delta_norm(const SegmentPlan& plan, const ChannelSet& channels,
                                  const BeamformingSolution& solution,
                                  const std::vector<ModelVector>& local_models, int reps,
                                  const RngState& rng, bool noise_enabled,
                                  bool interference_enabled) {
    if (reps < 1)
        throw std::invalid_argument("estimate_delta_norm: reps must be >= 1");

    const ModelVector zero_prev = ModelVector::zeros(plan.model_dim);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
        const UplinkOutcome outcome =
            ota_round(plan, channels, solution, local_models, zero_prev, noise_enabled,
                      interference_enabled, rng.fork(0xde17a000ULL + rep));
        double norm_sq = 0.0;
        for (int m = 0; m < plan.num_segments; ++m)
            norm_sq += (outcome.realized_noise[m] + outcome.realized_interference[m]).squaredNorm();
        sum += norm_sq;
        sum_sq += norm_sq * norm_sq;
    }

    DeltaEstimate est;
    est.reps = reps;
    est.mean = sum / reps;
    if (reps > 1) {
        const double var = (sum_sq - sum * sum / reps) / (reps - 1);
        est.std_error = std::sqrt(std::max(var, 0.0) / reps);
    }
    return est;
}

double max_segment_norm_sq(const SegmentPlan& plan,
                           const std::vector<ModelVector>& local_models) {
    double max_sq = 0.0;
    for (int i = 0; i < plan.num_segments; ++i) {
        const int m = plan.segment_of_group(i);
        for (int k : plan.groups[i]) {
            const double n = pack_complex(local_models[k].segment(plan, m)).squaredNorm();
            max_sq = std::max(max_sq, n);
        }
    }
    return max_sq;
}

double prop1_trajectory(const std::vector<RoundBoundTerms>& rounds, double initial_gap) {
    const int T = static_cast<int>(rounds.size());
    double bound = 0.0;
    double suffix = 1.0; // product of contractions over rounds after t
    for (int t = T - 1; t >= 0; --t) {
        bound += suffix * (rounds[t].penalty + rounds[t].drift);
        suffix *= rounds[t].contraction;
    }
    return bound + initial_gap * suffix;
}

} // namespace segota
