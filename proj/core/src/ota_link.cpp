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

#include "segota/ota_link.hpp"

#include <cmath>
#include <stdexcept>

namespace segota {

Eigen::VectorXd ModelVector::segment(const SegmentPlan& plan, int m) const {
    if (m < 0 || m >= plan.num_segments)
        throw std::out_of_range("ModelVector: segment index out of range");
    const int len = plan.segment_len;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(len);
    const int begin = m * len;
    const int end = std::min(begin + len, dim());
    if (end > begin)
        out.head(end - begin) = values_.segment(begin, end - begin);
    return out;
}

ModelVector ModelVector::from_segments(const SegmentPlan& plan,
                                       const std::vector<Eigen::VectorXd>& segments) {
    if (static_cast<int>(segments.size()) != plan.num_segments)
        throw std::invalid_argument("ModelVector: wrong number of segments");
    Eigen::VectorXd padded(static_cast<Eigen::Index>(plan.num_segments) * plan.segment_len);
    for (int m = 0; m < plan.num_segments; ++m) {
        if (segments[m].size() != plan.segment_len)
            throw std::invalid_argument("ModelVector: segment length mismatch");
        padded.segment(static_cast<Eigen::Index>(m) * plan.segment_len, plan.segment_len) =
            segments[m];
    }
    return ModelVector(padded.head(plan.model_dim));
}

Eigen::VectorXcd pack_complex(const Eigen::VectorXd& segment) {
    const Eigen::Index n = segment.size();
    if (n % 2 != 0)
        throw std::invalid_argument("pack_complex: segment length must be even");
    const Eigen::Index half = n / 2;
    Eigen::VectorXcd out(half);
    for (Eigen::Index l = 0; l < half; ++l)
        out(l) = std::complex<double>(segment(l), segment(half + l));
    return out;
}

Eigen::VectorXd unpack_complex(const Eigen::VectorXcd& segment) {
    const Eigen::Index half = segment.size();
    Eigen::VectorXd out(2 * half);
    for (Eigen::Index l = 0; l < half; ++l) {
        out(l) = segment(l).real();
        out(half + l) = segment(l).imag();
    }
    return out;
}

Eigen::VectorXcd transmit_weights(const SegmentPlan& plan, const ChannelSet& channels,
                                  const BeamformingSolution& solution) {
    const int K = static_cast<int>(channels.channels.size());
    Eigen::VectorXcd weights = Eigen::VectorXcd::Zero(K);
    for (int i = 0; i < plan.num_segments; ++i) {
        const Eigen::VectorXcd& w = solution.beamformers[i];
        for (int k : plan.groups[i]) {
            const std::complex<double> x = channels.channels[k].dot(w); // h_k^H w_i
            const double mag = std::abs(x);
            if (!(mag > 0.0))
                throw std::runtime_error("transmit_weights: beamformer orthogonal to device " +
                                         std::to_string(k));
            weights(k) = std::sqrt(solution.powers(k)) * (x / mag);
        }
    }
    return weights;
}

int channel_uses(const SegmentPlan& plan) { return plan.segment_len / 2; }

UplinkOutcome ota_round(const SegmentPlan& plan, const ChannelSet& channels,
                        const BeamformingSolution& solution,
                        const std::vector<ModelVector>& local_models,
                        const ModelVector& prev_global, bool noise_enabled,
                        bool interference_enabled, const RngState& rng) {
    plan.validate();
    const int K = static_cast<int>(channels.channels.size());
    const int S = plan.num_segments;
    const int uses = channel_uses(plan);
    if (static_cast<int>(local_models.size()) != K)
        throw std::invalid_argument("ota_round: one local model per device required");

    const Eigen::VectorXcd weights = transmit_weights(plan, channels, solution);

    // Packed, device-side local segments: each device transmits the segment
    // its group owns, normalized including the padding zeros.
    std::vector<Eigen::VectorXcd> local_packed(K);
    std::vector<double> local_norm(K, 0.0);
    for (int i = 0; i < S; ++i) {
        const int m = plan.segment_of_group(i);
        for (int k : plan.groups[i]) {
            local_packed[k] = pack_complex(local_models[k].segment(plan, m));
            local_norm[k] = local_packed[k].norm();
        }
    }

    UplinkOutcome out;
    out.channel_uses = uses;
    out.alpha = Eigen::VectorXd::Zero(K);
    out.rho = Eigen::VectorXd::Zero(K);
    out.alpha_s = Eigen::VectorXd::Zero(S);
    out.device_skipped.assign(K, 0);
    out.segment_carried.assign(S, 0);
    out.next_segments.resize(S);
    out.realized_noise.assign(S, Eigen::VectorXcd::Zero(uses));
    out.realized_interference.assign(S, Eigen::VectorXcd::Zero(uses));

    const double sigma = std::sqrt(channels.noise_power_linear);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const int N = static_cast<int>(channels.channels[0].size());

    for (int m = 0; m < S; ++m) {
        const int i = plan.group_of_segment(m);
        const Eigen::VectorXcd& w = solution.beamformers[i];

        double alpha_s = 0.0;
        for (int k : plan.groups[i]) {
            if (!(local_norm[k] > 0.0)) {
                out.device_skipped[k] = 1;
                continue;
            }
            const double gain = std::abs(channels.channels[k].dot(w));
            out.alpha(k) = std::sqrt(solution.powers(k)) * gain / local_norm[k];
            alpha_s += out.alpha(k);
        }
        out.alpha_s(m) = alpha_s;

        if (!(alpha_s > 0.0)) {
            // Nothing received for this segment; the previous value stands.
            out.segment_carried[m] = 1;
            out.next_segments[m] = pack_complex(prev_global.segment(plan, m));
            continue;
        }

        // Own-group superposition after receive beamforming (Eq.-level chain:
        // the coupling w^H h_k a_k is real positive by construction).
        Eigen::VectorXcd z = Eigen::VectorXcd::Zero(uses);
        for (int k : plan.groups[i]) {
            if (out.device_skipped[k])
                continue;
            const std::complex<double> coupling = w.dot(channels.channels[k]) * weights(k);
            z += (coupling / local_norm[k]) * local_packed[k];
            out.rho(k) = out.alpha(k) / alpha_s;
        }

        if (interference_enabled) {
            Eigen::VectorXcd interference = Eigen::VectorXcd::Zero(uses);
            for (int j = 0; j < S; ++j) {
                if (j == i)
                    continue;
                for (int q : plan.groups[j]) {
                    if (!(local_norm[q] > 0.0))
                        continue;
                    const std::complex<double> coupling =
                        w.dot(channels.channels[q]) * weights(q);
                    interference += (coupling / local_norm[q]) * local_packed[q];
                }
            }
            out.realized_interference[m] = interference / alpha_s;
            z += interference;
        }

        if (noise_enabled) {
            Eigen::VectorXcd projected(uses);
            for (int l = 0; l < uses; ++l) {
                auto gen = rng.stream(Stream::kReceiverNoise,
                                      static_cast<std::uint64_t>(channels.round),
                                      static_cast<std::uint64_t>(m),
                                      static_cast<std::uint64_t>(l));
                std::normal_distribution<double> normal(0.0, 1.0);
                std::complex<double> acc = 0.0;
                for (int n = 0; n < N; ++n) {
                    const double re = normal(gen);
                    const double im = normal(gen);
                    const std::complex<double> u =
                        sigma * std::complex<double>(re * inv_sqrt2, im * inv_sqrt2);
                    acc += std::conj(w(n)) * u;
                }
                projected(l) = acc;
            }
            out.realized_noise[m] = projected / alpha_s;
            z += projected;
        }

        out.next_segments[m] = z / alpha_s;
    }

    std::vector<Eigen::VectorXd> real_segments(S);
    for (int m = 0; m < S; ++m)
        real_segments[m] = unpack_complex(out.next_segments[m]);
    out.next_global = ModelVector::from_segments(plan, real_segments);
    return out;
}

UplinkOutcome ideal_round(const SegmentPlan& plan, const ChannelSet& channels,
                          const BeamformingSolution& solution,
                          const std::vector<ModelVector>& local_models,
                          const ModelVector& prev_global) {
    return ota_round(plan, channels, solution, local_models, prev_global,
                     /*noise_enabled=*/false, /*interference_enabled=*/false, RngState(0));
}

} // namespace segota
