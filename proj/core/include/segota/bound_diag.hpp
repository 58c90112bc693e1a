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

#ifndef SEGOTA_BOUND_DIAG_HPP
#define SEGOTA_BOUND_DIAG_HPP

#include <vector>

#include "segota/beamforming.hpp"
#include "segota/channel.hpp"
#include "segota/grouping.hpp"
#include "segota/ota_link.hpp"
#include "segota/rng.hpp"

namespace segota {

/// Learning-task constants entering the convergence diagnostics. phi and mu
/// are properties of the task that cannot be identified cheaply; with the
/// zero defaults the per-round drift term is a lower envelope.
struct BoundConstants {
    double smoothness = 1.0;          ///< L
    double strong_convexity = 0.0;    ///< lambda
    double grad_divergence = 0.0;     ///< phi
    double minibatch_variance = 0.0;  ///< mu
    double segment_norm_cap = 0.0;    ///< nu; empirically tracked when <= 0

    void validate() const; ///< requires 0 < lambda <= L and phi, mu >= 0
};

struct ContractionTerms {
    double contraction = 0.0; ///< G_t = 4 (1 - eta * lambda)^(2J)
    double drift = 0.0;       ///< C_t = 4 eta^2 J^2 S_t (phi + K^2 mu)
};

/// Throws if eta >= 1/L (the contraction form does not apply there).
ContractionTerms eval_contraction(const BoundConstants& constants, double eta, int iterations,
                                  int num_segments, int num_devices);

/// Per-round noise-plus-interference penalty: the 4*nu weighted sum of the
/// per-group noise and cross-segment power ratios, with the coherent-gain
/// denominators (sum_k sqrt(p_k) |h_k^H w_i|)^2.
double eval_Ht(const SegmentPlan& plan, const ChannelSet& channels,
               const BeamformingSolution& solution, double nu);

/// The aggregation-error bound itself (no factor 4).
double delta_norm_bound(const SegmentPlan& plan, const ChannelSet& channels,
                        const BeamformingSolution& solution, double nu);

struct DeltaEstimate {
    double mean = 0.0;        ///< Monte-Carlo estimate of ||noise + interference||^2
    double std_error = 0.0;   ///< standard error of the mean
    int reps = 0;
};

/// Repeatedly realizes the receiver noise for one round (the interference is
/// deterministic given the local models) and averages the squared norm of the
/// stacked error vector.
DeltaEstimate estimate_delta_norm(const SegmentPlan& plan, const ChannelSet& channels,
                                  const BeamformingSolution& solution,
                                  const std::vector<ModelVector>& local_models, int reps,
                                  const RngState& rng, bool noise_enabled = true,
                                  bool interference_enabled = true);

/// Largest squared packed-segment norm over the round's local models; the
/// empirical value of the segment-norm cap.
double max_segment_norm_sq(const SegmentPlan& plan, const std::vector<ModelVector>& local_models);

struct RoundBoundTerms {
    double contraction = 0.0; ///< G_t
    double penalty = 0.0;     ///< H_t
    double drift = 0.0;       ///< C_t
};

/// Optimality-gap bound after T rounds: sum_t Gbar_t (H_t + C_t) +
/// gamma * prod_t G_t, with Gbar_t the product of the later contractions.
double prop1_trajectory(const std::vector<RoundBoundTerms>& rounds, double initial_gap);

/// Per-round diagnostic record attached to the metrics output.
struct RoundBoundReport {
    double contraction = 0.0;     ///< G_t
    double drift = 0.0;           ///< C_t
    double penalty = 0.0;         ///< H_t
    double delta_bound = 0.0;
    double delta_estimate = 0.0;
    bool delta_within_bound = true;
};

} // namespace segota

#endif
