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

#ifndef SEGOTA_BEAMFORMING_HPP
#define SEGOTA_BEAMFORMING_HPP

#include <Eigen/Dense>
#include <vector>

#include "segota/channel.hpp"
#include "segota/grouping.hpp"

namespace segota {

/// Channels scaled by the effective per-segment noise amplitude:
/// f_k = h_k / sigma_tilde with sigma_tilde^2 = sigma^2 * I_t / 2.
struct NormalizedChannels {
    std::vector<Eigen::VectorXcd> f;
    double sigma_tilde_sq = 0.0;
    double sigma_tilde = 0.0;
};

NormalizedChannels normalize_channels(const ChannelSet& channels, int segment_len);

struct BcdConfig {
    int max_outer_iters = 100;
    double rel_tolerance = 1e-8;
    double eigen_regularization = 0.0; ///< added to A's diagonal before whitening
    bool full_power_init = true;       ///< the only shipped policy
};

/// Joint receive-beamformer / transmit-power solution for one round.
struct BeamformingSolution {
    std::vector<Eigen::VectorXcd> beamformers; ///< unit norm, one per group
    Eigen::VectorXd powers;                    ///< per device, in [0, cap_k]
    double objective = 0.0;                    ///< sum of inverse SINR over groups
    Eigen::VectorXd group_sinr;                ///< per group
    int iterations = 0;                        ///< outer BCD sweeps executed
    std::vector<double> objective_trace;       ///< objective after every sub-update
    bool zf_degenerate = false;
};

/// Sum over groups of (Z_i * cross-group power at w_i + 1) / own-group power
/// at w_i. Throws if any group's received power is zero.
double p1t_objective(const SegmentPlan& plan, const NormalizedChannels& channels,
                     const std::vector<Eigen::VectorXcd>& beamformers,
                     const Eigen::VectorXd& powers);

/// Per-group inverse of the objective terms: signal / (Z_i * interference + 1).
Eigen::VectorXd group_sinr_values(const SegmentPlan& plan, const NormalizedChannels& channels,
                                  const std::vector<Eigen::VectorXcd>& beamformers,
                                  const Eigen::VectorXd& powers);

/// Unit-norm minimizer of w^H A w / w^H B w for a Hermitian pencil with A
/// positive definite and B nonzero PSD. Solved by whitening with A^{-1/2} and
/// taking the top eigenvector of A^{-1/2} B A^{-1/2}; this avoids inverting B,
/// whose rank is typically below N. The returned vector's largest entry is
/// rotated to be real positive so results are reproducible.
Eigen::VectorXcd min_rayleigh_pencil(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                                     double regularization = 0.0);

/// One beamformer block update: exact minimizer of group i's objective term
/// with all powers held fixed.
Eigen::VectorXcd update_receive_beamformer(int group, const SegmentPlan& plan,
                                           const NormalizedChannels& channels,
                                           const Eigen::VectorXd& powers,
                                           double regularization = 0.0);

/// One power block update for group i with every other group's powers fixed:
/// exact minimizer of the convex per-group subproblem over [0, cap]. All but
/// one device sit at the cap; the marginal device is reduced (cascading to
/// the next device only if a block boundary is hit). Returned in the order of
/// plan.groups[group].
Eigen::VectorXd update_group_power(int group, const SegmentPlan& plan,
                                   const NormalizedChannels& channels,
                                   const std::vector<Eigen::VectorXcd>& beamformers,
                                   const Eigen::VectorXd& powers,
                                   const Eigen::VectorXd& power_cap);

/// The per-group power subproblem objective seen by update_group_power
/// (group i's inverse-SINR term plus its leakage prices into other groups).
double psub2_objective(int group, const SegmentPlan& plan, const NormalizedChannels& channels,
                       const std::vector<Eigen::VectorXcd>& beamformers,
                       const Eigen::VectorXd& powers);

/// Block coordinate descent on beamformers and powers from full-power
/// initialization. The objective is checked to be non-increasing after every
/// sub-update (1e-9 relative); a violation throws std::logic_error.
BeamformingSolution solve_p1t(const SegmentPlan& plan, const NormalizedChannels& channels,
                              const Eigen::VectorXd& power_cap, const BcdConfig& config);

struct ZfBeamformer {
    Eigen::VectorXcd w;
    bool degenerate = false; ///< out-of-group channels span the whole space
};

/// Zero-forcing receive beamformer: the best own-group direction within the
/// orthogonal complement of the out-of-group channel span. When no such
/// complement exists the least-squares null approximation is returned and
/// flagged degenerate.
ZfBeamformer zf_beamformer(int group, const SegmentPlan& plan,
                           const NormalizedChannels& channels);

/// ZF beamformers for all groups under full transmit power.
BeamformingSolution solve_zf(const SegmentPlan& plan, const NormalizedChannels& channels,
                             const Eigen::VectorXd& power_cap);

} // namespace segota

#endif
