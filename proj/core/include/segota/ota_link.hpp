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

#ifndef SEGOTA_OTA_LINK_HPP
#define SEGOTA_OTA_LINK_HPP

#include <Eigen/Dense>
#include <vector>

#include "segota/beamforming.hpp"
#include "segota/channel.hpp"
#include "segota/grouping.hpp"
#include "segota/rng.hpp"

namespace segota {

/// Flat real parameter vector with zero-padded segment views.
class ModelVector {
  public:
    ModelVector() = default;
    explicit ModelVector(Eigen::VectorXd values) : values_(std::move(values)) {}
    static ModelVector zeros(int dim) { return ModelVector(Eigen::VectorXd::Zero(dim)); }

    int dim() const { return static_cast<int>(values_.size()); }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }

    /// Segment m of the padded index space [0, S_t * I_t); entries past the
    /// model dimension read as zero.
    Eigen::VectorXd segment(const SegmentPlan& plan, int m) const;

    /// Inverse of the segment view: concatenates segments and strips padding.
    static ModelVector from_segments(const SegmentPlan& plan,
                                     const std::vector<Eigen::VectorXd>& segments);

  private:
    Eigen::VectorXd values_;
};

/// First half of the reals becomes the real parts, second half the imaginary
/// parts. Throws on odd length.
Eigen::VectorXcd pack_complex(const Eigen::VectorXd& segment);

/// Exact inverse of pack_complex.
Eigen::VectorXd unpack_complex(const Eigen::VectorXcd& segment);

/// Per-device transmit weights a_k = sqrt(p_k) * h_k^H w_i / |h_k^H w_i|,
/// phase-aligned so the effective channel w_i^H h_k a_k is real positive.
/// Throws if some device's channel is orthogonal to its group beamformer.
Eigen::VectorXcd transmit_weights(const SegmentPlan& plan, const ChannelSet& channels,
                                  const BeamformingSolution& solution);

/// Everything observable about one uplink round.
struct UplinkOutcome {
    ModelVector next_global;
    std::vector<Eigen::VectorXcd> next_segments;          ///< indexed by segment m
    std::vector<Eigen::VectorXcd> realized_noise;         ///< scaled by 1/alpha_s
    std::vector<Eigen::VectorXcd> realized_interference;  ///< scaled by 1/alpha_s
    Eigen::VectorXd alpha;      ///< per-device effective channels
    Eigen::VectorXd rho;        ///< per-device aggregation weights (sum to 1 per group)
    Eigen::VectorXd alpha_s;    ///< per-segment scaling factor
    int channel_uses = 0;       ///< per device, = I_t / 2
    std::vector<char> device_skipped;   ///< zero-norm local segment, excluded
    std::vector<char> segment_carried;  ///< whole group skipped, segment kept
};

/// Simulates the uplink for one round: per-channel-use superposition of all
/// groups' phase-aligned transmissions, optional inter-segment interference
/// and receiver noise, receive beamforming, scaling and reconstruction of the
/// next global model. Noise is drawn from the receiver-noise substream keyed
/// by (round, segment, channel use), so every scheme sees the same
/// realization under one seed.
UplinkOutcome ota_round(const SegmentPlan& plan, const ChannelSet& channels,
                        const BeamformingSolution& solution,
                        const std::vector<ModelVector>& local_models,
                        const ModelVector& prev_global, bool noise_enabled,
                        bool interference_enabled, const RngState& rng);

/// Noise- and interference-free uplink with the same aggregation weights.
UplinkOutcome ideal_round(const SegmentPlan& plan, const ChannelSet& channels,
                          const BeamformingSolution& solution,
                          const std::vector<ModelVector>& local_models,
                          const ModelVector& prev_global);

/// Channel uses consumed per device per round.
int channel_uses(const SegmentPlan& plan);

} // namespace segota

#endif
