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

#ifndef SEGOTA_CHANNEL_HPP
#define SEGOTA_CHANNEL_HPP

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "segota/rng.hpp"

namespace segota {

/// Uplink geometry and radio parameters. dB/dBm at this boundary only.
struct ChannelConfig {
    int num_antennas = 8;                ///< N
    int num_devices = 10;                ///< K
    double noise_power_dbm = -79.0;      ///< receiver noise floor
    double pathloss_intercept_db = -136.3;
    double pathloss_exponent_coeff = 35.0; ///< multiplies log10(distance in km)
    double distance_min_km = 0.02;
    double distance_max_km = 0.5;
    double shadowing_std_db = 8.0;
    double max_tx_power_dbm = 23.0;      ///< per-device cap P_k

    void validate() const; ///< throws std::invalid_argument on bad fields
};

/// One round's channel realization: K complex N-vectors in linear amplitude
/// units plus the noise power in watts. Immutable after creation; safe to
/// share across threads.
struct ChannelSet {
    int round = 0;
    std::vector<Eigen::VectorXcd> channels; ///< h_k, one per device
    double noise_power_linear = 0.0;        ///< sigma^2, watts
};

/// Per-device linear path gains, fixed for a whole simulation. Distances are
/// uniform on the configured range, shadowing is zero-mean Gaussian in dB.
std::vector<double> draw_static_geometry(const ChannelConfig& config, const RngState& rng);

/// Fresh small-scale fading for round t: h_k = sqrt(G_k) * hbar_k with hbar_k
/// i.i.d. circularly-symmetric complex Gaussian, unit variance per entry.
ChannelSet draw_round_channels(const ChannelConfig& config, const std::vector<double>& gains,
                               int round, const RngState& rng);

} // namespace segota

#endif
