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

#include "segota/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "segota/units.hpp"

namespace segota {

void ChannelConfig::validate() const {
    if (num_antennas < 1)
        throw std::invalid_argument("channel: num_antennas must be >= 1");
    if (num_devices < 1)
        throw std::invalid_argument("channel: num_devices must be >= 1");
    if (!(distance_min_km > 0.0) || !(distance_min_km < distance_max_km))
        throw std::invalid_argument("channel: need 0 < distance_min_km < distance_max_km");
    if (shadowing_std_db < 0.0)
        throw std::invalid_argument("channel: shadowing_std_db must be >= 0");
    for (double v : {noise_power_dbm, pathloss_intercept_db, pathloss_exponent_coeff,
                     distance_min_km, distance_max_km, shadowing_std_db, max_tx_power_dbm}) {
        if (!std::isfinite(v))
            throw std::invalid_argument("channel: all dB/geometry fields must be finite");
    }
}

std::vector<double> draw_static_geometry(const ChannelConfig& config, const RngState& rng) {
    config.validate();
    const int K = config.num_devices;

    std::vector<double> distances(K);
    {
        auto gen = rng.stream(Stream::kDistances);
        std::uniform_real_distribution<double> dist(config.distance_min_km, config.distance_max_km);
        for (int k = 0; k < K; ++k)
            distances[k] = dist(gen);
    }

    std::vector<double> shadowing_db(K, 0.0);
    if (config.shadowing_std_db > 0.0) {
        auto gen = rng.stream(Stream::kShadowing);
        std::normal_distribution<double> shadow(0.0, config.shadowing_std_db);
        for (int k = 0; k < K; ++k)
            shadowing_db[k] = shadow(gen);
    }

    std::vector<double> gains(K);
    for (int k = 0; k < K; ++k) {
        const double gain_db = config.pathloss_intercept_db -
                               config.pathloss_exponent_coeff * std::log10(distances[k]) -
                               shadowing_db[k];
        gains[k] = db_to_linear(gain_db);
    }
    return gains;
}

ChannelSet draw_round_channels(const ChannelConfig& config, const std::vector<double>& gains,
                               int round, const RngState& rng) {
    config.validate();
    if (static_cast<int>(gains.size()) != config.num_devices)
        throw std::invalid_argument("channel: gains size does not match num_devices");

    const int N = config.num_antennas;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

    ChannelSet set;
    set.round = round;
    set.noise_power_linear = dbm_to_watts(config.noise_power_dbm);
    set.channels.resize(gains.size());

    auto gen = rng.stream(Stream::kFading, static_cast<std::uint64_t>(round));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t k = 0; k < gains.size(); ++k) {
        const double amp = std::sqrt(gains[k]);
        Eigen::VectorXcd h(N);
        for (int n = 0; n < N; ++n) {
            const double re = normal(gen);
            const double im = normal(gen);
            h(n) = amp * std::complex<double>(re * inv_sqrt2, im * inv_sqrt2);
        }
        set.channels[k] = std::move(h);
    }
    return set;
}

} // namespace segota
