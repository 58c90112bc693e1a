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

#include "segota/beamforming.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace segota {

namespace {

constexpr double kDescentRelTol = 1e-9;

// |f_q^H w_i|^2 for every (group, device) pair; rows index groups.
Eigen::MatrixXd gain_matrix(const SegmentPlan& plan, const NormalizedChannels& channels,
                            const std::vector<Eigen::VectorXcd>& beamformers) {
    const int S = plan.num_segments;
    const int K = static_cast<int>(channels.f.size());
    Eigen::MatrixXd gains(S, K);
    for (int i = 0; i < S; ++i)
        for (int k = 0; k < K; ++k)
            gains(i, k) = std::norm(channels.f[k].dot(beamformers[i]));
    return gains;
}

double objective_from_gains(const SegmentPlan& plan, const Eigen::MatrixXd& gains,
                            const Eigen::VectorXd& powers) {
    const int S = plan.num_segments;
    double total = 0.0;
    for (int i = 0; i < S; ++i) {
        double signal = 0.0;
        for (int k : plan.groups[i])
            signal += powers(k) * gains(i, k);
        if (!(signal > 0.0))
            throw std::runtime_error("p1t: group " + std::to_string(i) +
                                     " has zero received power");
        double interference = 0.0;
        for (int j = 0; j < S; ++j) {
            if (j == i)
                continue;
            for (int q : plan.groups[j])
                interference += powers(q) * gains(i, q);
        }
        const double z = static_cast<double>(plan.out_of_group_count(i));
        total += (z * interference + 1.0) / signal;
    }
    return total;
}

// Rotates the largest-magnitude entry to be real positive.
void fix_phase(Eigen::VectorXcd& w) {
    int idx = 0;
    double best = -1.0;
    for (int n = 0; n < w.size(); ++n) {
        const double a = std::abs(w(n));
        if (a > best) {
            best = a;
            idx = n;
        }
    }
    if (best > 0.0)
        w *= std::polar(1.0, -std::arg(w(idx)));
}

Eigen::MatrixXcd interference_matrix(int group, const SegmentPlan& plan,
                                     const NormalizedChannels& channels,
                                     const Eigen::VectorXd& powers) {
    const int N = static_cast<int>(channels.f[0].size());
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(N, N);
    const double z = static_cast<double>(plan.out_of_group_count(group));
    for (int j = 0; j < plan.num_segments; ++j) {
        if (j == group)
            continue;
        for (int q : plan.groups[j])
            a += (z * powers(q)) * (channels.f[q] * channels.f[q].adjoint());
    }
    return a;
}

Eigen::MatrixXcd signal_matrix(int group, const SegmentPlan& plan,
                               const NormalizedChannels& channels,
                               const Eigen::VectorXd& powers) {
    const int N = static_cast<int>(channels.f[0].size());
    Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(N, N);
    for (int k : plan.groups[group])
        b += powers(k) * (channels.f[k] * channels.f[k].adjoint());
    return b;
}

} // namespace

NormalizedChannels normalize_channels(const ChannelSet& channels, int segment_len) {
    if (segment_len < 2 || segment_len % 2 != 0)
        throw std::invalid_argument("normalize_channels: segment_len must be even and positive");
    if (!(channels.noise_power_linear > 0.0))
        throw std::invalid_argument("normalize_channels: noise power must be positive");
    NormalizedChannels out;
    out.sigma_tilde_sq = channels.noise_power_linear * static_cast<double>(segment_len) / 2.0;
    out.sigma_tilde = std::sqrt(out.sigma_tilde_sq);
    out.f.reserve(channels.channels.size());
    for (const auto& h : channels.channels)
        out.f.push_back(h / out.sigma_tilde);
    return out;
}

double p1t_objective(const SegmentPlan& plan, const NormalizedChannels& channels,
                     const std::vector<Eigen::VectorXcd>& beamformers,
                     const Eigen::VectorXd& powers) {
    return objective_from_gains(plan, gain_matrix(plan, channels, beamformers), powers);
}

Eigen::VectorXd group_sinr_values(const SegmentPlan& plan, const NormalizedChannels& channels,
                                  const std::vector<Eigen::VectorXcd>& beamformers,
                                  const Eigen::VectorXd& powers) {
    const Eigen::MatrixXd gains = gain_matrix(plan, channels, beamformers);
    const int S = plan.num_segments;
    Eigen::VectorXd sinr(S);
    for (int i = 0; i < S; ++i) {
        double signal = 0.0;
        for (int k : plan.groups[i])
            signal += powers(k) * gains(i, k);
        double interference = 0.0;
        for (int j = 0; j < S; ++j) {
            if (j == i)
                continue;
            for (int q : plan.groups[j])
                interference += powers(q) * gains(i, q);
        }
        const double z = static_cast<double>(plan.out_of_group_count(i));
        sinr(i) = signal / (z * interference + 1.0);
    }
    return sinr;
}

Eigen::VectorXcd min_rayleigh_pencil(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                                     double regularization) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXcd a_reg = a;
    if (regularization > 0.0)
        a_reg += regularization * Eigen::MatrixXcd::Identity(n, n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es_a(a_reg);
    if (es_a.info() != Eigen::Success)
        throw std::runtime_error("pencil: eigendecomposition of A failed");
    if (!(es_a.eigenvalues().minCoeff() > 0.0))
        throw std::runtime_error("pencil: A is not positive definite");

    const Eigen::VectorXd inv_sqrt = es_a.eigenvalues().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXcd whitener =
        es_a.eigenvectors() * inv_sqrt.asDiagonal() * es_a.eigenvectors().adjoint();

    Eigen::MatrixXcd m = whitener * b * whitener;
    m = 0.5 * (m + m.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es_m(m);
    if (es_m.info() != Eigen::Success)
        throw std::runtime_error("pencil: eigendecomposition of the whitened matrix failed");
    if (!(es_m.eigenvalues()(n - 1) > 0.0))
        throw std::runtime_error("pencil: B is numerically zero");

    Eigen::VectorXcd w = whitener * es_m.eigenvectors().col(n - 1);
    w.normalize();
    fix_phase(w);
    return w;
}

Eigen::VectorXcd update_receive_beamformer(int group, const SegmentPlan& plan,
                                           const NormalizedChannels& channels,
                                           const Eigen::VectorXd& powers,
                                           double regularization) {
    double group_power = 0.0;
    for (int k : plan.groups[group])
        group_power += powers(k);
    if (!(group_power > 0.0))
        throw std::runtime_error("beamformer update: all powers in group " +
                                 std::to_string(group) + " are zero");
    return min_rayleigh_pencil(interference_matrix(group, plan, channels, powers),
                               signal_matrix(group, plan, channels, powers), regularization);
}

double psub2_objective(int group, const SegmentPlan& plan, const NormalizedChannels& channels,
                       const std::vector<Eigen::VectorXcd>& beamformers,
                       const Eigen::VectorXd& powers) {
    const Eigen::MatrixXd gains = gain_matrix(plan, channels, beamformers);
    const int S = plan.num_segments;

    double own = 0.0;
    for (int k : plan.groups[group])
        own += powers(k) * gains(group, k);
    if (!(own > 0.0))
        throw std::runtime_error("psub2: zero own-group received power");

    double cross_in = 0.0;
    for (int j = 0; j < S; ++j) {
        if (j == group)
            continue;
        for (int q : plan.groups[j])
            cross_in += powers(q) * gains(group, q);
    }
    const double z_i = static_cast<double>(plan.out_of_group_count(group));
    double value = (z_i * cross_in + 1.0) / own;

    for (int j = 0; j < S; ++j) {
        if (j == group)
            continue;
        double denom_j = 0.0;
        for (int q : plan.groups[j])
            denom_j += powers(q) * gains(j, q);
        if (!(denom_j > 0.0))
            throw std::runtime_error("psub2: zero received power in group " + std::to_string(j));
        double leak = 0.0;
        for (int k : plan.groups[group])
            leak += powers(k) * gains(j, k);
        const double z_j = static_cast<double>(plan.out_of_group_count(j));
        value += z_j * leak / denom_j;
    }
    return value;
}

Eigen::VectorXd update_group_power(int group, const SegmentPlan& plan,
                                   const NormalizedChannels& channels,
                                   const std::vector<Eigen::VectorXcd>& beamformers,
                                   const Eigen::VectorXd& powers,
                                   const Eigen::VectorXd& power_cap) {
    const Eigen::MatrixXd gains = gain_matrix(plan, channels, beamformers);
    const auto& members = plan.groups[group];
    const int n = static_cast<int>(members.size());
    const int S = plan.num_segments;
    const double inf = std::numeric_limits<double>::infinity();

    // c1 = Z_i * (cross-group power seen at w_i) + 1, fixed during this block.
    double cross_in = 0.0;
    for (int j = 0; j < S; ++j) {
        if (j == group)
            continue;
        for (int q : plan.groups[j])
            cross_in += powers(q) * gains(group, q);
    }
    const double c1 = static_cast<double>(plan.out_of_group_count(group)) * cross_in + 1.0;

    // Leakage price d_k of device k into the other groups' objective terms.
    Eigen::VectorXd own_gain(n), price(n), cap(n);
    for (int idx = 0; idx < n; ++idx) {
        const int k = members[idx];
        own_gain(idx) = gains(group, k);
        cap(idx) = power_cap(k);
        double d = 0.0;
        for (int j = 0; j < S; ++j) {
            if (j == group)
                continue;
            double denom_j = 0.0;
            for (int q : plan.groups[j])
                denom_j += powers(q) * gains(j, q);
            if (!(denom_j > 0.0))
                throw std::runtime_error("power update: zero received power in group " +
                                         std::to_string(j));
            d += static_cast<double>(plan.out_of_group_count(j)) * gains(j, k) / denom_j;
        }
        price(idx) = d;
    }
    if (own_gain.maxCoeff() <= 0.0)
        throw std::runtime_error("power update: beamformer orthogonal to all of group " +
                                 std::to_string(group));

    Eigen::VectorXd block = cap;
    // A device the beamformer cannot hear contributes nothing to the group
    // sum; it only pays its leakage price.
    std::vector<int> active;
    for (int idx = 0; idx < n; ++idx) {
        if (own_gain(idx) > 0.0)
            active.push_back(idx);
        else
            block(idx) = price(idx) > 0.0 ? 0.0 : cap(idx);
    }

    // beta_k = sqrt(c1 * g_k / d_k): the own-group power sum at which reducing
    // device k stops paying off. Devices with no leakage stay at the cap.
    Eigen::VectorXd beta(n);
    bool any_price = false;
    for (int idx : active) {
        if (price(idx) > 0.0) {
            beta(idx) = std::sqrt(c1 * own_gain(idx) / price(idx));
            any_price = true;
        } else {
            beta(idx) = inf;
        }
    }
    if (!any_price)
        return block;

    std::vector<int> order = active;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return beta(a) < beta(b); });

    // Reduce the cheapest device toward its beta target; if it bottoms out at
    // zero, cascade to the next one. At most one device ends up strictly
    // between the box bounds.
    for (int idx : order) {
        if (!std::isfinite(beta(idx)))
            break;
        double others = 0.0;
        for (int other : active)
            if (other != idx)
                others += own_gain(other) * block(other);
        const double target = (beta(idx) - others) / own_gain(idx);
        block(idx) = std::clamp(target, 0.0, cap(idx));
        if (block(idx) > 0.0)
            break;
    }
    return block;
}

BeamformingSolution solve_p1t(const SegmentPlan& plan, const NormalizedChannels& channels,
                              const Eigen::VectorXd& power_cap, const BcdConfig& config) {
    plan.validate();
    const int S = plan.num_segments;
    const int K = static_cast<int>(channels.f.size());
    if (power_cap.size() != K)
        throw std::invalid_argument("solve_p1t: power_cap size mismatch");
    if (!(power_cap.minCoeff() > 0.0))
        throw std::invalid_argument("solve_p1t: power caps must be positive");
    if (!(config.rel_tolerance > 0.0) || config.max_outer_iters < 1)
        throw std::invalid_argument("solve_p1t: bad BCD config");

    BeamformingSolution sol;
    sol.powers = power_cap; // full-power initialization
    sol.beamformers.resize(S);
    for (int i = 0; i < S; ++i)
        sol.beamformers[i] = update_receive_beamformer(i, plan, channels, sol.powers,
                                                       config.eigen_regularization);

    double objective = p1t_objective(plan, channels, sol.beamformers, sol.powers);
    sol.objective_trace.push_back(objective);

    auto record = [&](double next) {
        if (next > objective * (1.0 + kDescentRelTol))
            throw std::logic_error("solve_p1t: objective increased during BCD");
        objective = next;
        sol.objective_trace.push_back(next);
    };

    int iter = 0;
    for (; iter < config.max_outer_iters; ++iter) {
        const double sweep_start = objective;

        for (int i = 0; i < S; ++i) {
            sol.beamformers[i] = update_receive_beamformer(i, plan, channels, sol.powers,
                                                           config.eigen_regularization);
            record(p1t_objective(plan, channels, sol.beamformers, sol.powers));
        }
        for (int i = 0; i < S; ++i) {
            const Eigen::VectorXd block = update_group_power(i, plan, channels, sol.beamformers,
                                                             sol.powers, power_cap);
            const auto& members = plan.groups[i];
            for (std::size_t idx = 0; idx < members.size(); ++idx)
                sol.powers(members[idx]) = block(static_cast<int>(idx));
            record(p1t_objective(plan, channels, sol.beamformers, sol.powers));
        }

        if ((sweep_start - objective) < config.rel_tolerance * sweep_start) {
            ++iter;
            break;
        }
    }

    sol.iterations = iter;
    sol.objective = objective;
    sol.group_sinr = group_sinr_values(plan, channels, sol.beamformers, sol.powers);
    return sol;
}

ZfBeamformer zf_beamformer(int group, const SegmentPlan& plan,
                           const NormalizedChannels& channels) {
    const int N = static_cast<int>(channels.f[0].size());
    std::vector<int> outsiders;
    for (int j = 0; j < plan.num_segments; ++j) {
        if (j == group)
            continue;
        for (int q : plan.groups[j])
            outsiders.push_back(q);
    }

    const Eigen::MatrixXcd b = signal_matrix(group, plan, channels,
                                             Eigen::VectorXd::Ones(channels.f.size()));

    ZfBeamformer out;
    if (outsiders.empty()) {
        // Matched filter on the group's dominant direction.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);
        out.w = es.eigenvectors().col(N - 1);
        out.w.normalize();
        fix_phase(out.w);
        return out;
    }

    Eigen::MatrixXcd f_out(N, outsiders.size());
    for (std::size_t c = 0; c < outsiders.size(); ++c)
        f_out.col(c) = channels.f[outsiders[c]];

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(f_out, Eigen::ComputeFullU);
    const Eigen::VectorXd sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? sv(0) * N * 1e-13 : 0.0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff)
            ++rank;

    if (rank >= N) {
        // No null space left; fall back to the least-squares null direction.
        out.degenerate = true;
        Eigen::MatrixXcd outer = Eigen::MatrixXcd::Zero(N, N);
        for (int q : outsiders)
            outer += channels.f[q] * channels.f[q].adjoint();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(outer);
        out.w = es.eigenvectors().col(0);
        out.w.normalize();
        fix_phase(out.w);
        return out;
    }

    const Eigen::MatrixXcd null_basis = svd.matrixU().rightCols(N - rank);
    const Eigen::MatrixXcd b_null = null_basis.adjoint() * b * null_basis;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (b_null + b_null.adjoint().eval()));
    out.w = null_basis * es.eigenvectors().col(N - rank - 1);
    out.w.normalize();
    fix_phase(out.w);
    return out;
}

BeamformingSolution solve_zf(const SegmentPlan& plan, const NormalizedChannels& channels,
                             const Eigen::VectorXd& power_cap) {
    plan.validate();
    BeamformingSolution sol;
    sol.powers = power_cap;
    sol.beamformers.resize(plan.num_segments);
    for (int i = 0; i < plan.num_segments; ++i) {
        ZfBeamformer zf = zf_beamformer(i, plan, channels);
        sol.beamformers[i] = zf.w;
        sol.zf_degenerate = sol.zf_degenerate || zf.degenerate;
    }
    sol.objective = p1t_objective(plan, channels, sol.beamformers, sol.powers);
    sol.objective_trace.push_back(sol.objective);
    sol.group_sinr = group_sinr_values(plan, channels, sol.beamformers, sol.powers);
    sol.iterations = 1;
    return sol;
}

} // namespace segota
