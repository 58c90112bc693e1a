#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "segota/beamforming.hpp"
#include "support/oracles.hpp"

using namespace segota;

namespace {

SegmentPlan two_group_plan(std::vector<std::vector<int>> groups) {
    SegmentPlan plan;
    plan.num_segments = static_cast<int>(groups.size());
    plan.segment_len = 4;
    plan.model_dim = 4 * plan.num_segments;
    plan.padding_len = 0;
    plan.groups = std::move(groups);
    plan.group_to_segment.resize(plan.num_segments);
    plan.segment_to_group.resize(plan.num_segments);
    for (int i = 0; i < plan.num_segments; ++i) {
        plan.group_to_segment[i] = i;
        plan.segment_to_group[i] = i;
    }
    return plan;
}

NormalizedChannels unit_noise_channels(std::vector<Eigen::VectorXcd> f) {
    NormalizedChannels channels;
    channels.f = std::move(f);
    channels.sigma_tilde_sq = 1.0;
    channels.sigma_tilde = 1.0;
    return channels;
}

} // namespace

TEST_CASE("normalize_channels scales by the per-segment noise amplitude") {
    ChannelSet set;
    set.noise_power_linear = 2.0;
    set.channels = {Eigen::VectorXcd::Ones(3)};
    const NormalizedChannels f = normalize_channels(set, 10); // sigma_tilde^2 = 10
    CHECK(f.sigma_tilde_sq == doctest::Approx(10.0));
    CHECK((f.f[0] - Eigen::VectorXcd::Ones(3) / std::sqrt(10.0)).norm() < 1e-12);
    CHECK_THROWS(normalize_channels(set, 5)); // odd segment length
}

TEST_CASE("objective: single group has no interference term") {
    const SegmentPlan plan = two_group_plan({{0, 1}});
    std::mt19937_64 gen(1);
    const auto channels = unit_noise_channels(
        {oracle::random_complex_vector(4, gen), oracle::random_complex_vector(4, gen)});
    std::vector<Eigen::VectorXcd> w = {oracle::random_complex_vector(4, gen).normalized()};
    const Eigen::VectorXd p = Eigen::VectorXd::Constant(2, 1.5);

    double signal = 0.0;
    for (int k = 0; k < 2; ++k)
        signal += p(k) * std::norm(channels.f[k].dot(w[0]));
    CHECK(p1t_objective(plan, channels, w, p) == doctest::Approx(1.0 / signal).epsilon(1e-12));
}

TEST_CASE("objective: orthogonal cross channels vanish") {
    const SegmentPlan plan = two_group_plan({{0}, {1}});
    Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(2), e2 = Eigen::VectorXcd::Zero(2);
    e1(0) = 1.0;
    e2(1) = 1.0;
    const auto channels = unit_noise_channels({2.0 * e1, 3.0 * e2});
    const std::vector<Eigen::VectorXcd> w = {e1, e2};
    const Eigen::VectorXd p = Eigen::VectorXd::Ones(2);
    CHECK(p1t_objective(plan, channels, w, p) ==
          doctest::Approx(1.0 / 4.0 + 1.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("objective matches the independent scalar re-evaluation") {
    std::mt19937_64 gen(17);
    const auto inst = oracle::random_instance(gen, 4, 6, 2);
    std::vector<Eigen::VectorXcd> w;
    for (int i = 0; i < 2; ++i)
        w.push_back(oracle::random_complex_vector(4, gen).normalized());
    Eigen::VectorXd p(6);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    for (int k = 0; k < 6; ++k)
        p(k) = unif(gen) * inst.power_cap(k);

    const double lib = p1t_objective(inst.plan, inst.channels, w, p);
    const double ref = oracle::p1t_objective_reference(inst.plan, inst.channels, w, p);
    CHECK(lib == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("objective rejects a group with zero received power") {
    const SegmentPlan plan = two_group_plan({{0}, {1}});
    Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(2), e2 = Eigen::VectorXcd::Zero(2);
    e1(0) = 1.0;
    e2(1) = 1.0;
    const auto channels = unit_noise_channels({e1, e2});
    const std::vector<Eigen::VectorXcd> w = {e2, e1}; // each orthogonal to its own group
    CHECK_THROWS(p1t_objective(plan, channels, w, Eigen::VectorXd::Ones(2)));
}

TEST_CASE("beamformer update: matched filter for a lone device") {
    const SegmentPlan plan = two_group_plan({{0}});
    std::mt19937_64 gen(3);
    const Eigen::VectorXcd f = oracle::random_complex_vector(5, gen, 2.0);
    const auto channels = unit_noise_channels({f});
    const Eigen::VectorXcd w =
        update_receive_beamformer(0, plan, channels, Eigen::VectorXd::Ones(1));
    CHECK(std::abs(w.norm() - 1.0) < 1e-10);
    CHECK(cosine_similarity(w, f.normalized()) == doctest::Approx(1.0).epsilon(1e-10));

    const double quotient = oracle::rayleigh_quotient(
        Eigen::MatrixXcd::Identity(5, 5), f * f.adjoint(), w);
    CHECK(quotient == doctest::Approx(1.0 / f.squaredNorm()).epsilon(1e-10));
}

TEST_CASE("beamformer update: orthogonal nulling when it is free") {
    const SegmentPlan plan = two_group_plan({{0}, {1}});
    Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(2), e2 = Eigen::VectorXcd::Zero(2);
    e1(0) = 1.0;
    e2(1) = 1.0;
    const auto channels = unit_noise_channels({e1, e2});
    const Eigen::VectorXcd w =
        update_receive_beamformer(0, plan, channels, Eigen::VectorXd::Ones(2));
    CHECK((w - e1).norm() < 1e-10);
}

TEST_CASE("beamformer update matches the generalized-eigendecomposition oracle") {
    for (int trial = 0; trial < 25; ++trial) {
        std::mt19937_64 gen(100 + trial);
        std::uniform_int_distribution<int> n_dist(2, 8), k_dist(3, 12), s_dist(1, 3);
        const int n = n_dist(gen);
        int s = s_dist(gen);
        const int k = std::max(k_dist(gen), s);
        const auto inst = oracle::random_instance(gen, n, k, s);
        Eigen::VectorXd p(k);
        std::uniform_real_distribution<double> unif(0.05, 1.0);
        for (int i = 0; i < k; ++i)
            p(i) = unif(gen) * inst.power_cap(i);

        for (int group = 0; group < s; ++group) {
            const Eigen::MatrixXcd a =
                oracle::interference_matrix_reference(group, inst.plan, inst.channels, p);
            const Eigen::MatrixXcd b =
                oracle::signal_matrix_reference(group, inst.plan, inst.channels, p);
            const Eigen::VectorXcd w = update_receive_beamformer(group, inst.plan, inst.channels, p);
            const double got = oracle::rayleigh_quotient(a, b, w);
            const double want = oracle::min_generalized_quotient(a, b);
            CHECK(std::abs(got - want) <= 1e-8 * std::abs(want));

            const double sampled = oracle::min_quotient_random_search(a, b, 2000, gen);
            CHECK(got <= sampled * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("beamformer update throws when the whole group is powered off") {
    const SegmentPlan plan = two_group_plan({{0}, {1}});
    std::mt19937_64 gen(7);
    const auto channels = unit_noise_channels(
        {oracle::random_complex_vector(3, gen), oracle::random_complex_vector(3, gen)});
    Eigen::VectorXd p = Eigen::VectorXd::Ones(2);
    p(0) = 0.0;
    CHECK_THROWS(update_receive_beamformer(0, plan, channels, p));
}

TEST_CASE("pencil scale invariance") {
    std::mt19937_64 gen(31);
    Eigen::MatrixXcd g(4, 4);
    for (int c = 0; c < 4; ++c)
        g.col(c) = oracle::random_complex_vector(4, gen);
    const Eigen::MatrixXcd a = g * g.adjoint() + Eigen::MatrixXcd::Identity(4, 4);
    const Eigen::VectorXcd v = oracle::random_complex_vector(4, gen);
    const Eigen::MatrixXcd b = v * v.adjoint();

    const Eigen::VectorXcd w1 = min_rayleigh_pencil(a, b);
    const Eigen::VectorXcd w2 = min_rayleigh_pencil(7.25 * a, 7.25 * b);
    CHECK(cosine_similarity(w1, w2) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("power update: full power without interference") {
    const SegmentPlan plan = two_group_plan({{0, 1, 2}});
    std::mt19937_64 gen(11);
    std::vector<Eigen::VectorXcd> f;
    for (int i = 0; i < 3; ++i)
        f.push_back(oracle::random_complex_vector(4, gen));
    const auto channels = unit_noise_channels(f);
    const std::vector<Eigen::VectorXcd> w = {oracle::random_complex_vector(4, gen).normalized()};
    const Eigen::VectorXd cap = Eigen::VectorXd::Constant(3, 1.7);
    const Eigen::VectorXd block = update_group_power(0, plan, channels, w, cap, cap);
    CHECK((block - cap).norm() < 1e-15);
}

TEST_CASE("power update: inactive projection keeps everyone at the cap") {
    // Make leakage negligible so beta_min far exceeds the achievable sum.
    const SegmentPlan plan = two_group_plan({{0, 1}, {2}});
    Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(3), e2 = Eigen::VectorXcd::Zero(3),
                     e3 = Eigen::VectorXcd::Zero(3);
    e1(0) = 1.0;
    e2(1) = 1.0;
    e3(2) = 1.0;
    const auto channels = unit_noise_channels({e1, e2, 10.0 * e3});
    const std::vector<Eigen::VectorXcd> w = {
        (e1 + e2).normalized(), // hears its group, not the interferer
        e3,
    };
    const Eigen::VectorXd cap = Eigen::VectorXd::Ones(3);
    const Eigen::VectorXd block = update_group_power(0, plan, channels, w, cap, cap);
    CHECK((block - cap.head(2)).norm() == doctest::Approx(0.0));
}

TEST_CASE("power update matches grid search on small groups") {
    for (int trial = 0; trial < 8; ++trial) {
        std::mt19937_64 gen(500 + trial);
        const auto inst = oracle::random_instance(gen, 4, 6, 2, 3);
        // Beamformers from one BCD half-sweep give realistic gains.
        std::vector<Eigen::VectorXcd> w;
        for (int i = 0; i < 2; ++i)
            w.push_back(update_receive_beamformer(i, inst.plan, inst.channels, inst.power_cap));

        for (int group = 0; group < 2; ++group) {
            Eigen::VectorXd powers = inst.power_cap;
            const Eigen::VectorXd block =
                update_group_power(group, inst.plan, inst.channels, w, powers, inst.power_cap);
            const auto& members = inst.plan.groups[group];
            for (std::size_t idx = 0; idx < members.size(); ++idx)
                powers(members[idx]) = block(static_cast<int>(idx));
            const double closed = psub2_objective(group, inst.plan, inst.channels, w, powers);
            const double grid = oracle::psub2_grid_search(group, inst.plan, inst.channels, w,
                                                          inst.power_cap, inst.power_cap, 200);
            CHECK(closed <= grid * (1.0 + 1e-9));
            CHECK(std::abs(closed - grid) <= 1e-3 * std::abs(grid));
        }
    }
}

TEST_CASE("power update satisfies first-order optimality") {
    // Each device is at a box boundary or has (numerically) zero derivative.
    for (int trial = 0; trial < 6; ++trial) {
        std::mt19937_64 gen(900 + trial);
        const auto inst = oracle::random_instance(gen, 5, 7, 2);
        std::vector<Eigen::VectorXcd> w;
        for (int i = 0; i < 2; ++i)
            w.push_back(update_receive_beamformer(i, inst.plan, inst.channels, inst.power_cap));

        const int group = trial % 2;
        Eigen::VectorXd powers = inst.power_cap;
        const Eigen::VectorXd block =
            update_group_power(group, inst.plan, inst.channels, w, powers, inst.power_cap);
        const auto& members = inst.plan.groups[group];
        for (std::size_t idx = 0; idx < members.size(); ++idx)
            powers(members[idx]) = block(static_cast<int>(idx));

        for (std::size_t idx = 0; idx < members.size(); ++idx) {
            const int k = members[idx];
            const double cap = inst.power_cap(k);
            const double p = powers(k);
            if (p <= 1e-12 || p >= cap - 1e-12)
                continue; // at a box boundary
            const double step = 1e-6 * cap;
            Eigen::VectorXd up = powers, down = powers;
            up(k) += step;
            down(k) -= step;
            const double d = (psub2_objective(group, inst.plan, inst.channels, w, up) -
                              psub2_objective(group, inst.plan, inst.channels, w, down)) /
                             (2.0 * step);
            const double scale =
                std::abs(psub2_objective(group, inst.plan, inst.channels, w, powers)) / cap;
            CHECK(std::abs(d) <= 1e-4 * std::max(scale, 1e-12));
        }
    }
}

TEST_CASE("solve_p1t: single group converges immediately to matched filter and full power") {
    std::mt19937_64 gen(41);
    const auto inst = oracle::random_instance(gen, 4, 5, 1);
    const BeamformingSolution sol = solve_p1t(inst.plan, inst.channels, inst.power_cap, {});
    CHECK(sol.iterations <= 1);
    CHECK((sol.powers - inst.power_cap).norm() == doctest::Approx(0.0));
    const Eigen::VectorXcd matched =
        update_receive_beamformer(0, inst.plan, inst.channels, inst.power_cap);
    CHECK(cosine_similarity(sol.beamformers[0], matched) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("frozen powers: repeated beamformer sweeps never increase the objective") {
    std::mt19937_64 gen(55);
    const auto inst = oracle::random_instance(gen, 5, 8, 3);
    std::vector<Eigen::VectorXcd> w;
    for (int i = 0; i < 3; ++i)
        w.push_back(update_receive_beamformer(i, inst.plan, inst.channels, inst.power_cap));
    double obj = p1t_objective(inst.plan, inst.channels, w, inst.power_cap);
    for (int sweep = 0; sweep < 4; ++sweep) {
        for (int i = 0; i < 3; ++i) {
            w[i] = update_receive_beamformer(i, inst.plan, inst.channels, inst.power_cap);
            const double next = p1t_objective(inst.plan, inst.channels, w, inst.power_cap);
            CHECK(next <= obj * (1.0 + 1e-9));
            obj = next;
        }
    }
}

TEST_CASE("solve_p1t dominates ZF and matched-filter baselines") {
    for (int trial = 0; trial < 20; ++trial) {
        std::mt19937_64 gen(2000 + trial);
        const auto inst = oracle::random_instance(gen, 8, 12, 3);
        const BeamformingSolution bcd = solve_p1t(inst.plan, inst.channels, inst.power_cap, {});

        const BeamformingSolution zf = solve_zf(inst.plan, inst.channels, inst.power_cap);
        CHECK(bcd.objective <= zf.objective * (1.0 + 1e-9));

        // Matched filter per group at full power: top eigenvector of the
        // group's own signal matrix.
        std::vector<Eigen::VectorXcd> mf;
        for (int i = 0; i < 3; ++i) {
            const Eigen::MatrixXcd b =
                oracle::signal_matrix_reference(i, inst.plan, inst.channels, inst.power_cap);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);
            mf.push_back(es.eigenvectors().col(7));
        }
        const double mf_obj = p1t_objective(inst.plan, inst.channels, mf, inst.power_cap);
        CHECK(bcd.objective <= mf_obj * (1.0 + 1e-9));
    }
}

TEST_CASE("solve_p1t monotone trace and feasibility") {
    for (int trial = 0; trial < 10; ++trial) {
        std::mt19937_64 gen(3000 + trial);
        const auto inst = oracle::random_instance(gen, 6, 9, 3);
        const BeamformingSolution sol = solve_p1t(inst.plan, inst.channels, inst.power_cap, {});

        for (std::size_t i = 1; i < sol.objective_trace.size(); ++i)
            CHECK(sol.objective_trace[i] <= sol.objective_trace[i - 1] * (1.0 + 1e-9));
        for (const auto& w : sol.beamformers)
            CHECK(std::abs(w.norm() - 1.0) < 1e-10);
        for (int k = 0; k < 9; ++k) {
            CHECK(sol.powers(k) >= -1e-15);
            CHECK(sol.powers(k) <= inst.power_cap(k) * (1.0 + 1e-12));
        }
        CHECK(sol.objective > 0.0);
        CHECK(std::isfinite(sol.objective));
        CHECK(sol.iterations <= 100);
    }
}

TEST_CASE("zf beamformer nulls interferers") {
    SUBCASE("two antennas, one interferer") {
        const SegmentPlan plan = two_group_plan({{0}, {1}});
        Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(2), e2 = Eigen::VectorXcd::Zero(2);
        e1(0) = 1.0;
        e2(1) = 1.0;
        const auto channels = unit_noise_channels({e1, e2});
        const ZfBeamformer zf = zf_beamformer(0, plan, channels);
        CHECK(!zf.degenerate);
        CHECK((zf.w - e1).norm() < 1e-12);
    }

    SUBCASE("no interferers reduces to matched filter") {
        std::mt19937_64 gen(61);
        const auto inst = oracle::random_instance(gen, 4, 3, 1);
        const ZfBeamformer zf = zf_beamformer(0, inst.plan, inst.channels);
        const Eigen::MatrixXcd b = oracle::signal_matrix_reference(
            0, inst.plan, inst.channels, Eigen::VectorXd::Ones(3));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);
        CHECK(cosine_similarity(zf.w, es.eigenvectors().col(3)) ==
              doctest::Approx(1.0).epsilon(1e-10));
    }

    SUBCASE("random instance: out-of-group gain suppressed below 1e-10") {
        std::mt19937_64 gen(62);
        const auto inst = oracle::random_instance(gen, 8, 4, 2);
        for (int group = 0; group < 2; ++group) {
            const ZfBeamformer zf = zf_beamformer(group, inst.plan, inst.channels);
            REQUIRE(!zf.degenerate);
            double in_gain = 0.0, out_gain = 0.0;
            for (int j = 0; j < 2; ++j)
                for (int q : inst.plan.groups[j]) {
                    const double g = std::abs(inst.channels.f[q].dot(zf.w));
                    (j == group ? in_gain : out_gain) = std::max(j == group ? in_gain : out_gain, g);
                }
            CHECK(out_gain <= 1e-10 * in_gain);
        }
    }

    SUBCASE("degenerate case is flagged") {
        std::mt19937_64 gen(63);
        const auto inst = oracle::random_instance(gen, 3, 8, 2); // 4+ interferers span C^3
        int flagged = 0;
        for (int group = 0; group < 2; ++group)
            flagged += zf_beamformer(group, inst.plan, inst.channels).degenerate ? 1 : 0;
        CHECK(flagged == 2);
    }
}
