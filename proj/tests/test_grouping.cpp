#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <set>

#include "segota/grouping.hpp"
#include "support/oracles.hpp"

using namespace segota;
using std::complex;

namespace {

ChannelSet channels_from(const std::vector<Eigen::VectorXcd>& h) {
    ChannelSet set;
    set.channels = h;
    set.noise_power_linear = 1.0;
    return set;
}

Eigen::VectorXcd cvec(std::initializer_list<complex<double>> values) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (auto x : values)
        v(i++) = x;
    return v;
}

} // namespace

TEST_CASE("feature space normalizes and phase-aligns") {
    const auto points = build_feature_space(channels_from({
        cvec({{2, 0}, {0, 0}}),
        cvec({{0, 1}, {0, 0}}),              // pure phase j
        cvec({{1, 1}, {1, -1}}),             // (1+j, 1-j)
    }));

    CHECK((points[0].vector - cvec({{1, 0}, {0, 0}})).norm() < 1e-12);
    CHECK((points[1].vector - cvec({{1, 0}, {0, 0}})).norm() < 1e-12);
    // (1+j, 1-j): rotation by -arg(1+j) = -pi/4 gives (1/sqrt2, -j/sqrt2).
    CHECK((points[2].vector - cvec({{1.0 / std::sqrt(2.0), 0}, {0, -1.0 / std::sqrt(2.0)}}))
              .norm() < 1e-12);

    for (const auto& p : points) {
        CHECK(std::abs(p.vector.norm() - 1.0) < 1e-12);
        CHECK(std::abs(std::arg(p.vector(0))) < 1e-12);
    }
}

TEST_CASE("feature space rejects zero channels") {
    CHECK_THROWS(build_feature_space(channels_from({cvec({{0, 0}, {0, 0}})})));
}

TEST_CASE("similarity metric") {
    const auto x = cvec({{1, 0}, {0, 0}});
    CHECK(cosine_similarity(x, x) == doctest::Approx(1.0));
    CHECK(cosine_similarity(x, cvec({{0, 0}, {1, 0}})) == doctest::Approx(0.0));
    const auto c = cvec({{1.0 / std::sqrt(2.0), 0}, {1.0 / std::sqrt(2.0), 0}});
    CHECK(cosine_similarity(x, c) == doctest::Approx(0.7071).epsilon(1e-4));
}

TEST_CASE("phase invariance of the feature map") {
    std::mt19937_64 gen(99);
    auto h = oracle::random_complex_vector(6, gen, 2.0);
    auto rotated = h * std::polar(1.0, 1.234);
    const auto a = build_feature_space(channels_from({h}));
    const auto b = build_feature_space(channels_from({rotated}));
    CHECK((a[0].vector - b[0].vector).norm() < 1e-12);
}

TEST_CASE("kmeans: singleton clusters when S equals K") {
    std::mt19937_64 gen(5);
    std::vector<Eigen::VectorXcd> h;
    for (int k = 0; k < 5; ++k)
        h.push_back(oracle::random_complex_vector(4, gen));
    const auto points = build_feature_space(channels_from(h));
    const auto result = spherical_kmeans(points, 5, RngState(1), 0);

    std::set<int> seen;
    for (const auto& g : result.groups) {
        REQUIRE(g.size() == 1);
        seen.insert(g[0]);
    }
    CHECK(seen.size() == 5);
    // Each centroid coincides (up to phase) with its member point.
    for (std::size_t r = 0; r < result.groups.size(); ++r) {
        const auto& p = points[result.groups[r][0]].vector;
        CHECK(cosine_similarity(p, result.centroids[r].vector) == doctest::Approx(1.0));
    }
}

TEST_CASE("kmeans: antipodal phases collapse into one cluster") {
    auto direction = cvec({{0.6, 0}, {0.8, 0}});
    std::vector<Eigen::VectorXcd> h = {direction, -direction};
    const auto points = build_feature_space(channels_from(h));
    const auto result = spherical_kmeans(points, 1, RngState(3), 0);
    REQUIRE(result.groups.size() == 1);
    CHECK(result.groups[0].size() == 2);
    CHECK(cosine_similarity(result.centroids[0].vector, points[0].vector) ==
          doctest::Approx(1.0).epsilon(1e-10));
}

namespace {

// Planted partition: three tight bundles around mutually orthogonal
// directions, with random per-device scales and global phases.
struct Planted {
    std::vector<Eigen::VectorXcd> channels;
    std::vector<std::set<int>> partition;
};

Planted make_planted(std::mt19937_64& gen, int antennas, int per_bundle, double spread) {
    Eigen::MatrixXcd raw(antennas, 3);
    for (int c = 0; c < 3; ++c)
        raw.col(c) = oracle::random_complex_vector(antennas, gen);
    const Eigen::MatrixXcd q = Eigen::HouseholderQR<Eigen::MatrixXcd>(raw)
                                   .householderQ() *
                               Eigen::MatrixXcd::Identity(antennas, 3);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

    Planted planted;
    planted.partition.resize(3);
    int device = 0;
    for (int bundle = 0; bundle < 3; ++bundle) {
        for (int i = 0; i < per_bundle; ++i) {
            Eigen::VectorXcd h = q.col(bundle) + spread * oracle::random_complex_vector(antennas, gen);
            h *= scale(gen) * std::polar(1.0, phase(gen));
            planted.channels.push_back(h);
            planted.partition[bundle].insert(device++);
        }
    }
    return planted;
}

} // namespace

TEST_CASE("kmeans recovers a planted partition and never decreases the objective") {
    int recovered = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        std::mt19937_64 gen(1000 + trial);
        const Planted planted = make_planted(gen, 8, 4, 0.15);
        const auto points = build_feature_space(channels_from(planted.channels));
        const auto result = spherical_kmeans(points, 3, RngState(trial), 0);

        for (std::size_t i = 1; i < result.objective_trace.size(); ++i)
            REQUIRE(result.objective_trace[i] >= result.objective_trace[i - 1] - 1e-10);

        std::vector<std::set<int>> found;
        for (const auto& g : result.groups)
            found.emplace_back(g.begin(), g.end());
        std::sort(found.begin(), found.end());
        std::vector<std::set<int>> want = planted.partition;
        std::sort(want.begin(), want.end());
        if (found == want)
            ++recovered;
    }
    CHECK(recovered >= 95);
}

TEST_CASE("kmeans partition is valid and centroids unit norm") {
    std::mt19937_64 gen(77);
    std::vector<Eigen::VectorXcd> h;
    for (int k = 0; k < 12; ++k)
        h.push_back(oracle::random_complex_vector(5, gen, 1.5));
    const auto points = build_feature_space(channels_from(h));
    const auto result = spherical_kmeans(points, 4, RngState(9), 2);

    std::set<int> all;
    for (const auto& g : result.groups) {
        CHECK(!g.empty());
        all.insert(g.begin(), g.end());
    }
    CHECK(all.size() == 12);
    for (const auto& c : result.centroids)
        CHECK(std::abs(c.vector.norm() - 1.0) < 1e-12);
}

TEST_CASE("global phase on one channel leaves the partition unchanged") {
    std::mt19937_64 gen(123);
    std::vector<Eigen::VectorXcd> h;
    for (int k = 0; k < 9; ++k)
        h.push_back(oracle::random_complex_vector(6, gen));
    const auto base = spherical_kmeans(build_feature_space(channels_from(h)), 3, RngState(2), 1);

    h[4] *= std::polar(1.0, 2.5);
    const auto rotated = spherical_kmeans(build_feature_space(channels_from(h)), 3, RngState(2), 1);
    CHECK(base.groups == rotated.groups);
}

TEST_CASE("segment geometry") {
    CHECK(segment_geometry(27350, 1) == std::pair<int, int>{27350, 0});
    CHECK(segment_geometry(10, 3) == std::pair<int, int>{4, 2});
    CHECK(segment_geometry(10, 2) == std::pair<int, int>{6, 2});
    CHECK(segment_geometry(27350, 10) == std::pair<int, int>{2736, 10});

    // Coverage and evenness over a sweep.
    for (int d = 1; d <= 64; ++d) {
        for (int s = 1; s <= 8; ++s) {
            const auto [len, pad] = segment_geometry(d, s);
            CHECK(len % 2 == 0);
            CHECK(s * len >= d);
            CHECK(pad == s * len - d);
        }
    }
}

TEST_CASE("segment assignment policies") {
    const std::vector<std::vector<int>> groups = {{0}, {1}, {2}};

    SUBCASE("single group") {
        const auto plan = assign_segments({{0, 1, 2}}, 10, AssignPolicy::kRandom, 0, RngState(1));
        CHECK(plan.group_to_segment == std::vector<int>{0});
    }

    SUBCASE("round robin rotates with the round index") {
        auto p0 = assign_segments(groups, 12, AssignPolicy::kRoundRobin, 0, RngState(1));
        CHECK(p0.group_to_segment == std::vector<int>{0, 1, 2});
        auto p1 = assign_segments(groups, 12, AssignPolicy::kRoundRobin, 1, RngState(1));
        CHECK(p1.group_to_segment == std::vector<int>{1, 2, 0});
    }

    SUBCASE("random policy is uniform over bijections") {
        std::map<std::vector<int>, int> counts;
        const int draws = 10000;
        for (int t = 0; t < draws; ++t) {
            auto plan = assign_segments(groups, 12, AssignPolicy::kRandom, t, RngState(4));
            counts[plan.group_to_segment]++;
        }
        CHECK(counts.size() == 6);
        for (const auto& [perm, count] : counts)
            CHECK(std::abs(count / double(draws) - 1.0 / 6.0) < 0.02);
    }

    SUBCASE("maps are inverse bijections") {
        auto plan = assign_segments(groups, 12, AssignPolicy::kRandom, 3, RngState(8));
        for (int i = 0; i < plan.num_segments; ++i)
            CHECK(plan.segment_to_group[plan.group_to_segment[i]] == i);
    }
}

TEST_CASE("random equal groups") {
    const auto groups = random_equal_groups(10, 3, 0, RngState(6));
    REQUIRE(groups.size() == 3);
    CHECK(groups[0].size() == 4);
    CHECK(groups[1].size() == 3);
    CHECK(groups[2].size() == 3);
    std::set<int> all;
    for (const auto& g : groups)
        all.insert(g.begin(), g.end());
    CHECK(all.size() == 10);
}
