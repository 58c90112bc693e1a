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

#include "segota/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace segota {

int SegmentPlan::out_of_group_count(int i) const {
    return total_devices() - static_cast<int>(groups[i].size());
}

int SegmentPlan::total_devices() const {
    int n = 0;
    for (const auto& g : groups)
        n += static_cast<int>(g.size());
    return n;
}

int SegmentPlan::group_of_device(int device) const {
    for (std::size_t i = 0; i < groups.size(); ++i)
        for (int d : groups[i])
            if (d == device)
                return static_cast<int>(i);
    return -1;
}

void SegmentPlan::validate() const {
    if (num_segments < 1 || static_cast<int>(groups.size()) != num_segments)
        throw std::invalid_argument("plan: group count must equal num_segments");
    if (segment_len < 2 || segment_len % 2 != 0)
        throw std::invalid_argument("plan: segment_len must be positive and even");
    if (static_cast<std::int64_t>(num_segments) * segment_len < model_dim)
        throw std::invalid_argument("plan: segments do not cover the model");
    std::vector<int> seen;
    for (const auto& g : groups) {
        if (g.empty())
            throw std::invalid_argument("plan: empty device group");
        seen.insert(seen.end(), g.begin(), g.end());
    }
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i + 1 < seen.size(); ++i)
        if (seen[i] == seen[i + 1])
            throw std::invalid_argument("plan: device appears in two groups");
    if (static_cast<int>(group_to_segment.size()) != num_segments ||
        static_cast<int>(segment_to_group.size()) != num_segments)
        throw std::invalid_argument("plan: malformed segment maps");
    for (int i = 0; i < num_segments; ++i) {
        int m = group_to_segment[i];
        if (m < 0 || m >= num_segments || segment_to_group[m] != i)
            throw std::invalid_argument("plan: group/segment maps are not inverse bijections");
    }
}

std::vector<FeaturePoint> build_feature_space(const ChannelSet& channels) {
    std::vector<FeaturePoint> points;
    points.reserve(channels.channels.size());
    for (std::size_t k = 0; k < channels.channels.size(); ++k) {
        const Eigen::VectorXcd& h = channels.channels[k];
        const double norm = h.norm();
        if (!(norm > 0.0))
            throw std::runtime_error("grouping: zero channel vector for device " +
                                     std::to_string(k));
        const double phase = std::arg(h(0));
        const std::complex<double> rot = std::polar(1.0, -phase);
        FeaturePoint p;
        p.device = static_cast<int>(k);
        p.vector = (h / norm) * rot;
        points.push_back(std::move(p));
    }
    return points;
}

double cosine_similarity(const Eigen::VectorXcd& x, const Eigen::VectorXcd& c) {
    return std::abs(x.dot(c)); // Eigen's dot conjugates the left operand
}

namespace {

// Greedy farthest-point seeding under 1 - similarity; first pick is uniform.
std::vector<Eigen::VectorXcd> seed_centroids(const std::vector<FeaturePoint>& points,
                                             int num_clusters, std::mt19937_64& gen) {
    const int n = static_cast<int>(points.size());
    std::vector<Eigen::VectorXcd> centroids;
    centroids.reserve(num_clusters);

    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<char> chosen(n, 0);
    int first = pick(gen);
    centroids.push_back(points[first].vector);
    chosen[first] = 1;

    std::vector<double> min_dissim(n, 0.0);
    for (int i = 0; i < n; ++i)
        min_dissim[i] = 1.0 - cosine_similarity(points[i].vector, centroids[0]);

    while (static_cast<int>(centroids.size()) < num_clusters) {
        int best = -1;
        double best_d = -1.0;
        for (int i = 0; i < n; ++i) {
            if (chosen[i])
                continue;
            if (min_dissim[i] > best_d) {
                best_d = min_dissim[i];
                best = i;
            }
        }
        centroids.push_back(points[best].vector);
        chosen[best] = 1;
        for (int i = 0; i < n; ++i)
            min_dissim[i] = std::min(min_dissim[i],
                                     1.0 - cosine_similarity(points[i].vector, centroids.back()));
    }
    return centroids;
}

// Point -> argmax-similarity cluster; ties toward the lowest cluster index.
std::vector<int> assign_points(const std::vector<FeaturePoint>& points,
                               const std::vector<Eigen::VectorXcd>& centroids) {
    std::vector<int> assignment(points.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = -1.0;
        int best_r = 0;
        for (std::size_t r = 0; r < centroids.size(); ++r) {
            const double s = cosine_similarity(points[i].vector, centroids[r]);
            if (s > best) {
                best = s;
                best_r = static_cast<int>(r);
            }
        }
        assignment[i] = best_r;
    }
    return assignment;
}

// Moves the globally worst-fitting point (from a cluster with >= 2 members)
// into each empty cluster and makes it that cluster's centroid.
void repair_empty_clusters(const std::vector<FeaturePoint>& points, std::vector<int>& assignment,
                           std::vector<Eigen::VectorXcd>& centroids) {
    const int R = static_cast<int>(centroids.size());
    for (;;) {
        std::vector<int> sizes(R, 0);
        for (int a : assignment)
            ++sizes[a];
        int empty = -1;
        for (int r = 0; r < R; ++r)
            if (sizes[r] == 0) {
                empty = r;
                break;
            }
        if (empty < 0)
            return;

        int worst = -1;
        double worst_sim = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (sizes[assignment[i]] < 2)
                continue;
            const double s = cosine_similarity(points[i].vector, centroids[assignment[i]]);
            if (s < worst_sim) {
                worst_sim = s;
                worst = static_cast<int>(i);
            }
        }
        if (worst < 0)
            throw std::runtime_error("grouping: cannot repair empty cluster");
        assignment[worst] = empty;
        centroids[empty] = points[worst].vector.normalized();
    }
}

double total_similarity(const std::vector<FeaturePoint>& points,
                        const std::vector<int>& assignment,
                        const std::vector<Eigen::VectorXcd>& centroids) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        total += cosine_similarity(points[i].vector, centroids[assignment[i]]);
    return total;
}

} // namespace

KmeansResult spherical_kmeans(const std::vector<FeaturePoint>& points, int num_clusters,
                              const RngState& rng, int round, int max_iter, double tol) {
    const int n = static_cast<int>(points.size());
    if (num_clusters < 1 || num_clusters > n)
        throw std::invalid_argument("kmeans: need 1 <= clusters <= points");
    for (const auto& p : points)
        if (std::abs(p.vector.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("kmeans: points must be unit norm");

    auto gen = rng.stream(Stream::kKmeansInit, static_cast<std::uint64_t>(round));
    std::vector<Eigen::VectorXcd> centroids = seed_centroids(points, num_clusters, gen);

    std::vector<int> assignment = assign_points(points, centroids);
    repair_empty_clusters(points, assignment, centroids);
    double objective = total_similarity(points, assignment, centroids);

    KmeansResult result;
    result.objective_trace.push_back(objective);

    int iter = 0;
    for (; iter < max_iter; ++iter) {
        // Mean-and-renormalize centroid update. A cluster keeps its previous
        // centroid if the mean update would lower its similarity sum: under
        // the modulus similarity the plain mean is not guaranteed to improve,
        // and the objective must never decrease.
        std::vector<Eigen::VectorXcd> updated = centroids;
        for (int r = 0; r < num_clusters; ++r) {
            Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(points[0].vector.size());
            int count = 0;
            for (int i = 0; i < n; ++i)
                if (assignment[i] == r) {
                    sum += points[i].vector;
                    ++count;
                }
            const double norm = sum.norm();
            if (count == 0 || !(norm > 0.0))
                continue;
            Eigen::VectorXcd candidate = sum / norm;
            double old_sum = 0.0, new_sum = 0.0;
            for (int i = 0; i < n; ++i)
                if (assignment[i] == r) {
                    old_sum += cosine_similarity(points[i].vector, centroids[r]);
                    new_sum += cosine_similarity(points[i].vector, candidate);
                }
            if (new_sum >= old_sum)
                updated[r] = std::move(candidate);
        }
        centroids = std::move(updated);

        assignment = assign_points(points, centroids);
        repair_empty_clusters(points, assignment, centroids);

        const double next = total_similarity(points, assignment, centroids);
        result.objective_trace.push_back(next);
        const bool converged = next - objective < tol;
        objective = next;
        if (converged) {
            ++iter;
            break;
        }
    }
    result.iterations = iter;

    result.groups.assign(num_clusters, {});
    for (int i = 0; i < n; ++i)
        result.groups[assignment[i]].push_back(points[i].device);
    for (auto& g : result.groups)
        std::sort(g.begin(), g.end());
    result.centroids.resize(num_clusters);
    for (int r = 0; r < num_clusters; ++r)
        result.centroids[r] = Centroid{r, centroids[r].normalized()};
    return result;
}

std::pair<int, int> segment_geometry(int model_dim, int num_segments) {
    if (model_dim < 1 || num_segments < 1)
        throw std::invalid_argument("segment_geometry: need D >= 1 and S >= 1");
    int len = (model_dim + num_segments - 1) / num_segments;
    if (len % 2 != 0)
        ++len;
    const int padding = num_segments * len - model_dim;
    return {len, padding};
}

SegmentPlan assign_segments(const std::vector<std::vector<int>>& groups, int model_dim,
                            AssignPolicy policy, int round, const RngState& rng) {
    const int S = static_cast<int>(groups.size());
    if (S < 1)
        throw std::invalid_argument("assign_segments: no groups");

    SegmentPlan plan;
    plan.num_segments = S;
    plan.model_dim = model_dim;
    std::tie(plan.segment_len, plan.padding_len) = segment_geometry(model_dim, S);
    plan.groups = groups;

    plan.group_to_segment.resize(S);
    if (policy == AssignPolicy::kRoundRobin) {
        for (int i = 0; i < S; ++i)
            plan.group_to_segment[i] = (i + round) % S;
    } else {
        std::iota(plan.group_to_segment.begin(), plan.group_to_segment.end(), 0);
        auto gen = rng.stream(Stream::kSegmentAssignment, static_cast<std::uint64_t>(round));
        std::shuffle(plan.group_to_segment.begin(), plan.group_to_segment.end(), gen);
    }
    plan.segment_to_group.assign(S, -1);
    for (int i = 0; i < S; ++i)
        plan.segment_to_group[plan.group_to_segment[i]] = i;

    plan.validate();
    return plan;
}

std::vector<std::vector<int>> random_equal_groups(int num_devices, int num_groups, int round,
                                                  const RngState& rng) {
    if (num_groups < 1 || num_groups > num_devices)
        throw std::invalid_argument("random_equal_groups: need 1 <= groups <= devices");
    std::vector<int> perm(num_devices);
    std::iota(perm.begin(), perm.end(), 0);
    auto gen = rng.stream(Stream::kKmeansInit, static_cast<std::uint64_t>(round));
    std::shuffle(perm.begin(), perm.end(), gen);

    const int base = num_devices / num_groups;
    const int extra = num_devices % num_groups;
    std::vector<std::vector<int>> groups(num_groups);
    int pos = 0;
    for (int i = 0; i < num_groups; ++i) {
        const int size = base + (i < extra ? 1 : 0);
        groups[i].assign(perm.begin() + pos, perm.begin() + pos + size);
        std::sort(groups[i].begin(), groups[i].end());
        pos += size;
    }
    return groups;
}

} // namespace segota
