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

#ifndef SEGOTA_GROUPING_HPP
#define SEGOTA_GROUPING_HPP

#include <Eigen/Dense>
#include <vector>

#include "segota/channel.hpp"
#include "segota/rng.hpp"

namespace segota {

/// Unit-norm channel direction with the first entry phase-aligned to zero.
struct FeaturePoint {
    int device = 0;
    Eigen::VectorXcd vector;
};

struct Centroid {
    int cluster = 0;
    Eigen::VectorXcd vector; ///< unit norm
};

/// Per-round device grouping and group<->segment assignment.
///
/// groups[i] lists the device ids of group i (0-based everywhere). Segment
/// indices are 0-based as well; group_to_segment and segment_to_group are
/// inverse bijections on {0..num_segments-1}.
struct SegmentPlan {
    int num_segments = 1;              ///< S_t
    int segment_len = 0;               ///< I_t, always even
    int model_dim = 0;                 ///< D
    int padding_len = 0;               ///< S_t * I_t - D
    std::vector<std::vector<int>> groups;
    std::vector<int> group_to_segment;
    std::vector<int> segment_to_group;

    int group_of_segment(int m) const { return segment_to_group[m]; }
    int segment_of_group(int i) const { return group_to_segment[i]; }
    /// Z_i: number of devices outside group i.
    int out_of_group_count(int i) const;
    int total_devices() const;
    /// Group index of a device id, or -1 if absent.
    int group_of_device(int device) const;

    void validate() const; ///< throws on malformed plans
};

enum class AssignPolicy { kRandom, kRoundRobin };

/// x_k = (h_k / ||h_k||) * exp(-j * arg(h_{1k})). Throws on a zero channel.
std::vector<FeaturePoint> build_feature_space(const ChannelSet& channels);

/// Cosine-style similarity |x^H c| in [0, 1]; 1 iff equal up to a global phase.
double cosine_similarity(const Eigen::VectorXcd& x, const Eigen::VectorXcd& c);

struct KmeansResult {
    std::vector<std::vector<int>> groups; ///< device ids, every group nonempty
    std::vector<Centroid> centroids;      ///< unit norm
    std::vector<double> objective_trace;  ///< total similarity after each iteration
    int iterations = 0;
};

/// Spherical k-means under the |x^H c| similarity. Greedy farthest-point
/// seeding from the kmeans-init substream; ties and empty-cluster repair are
/// deterministic. The returned objective trace is non-decreasing.
KmeansResult spherical_kmeans(const std::vector<FeaturePoint>& points, int num_clusters,
                              const RngState& rng, int round, int max_iter = 100,
                              double tol = 1e-10);

/// Builds the full SegmentPlan for the given groups: segment geometry for
/// model dimension D plus a group->segment bijection drawn per policy.
SegmentPlan assign_segments(const std::vector<std::vector<int>>& groups, int model_dim,
                            AssignPolicy policy, int round, const RngState& rng);

/// I_t = ceil(D / S_t) rounded up to the nearest even integer, plus the
/// implied zero padding S_t * I_t - D.
std::pair<int, int> segment_geometry(int model_dim, int num_segments);

/// Equal-sized random partition (baseline grouping). Remainder devices are
/// distributed one per group from the front.
std::vector<std::vector<int>> random_equal_groups(int num_devices, int num_groups, int round,
                                                  const RngState& rng);

} // namespace segota

#endif
