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

#ifndef SEGOTA_FL_CORE_HPP
#define SEGOTA_FL_CORE_HPP

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "segota/rng.hpp"

namespace segota {

struct Dataset {
    Eigen::MatrixXd features; ///< one row per sample
    Eigen::VectorXi labels;   ///< values in [0, num_classes)
    int num_classes = 0;

    int size() const { return static_cast<int>(features.rows()); }
    int feature_dim() const { return static_cast<int>(features.cols()); }
};

enum class ModelFamily { kLogistic, kMlp };

struct LearnerSpec {
    ModelFamily family = ModelFamily::kLogistic;
    int input_dim = 20;
    int num_classes = 4;
    int hidden_units = 16; ///< mlp only
    double l2_reg = 0.0;

    /// Exact flat parameter count of the family/dimensions.
    int param_count() const;
    void validate() const;
};

/// Loss, gradient and prediction over a flat parameter vector. Implementations
/// are stateless; the same object may be shared across threads.
class Learner {
  public:
    virtual ~Learner() = default;
    virtual const LearnerSpec& spec() const = 0;
    virtual double loss(const Eigen::VectorXd& theta, const Dataset& data,
                        const std::vector<int>& indices) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd& theta, const Dataset& data,
                                     const std::vector<int>& indices) const = 0;
    virtual Eigen::VectorXi predict(const Eigen::VectorXd& theta,
                                    const Eigen::MatrixXd& features) const = 0;
};

std::unique_ptr<Learner> make_learner(const LearnerSpec& spec);

struct LocalTrainConfig {
    int iterations = 100;      ///< J
    double learning_rate = 0.1;
    int batch_size = 32;
    void validate() const;
};

/// IID-even split: disjoint shards of size floor(A/K) or ceil(A/K) under a
/// seeded permutation. The first (A mod K) shards get the extra sample.
std::vector<std::vector<int>> partition_dataset(const Dataset& data, int num_devices,
                                                const RngState& rng);

/// J steps of mini-batch SGD from the broadcast model. Batches are sampled
/// uniformly without replacement within each step. Throws on non-finite loss
/// or gradient, naming the failing step.
Eigen::VectorXd local_sgd(const Eigen::VectorXd& theta0, const Learner& learner,
                          const Dataset& data, const std::vector<int>& shard,
                          const LocalTrainConfig& config, std::mt19937_64& gen);

/// Shard-size weighted average of the local losses; equals the pooled mean.
double global_loss(const Eigen::VectorXd& theta, const Learner& learner, const Dataset& data,
                   const std::vector<std::vector<int>>& shards);

/// Argmax-class accuracy; ties break toward the lowest class index.
double test_accuracy(const Eigen::VectorXd& theta, const Learner& learner, const Dataset& test);

/// IDX-format loader (big-endian magic 0x00000803 for images, 0x00000801 for
/// labels). Pixels are scaled to [0, 1]; image and label counts must match.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

struct SyntheticConfig {
    int feature_dim = 20;
    int num_classes = 4;
    int train_samples = 2000;
    int test_samples = 500;
    double class_separation = 2.0;
    double feature_noise = 1.0;
    std::uint64_t seed = 12345;
};

/// Gaussian-mixture classification task: class means are random directions at
/// the configured separation, samples are assigned round-robin to classes.
std::pair<Dataset, Dataset> make_synthetic_dataset(const SyntheticConfig& config);

/// Data-dependent smoothness estimate for the multinomial logistic loss:
/// 0.5 * lambda_max(Phi^T Phi / A) + l2, with Phi the bias-augmented features.
double logistic_smoothness_bound(const Dataset& data, const LearnerSpec& spec);

} // namespace segota

#endif
