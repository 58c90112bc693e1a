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

#include "segota/fl_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace segota {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& features, const std::vector<int>& indices) {
    Eigen::MatrixXd out(indices.size(), features.cols());
    for (std::size_t i = 0; i < indices.size(); ++i)
        out.row(i) = features.row(indices[i]);
    return out;
}

// Row-wise softmax cross-entropy pieces shared by both model families.
// Returns the mean negative log-likelihood; fills probs with softmax rows.
double softmax_cross_entropy(const Eigen::MatrixXd& logits, const Eigen::VectorXi& labels,
                             const std::vector<int>& indices, Eigen::MatrixXd* probs) {
    const Eigen::Index n = logits.rows();
    double total = 0.0;
    if (probs)
        probs->resize(n, logits.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
        const double zmax = logits.row(r).maxCoeff();
        const Eigen::ArrayXd shifted = logits.row(r).array() - zmax;
        const Eigen::ArrayXd ex = shifted.exp();
        const double sum = ex.sum();
        total += std::log(sum) - shifted(labels(indices[r]));
        if (probs)
            probs->row(r) = (ex / sum).matrix();
    }
    return total / static_cast<double>(n);
}

class LogisticLearner final : public Learner {
  public:
    explicit LogisticLearner(const LearnerSpec& spec) : spec_(spec) {}

    const LearnerSpec& spec() const override { return spec_; }

    double loss(const Eigen::VectorXd& theta, const Dataset& data,
                const std::vector<int>& indices) const override {
        const Eigen::MatrixXd logits = forward(theta, gather_rows(data.features, indices));
        const double ce = softmax_cross_entropy(logits, data.labels, indices, nullptr);
        return ce + 0.5 * spec_.l2_reg * theta.squaredNorm();
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& theta, const Dataset& data,
                             const std::vector<int>& indices) const override {
        const int C = spec_.num_classes;
        const int b = spec_.input_dim;
        const Eigen::MatrixXd x = gather_rows(data.features, indices);
        const Eigen::MatrixXd logits = forward(theta, x);
        Eigen::MatrixXd probs;
        softmax_cross_entropy(logits, data.labels, indices, &probs);
        for (std::size_t r = 0; r < indices.size(); ++r)
            probs(static_cast<Eigen::Index>(r), data.labels(indices[r])) -= 1.0;
        probs /= static_cast<double>(indices.size());

        Eigen::VectorXd grad(theta.size());
        Eigen::Map<RowMajorMatrix> gw(grad.data(), C, b);
        gw = probs.transpose() * x;
        grad.segment(static_cast<Eigen::Index>(C) * b, C) = probs.colwise().sum();
        grad += spec_.l2_reg * theta;
        return grad;
    }

    Eigen::VectorXi predict(const Eigen::VectorXd& theta,
                            const Eigen::MatrixXd& features) const override {
        const Eigen::MatrixXd logits = forward(theta, features);
        Eigen::VectorXi labels(logits.rows());
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            Eigen::Index cls;
            logits.row(r).maxCoeff(&cls); // first maximum: lowest class wins ties
            labels(r) = static_cast<int>(cls);
        }
        return labels;
    }

  private:
    Eigen::MatrixXd forward(const Eigen::VectorXd& theta, const Eigen::MatrixXd& x) const {
        const int C = spec_.num_classes;
        const int b = spec_.input_dim;
        Eigen::Map<const RowMajorMatrix> w(theta.data(), C, b);
        Eigen::Map<const Eigen::VectorXd> bias(theta.data() + static_cast<Eigen::Index>(C) * b, C);
        return (x * w.transpose()).rowwise() + bias.transpose();
    }

    LearnerSpec spec_;
};

// One tanh hidden layer followed by a softmax readout.
class MlpLearner final : public Learner {
  public:
    explicit MlpLearner(const LearnerSpec& spec) : spec_(spec) {}

    const LearnerSpec& spec() const override { return spec_; }

    double loss(const Eigen::VectorXd& theta, const Dataset& data,
                const std::vector<int>& indices) const override {
        Eigen::MatrixXd hidden;
        const Eigen::MatrixXd logits = forward(theta, gather_rows(data.features, indices), &hidden);
        const double ce = softmax_cross_entropy(logits, data.labels, indices, nullptr);
        return ce + 0.5 * spec_.l2_reg * theta.squaredNorm();
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& theta, const Dataset& data,
                             const std::vector<int>& indices) const override {
        const int C = spec_.num_classes;
        const int b = spec_.input_dim;
        const int H = spec_.hidden_units;
        const Eigen::MatrixXd x = gather_rows(data.features, indices);
        Eigen::MatrixXd hidden;
        const Eigen::MatrixXd logits = forward(theta, x, &hidden);
        Eigen::MatrixXd delta;
        softmax_cross_entropy(logits, data.labels, indices, &delta);
        for (std::size_t r = 0; r < indices.size(); ++r)
            delta(static_cast<Eigen::Index>(r), data.labels(indices[r])) -= 1.0;
        delta /= static_cast<double>(indices.size());

        Eigen::Map<const RowMajorMatrix> w2(theta.data() + w2_offset(), C, H);
        const Eigen::MatrixXd back =
            (delta * w2).cwiseProduct((1.0 - hidden.array().square()).matrix());

        Eigen::VectorXd grad(theta.size());
        Eigen::Map<RowMajorMatrix> g1(grad.data(), H, b);
        g1 = back.transpose() * x;
        grad.segment(static_cast<Eigen::Index>(H) * b, H) = back.colwise().sum();
        Eigen::Map<RowMajorMatrix> g2(grad.data() + w2_offset(), C, H);
        g2 = delta.transpose() * hidden;
        grad.segment(w2_offset() + static_cast<Eigen::Index>(C) * H, C) = delta.colwise().sum();
        grad += spec_.l2_reg * theta;
        return grad;
    }

    Eigen::VectorXi predict(const Eigen::VectorXd& theta,
                            const Eigen::MatrixXd& features) const override {
        Eigen::MatrixXd hidden;
        const Eigen::MatrixXd logits = forward(theta, features, &hidden);
        Eigen::VectorXi labels(logits.rows());
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            Eigen::Index cls;
            logits.row(r).maxCoeff(&cls);
            labels(r) = static_cast<int>(cls);
        }
        return labels;
    }

  private:
    Eigen::Index w2_offset() const {
        return static_cast<Eigen::Index>(spec_.hidden_units) * (spec_.input_dim + 1);
    }

    Eigen::MatrixXd forward(const Eigen::VectorXd& theta, const Eigen::MatrixXd& x,
                            Eigen::MatrixXd* hidden) const {
        const int C = spec_.num_classes;
        const int b = spec_.input_dim;
        const int H = spec_.hidden_units;
        Eigen::Map<const RowMajorMatrix> w1(theta.data(), H, b);
        Eigen::Map<const Eigen::VectorXd> b1(theta.data() + static_cast<Eigen::Index>(H) * b, H);
        Eigen::Map<const RowMajorMatrix> w2(theta.data() + w2_offset(), C, H);
        Eigen::Map<const Eigen::VectorXd> b2(
            theta.data() + w2_offset() + static_cast<Eigen::Index>(C) * H, C);
        *hidden = (((x * w1.transpose()).rowwise() + b1.transpose()).array().tanh()).matrix();
        return (*hidden * w2.transpose()).rowwise() + b2.transpose();
    }

    LearnerSpec spec_;
};

} // namespace

int LearnerSpec::param_count() const {
    if (family == ModelFamily::kLogistic)
        return num_classes * (input_dim + 1);
    return hidden_units * (input_dim + 1) + num_classes * (hidden_units + 1);
}

void LearnerSpec::validate() const {
    if (input_dim < 1 || num_classes < 2)
        throw std::invalid_argument("learner: need input_dim >= 1 and num_classes >= 2");
    if (family == ModelFamily::kMlp && hidden_units < 1)
        throw std::invalid_argument("learner: mlp needs hidden_units >= 1");
    if (l2_reg < 0.0 || !std::isfinite(l2_reg))
        throw std::invalid_argument("learner: l2_reg must be finite and >= 0");
}

std::unique_ptr<Learner> make_learner(const LearnerSpec& spec) {
    spec.validate();
    if (spec.family == ModelFamily::kLogistic)
        return std::make_unique<LogisticLearner>(spec);
    return std::make_unique<MlpLearner>(spec);
}

void LocalTrainConfig::validate() const {
    if (iterations < 1)
        throw std::invalid_argument("training: iterations must be >= 1");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("training: learning_rate must be > 0");
    if (batch_size < 1)
        throw std::invalid_argument("training: batch_size must be >= 1");
}

std::vector<std::vector<int>> partition_dataset(const Dataset& data, int num_devices,
                                                const RngState& rng) {
    const int A = data.size();
    if (num_devices < 1 || num_devices > A)
        throw std::invalid_argument("partition: need 1 <= devices <= samples");
    std::vector<int> perm(A);
    std::iota(perm.begin(), perm.end(), 0);
    auto gen = rng.stream(Stream::kDataPartition);
    std::shuffle(perm.begin(), perm.end(), gen);

    const int base = A / num_devices;
    const int extra = A % num_devices;
    std::vector<std::vector<int>> shards(num_devices);
    int pos = 0;
    for (int k = 0; k < num_devices; ++k) {
        const int size = base + (k < extra ? 1 : 0);
        shards[k].assign(perm.begin() + pos, perm.begin() + pos + size);
        pos += size;
    }
    return shards;
}

Eigen::VectorXd local_sgd(const Eigen::VectorXd& theta0, const Learner& learner,
                          const Dataset& data, const std::vector<int>& shard,
                          const LocalTrainConfig& config, std::mt19937_64& gen) {
    config.validate();
    if (static_cast<int>(shard.size()) < config.batch_size)
        throw std::invalid_argument("local_sgd: shard smaller than batch size");

    Eigen::VectorXd theta = theta0;
    std::vector<int> batch(config.batch_size);
    for (int step = 0; step < config.iterations; ++step) {
        std::sample(shard.begin(), shard.end(), batch.begin(), config.batch_size, gen);
        const Eigen::VectorXd grad = learner.gradient(theta, data, batch);
        if (!grad.allFinite())
            throw std::runtime_error("local_sgd: non-finite gradient at step " +
                                     std::to_string(step));
        theta -= config.learning_rate * grad;
    }
    return theta;
}

double global_loss(const Eigen::VectorXd& theta, const Learner& learner, const Dataset& data,
                   const std::vector<std::vector<int>>& shards) {
    double weighted = 0.0;
    double total = 0.0;
    for (const auto& shard : shards) {
        if (shard.empty())
            continue;
        weighted += static_cast<double>(shard.size()) * learner.loss(theta, data, shard);
        total += static_cast<double>(shard.size());
    }
    if (!(total > 0.0))
        throw std::invalid_argument("global_loss: no samples");
    return weighted / total;
}

double test_accuracy(const Eigen::VectorXd& theta, const Learner& learner, const Dataset& test) {
    if (test.size() == 0)
        throw std::invalid_argument("test_accuracy: empty test set");
    const Eigen::VectorXi pred = learner.predict(theta, test.features);
    int hits = 0;
    for (int i = 0; i < test.size(); ++i)
        if (pred(i) == test.labels(i))
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

std::pair<Dataset, Dataset> make_synthetic_dataset(const SyntheticConfig& config) {
    if (config.feature_dim < 1 || config.num_classes < 2 || config.train_samples < 1 ||
        config.test_samples < 1)
        throw std::invalid_argument("synthetic: bad dimensions");

    std::mt19937_64 gen(config.seed ^ 0x5e60a7a5ULL);
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::MatrixXd means(config.num_classes, config.feature_dim);
    for (int c = 0; c < config.num_classes; ++c) {
        Eigen::VectorXd dir(config.feature_dim);
        for (int j = 0; j < config.feature_dim; ++j)
            dir(j) = normal(gen);
        means.row(c) = config.class_separation * dir.normalized().transpose();
    }

    auto draw = [&](int count) {
        Dataset d;
        d.num_classes = config.num_classes;
        d.features.resize(count, config.feature_dim);
        d.labels.resize(count);
        for (int i = 0; i < count; ++i) {
            const int c = i % config.num_classes;
            d.labels(i) = c;
            for (int j = 0; j < config.feature_dim; ++j)
                d.features(i, j) = means(c, j) + config.feature_noise * normal(gen);
        }
        return d;
    };

    Dataset train = draw(config.train_samples);
    Dataset test = draw(config.test_samples);
    return {std::move(train), std::move(test)};
}

double logistic_smoothness_bound(const Dataset& data, const LearnerSpec& spec) {
    const int b = data.feature_dim();
    Eigen::MatrixXd phi(data.size(), b + 1);
    phi.leftCols(b) = data.features;
    phi.col(b).setOnes();
    const Eigen::MatrixXd gram = (phi.transpose() * phi) / static_cast<double>(data.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    return 0.5 * es.eigenvalues().maxCoeff() + spec.l2_reg;
}

} // namespace segota
