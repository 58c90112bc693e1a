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

#ifndef SEGOTA_EXPERIMENT_HPP
#define SEGOTA_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segota/beamforming.hpp"
#include "segota/bound_diag.hpp"
#include "segota/channel.hpp"
#include "segota/fl_core.hpp"
#include "segota/grouping.hpp"
#include "segota/ota_link.hpp"
#include "segota/rng.hpp"

namespace segota {

/// Aggregation schemes. full_model is accepted in configs as an alias for
/// segota with a single segment; it canonicalizes at parse time.
enum class Scheme { kSegota, kIdeal, kRandomGrouping, kZf };

std::string scheme_name(Scheme scheme);
Scheme scheme_from_string(const std::string& name); ///< resolves the alias

struct DataConfig {
    enum class Source { kSynthetic, kMnist };
    Source source = Source::kSynthetic;
    SyntheticConfig synthetic;
    std::string mnist_train_images, mnist_train_labels;
    std::string mnist_test_images, mnist_test_labels;
};

struct BoundsConfig {
    double grad_divergence = 0.0;   ///< phi
    double minibatch_variance = 0.0;///< mu
    double nu_override = -1.0;      ///< < 0: track empirically
    double lambda_override = -1.0;  ///< < 0: use the learner's l2 coefficient
    double smoothness_override = -1.0; ///< < 0: data-dependent estimate (logistic)
    int delta_reps = 256;           ///< Monte-Carlo reps for the error estimate
};

struct ExperimentConfig {
    Scheme scheme = Scheme::kSegota;
    std::vector<std::uint64_t> seeds = {1};
    long long budget = 27360; ///< channel uses per device for the whole run
    std::vector<int> segment_schedule = {1}; ///< S_t; last entry persists
    AssignPolicy assignment = AssignPolicy::kRandom;
    std::string output;   ///< CSV path; empty = no files written
    bool timings = false; ///< write wall-clock sidecar CSV

    ChannelConfig channel;
    LearnerSpec learner;
    DataConfig data;
    LocalTrainConfig training;
    BcdConfig bcd;
    BoundsConfig bounds;

    int segments_at(int round) const;
    void validate() const;
};

/// Parses the key = value config format. Unknown sections, unknown keys and
/// duplicate keys are hard errors.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig parse_config_file(const std::string& path);

struct RoundMetrics {
    std::uint64_t seed = 0;
    int round = 0;
    Scheme scheme = Scheme::kSegota;
    int num_segments = 1;
    long long cum_channel_uses = 0;
    double objective = 0.0;
    std::vector<double> group_sinr;
    std::vector<std::vector<int>> groups;
    std::vector<int> group_to_segment;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
    RoundBoundReport bounds;
    double wall_ms = 0.0; ///< not part of the deterministic CSV
};

struct SeedRunResult {
    std::uint64_t seed = 0;
    std::vector<RoundMetrics> rounds;
};

struct ExperimentResult {
    std::vector<SeedRunResult> per_seed;
};

/// Immutable per-run context shared by all seeds of one configuration.
struct RunContext {
    ExperimentConfig config;
    Dataset train;
    Dataset test;
    std::unique_ptr<Learner> learner;
    BoundConstants constants; ///< nu tracked separately per seed
    double power_watts = 0.0; ///< per-device cap in linear units

    static RunContext create(const ExperimentConfig& config);
};

/// Mutable per-seed state threaded through the rounds.
struct RoundState {
    std::uint64_t seed = 0;
    RngState rng{0};
    std::vector<std::vector<int>> shards;
    std::vector<double> gains;
    ModelVector global;
    long long cum_uses = 0;
    int round = 0;
    double nu_running = 0.0;

    static RoundState create(const RunContext& context, std::uint64_t seed);
};

/// Executes one communication round, or returns nullopt when the remaining
/// budget cannot afford it (the round is then not executed at all).
std::optional<RoundMetrics> run_round(const RunContext& context, RoundState& state);

/// Runs every seed to budget exhaustion. When config.output is set, writes
/// the per-(seed, round) CSV, an aggregate CSV next to it, and optionally a
/// timing sidecar.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Deterministic CSV writers (shortest round-trip formatting, '.' decimal
/// separator, no locale dependence).
void write_metrics_csv(const ExperimentResult& result, const std::string& path);
void write_aggregate_csv(const ExperimentResult& result, const std::string& path);
void write_timings_csv(const ExperimentResult& result, const std::string& path);

std::string metrics_csv_string(const ExperimentResult& result);
std::string aggregate_csv_string(const ExperimentResult& result);

/// Aggregate path derived from the metrics path ("x.csv" -> "x_agg.csv").
std::string aggregate_path_for(const std::string& metrics_path);

/// Locale-independent shortest-round-trip double formatting used everywhere
/// numbers reach an output file.
std::string format_double(double value);

} // namespace segota

#endif
