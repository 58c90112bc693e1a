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

#include "segota/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "segota/units.hpp"

namespace segota {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

std::string join_doubles(const std::vector<double>& values, char sep) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            out.push_back(sep);
        out += format_double(values[i]);
    }
    return out;
}

std::string serialize_groups(const std::vector<std::vector<int>>& groups) {
    std::string out;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (i)
            out.push_back('|');
        for (std::size_t j = 0; j < groups[i].size(); ++j) {
            if (j)
                out.push_back(';');
            out += std::to_string(groups[i][j]);
        }
    }
    return out;
}

std::string serialize_segment_map(const std::vector<int>& map) {
    std::string out;
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (i)
            out.push_back('|');
        out += std::to_string(map[i]);
    }
    return out;
}

// Sorted before accumulation so the aggregate cannot depend on seed order.
std::pair<double, double> mean_std(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values)
        sum += v;
    const double mean = sum / n;
    if (values.size() < 2)
        return {mean, 0.0};
    double sq = 0.0;
    for (double v : values)
        sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / (n - 1.0))};
}

std::string resolve_output_path(const std::string& path) {
    const std::filesystem::path p(path);
    if (p.is_absolute())
        return path;
    if (const char* dir = std::getenv("SEGOTA_OUT_DIR"); dir && *dir)
        return (std::filesystem::path(dir) / p).string();
    return path;
}

void write_text_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    out << content;
    if (!out)
        throw std::runtime_error("write failed for '" + path + "'");
}

} // namespace

RunContext RunContext::create(const ExperimentConfig& config) {
    config.validate();

    RunContext ctx;
    ctx.config = config;

    if (config.data.source == DataConfig::Source::kSynthetic) {
        auto [train, test] = make_synthetic_dataset(config.data.synthetic);
        ctx.train = std::move(train);
        ctx.test = std::move(test);
    } else {
        ctx.train = load_mnist_idx(config.data.mnist_train_images, config.data.mnist_train_labels);
        ctx.test = load_mnist_idx(config.data.mnist_test_images, config.data.mnist_test_labels);
    }
    if (ctx.train.feature_dim() != config.learner.input_dim)
        throw std::invalid_argument("experiment: learner features (" +
                                    std::to_string(config.learner.input_dim) +
                                    ") do not match the dataset (" +
                                    std::to_string(ctx.train.feature_dim()) + ")");
    if (ctx.train.num_classes != config.learner.num_classes)
        throw std::invalid_argument("experiment: learner classes do not match the dataset");
    if (ctx.train.size() / config.channel.num_devices < config.training.batch_size)
        throw std::invalid_argument("experiment: per-device shard smaller than the batch size");

    ctx.learner = make_learner(config.learner);

    ctx.constants.grad_divergence = config.bounds.grad_divergence;
    ctx.constants.minibatch_variance = config.bounds.minibatch_variance;
    ctx.constants.strong_convexity = config.bounds.lambda_override >= 0.0
                                         ? config.bounds.lambda_override
                                         : config.learner.l2_reg;
    if (!(ctx.constants.strong_convexity > 0.0))
        throw std::invalid_argument(
            "experiment: strong convexity is zero; set learner l2 > 0 or bounds lambda");
    if (config.bounds.smoothness_override >= 0.0) {
        ctx.constants.smoothness = config.bounds.smoothness_override;
    } else if (config.learner.family == ModelFamily::kLogistic) {
        ctx.constants.smoothness = logistic_smoothness_bound(ctx.train, config.learner);
    } else {
        throw std::invalid_argument(
            "experiment: set bounds smoothness explicitly for the mlp learner");
    }
    ctx.constants.validate();
    if (!(config.training.learning_rate < 1.0 / ctx.constants.smoothness))
        throw std::invalid_argument(
            "experiment: learning rate " + format_double(config.training.learning_rate) +
            " violates eta < 1/L with L = " + format_double(ctx.constants.smoothness));

    ctx.power_watts = dbm_to_watts(config.channel.max_tx_power_dbm);
    return ctx;
}

RoundState RoundState::create(const RunContext& context, std::uint64_t seed) {
    RoundState state;
    state.seed = seed;
    state.rng = RngState(seed);
    state.shards = partition_dataset(context.train, context.config.channel.num_devices, state.rng);
    state.gains = draw_static_geometry(context.config.channel, state.rng);
    state.global = ModelVector::zeros(context.config.learner.param_count());
    return state;
}

std::optional<RoundMetrics> run_round(const RunContext& context, RoundState& state) {
    const ExperimentConfig& cfg = context.config;
    const int K = cfg.channel.num_devices;
    const int D = cfg.learner.param_count();
    const int t = state.round;
    const int S = cfg.segments_at(t);
    const auto [segment_len, padding] = segment_geometry(D, S);
    const int uses = segment_len / 2;
    (void)padding;

    if (cfg.budget - state.cum_uses < uses)
        return std::nullopt;

    const auto wall_start = std::chrono::steady_clock::now();

    const ChannelSet channels = draw_round_channels(cfg.channel, state.gains, t, state.rng);

    // Downlink broadcast is error-free: every device trains from the global.
    std::vector<ModelVector> locals;
    locals.reserve(K);
    for (int k = 0; k < K; ++k) {
        auto gen = state.rng.stream(Stream::kMinibatch, static_cast<std::uint64_t>(t),
                                    static_cast<std::uint64_t>(k));
        locals.emplace_back(local_sgd(state.global.values(), *context.learner, context.train,
                                      state.shards[k], cfg.training, gen));
    }

    std::vector<std::vector<int>> groups;
    if (cfg.scheme == Scheme::kRandomGrouping) {
        groups = random_equal_groups(K, S, t, state.rng);
    } else {
        const auto points = build_feature_space(channels);
        groups = spherical_kmeans(points, S, state.rng, t).groups;
    }
    const SegmentPlan plan = assign_segments(groups, D, cfg.assignment, t, state.rng);

    const NormalizedChannels f = normalize_channels(channels, plan.segment_len);
    const Eigen::VectorXd caps =
        Eigen::VectorXd::Constant(K, static_cast<double>(plan.segment_len) * context.power_watts);

    const BeamformingSolution solution = (cfg.scheme == Scheme::kZf)
                                             ? solve_zf(plan, f, caps)
                                             : solve_p1t(plan, f, caps, cfg.bcd);

    const bool impaired = cfg.scheme != Scheme::kIdeal;
    const UplinkOutcome outcome =
        impaired ? ota_round(plan, channels, solution, locals, state.global, true, true, state.rng)
                 : ideal_round(plan, channels, solution, locals, state.global);
    state.global = outcome.next_global;

    RoundMetrics metrics;
    metrics.seed = state.seed;
    metrics.round = t;
    metrics.scheme = cfg.scheme;
    metrics.num_segments = S;
    metrics.cum_channel_uses = state.cum_uses + uses;
    metrics.objective = solution.objective;
    metrics.group_sinr.assign(solution.group_sinr.data(),
                              solution.group_sinr.data() + solution.group_sinr.size());
    metrics.groups = plan.groups;
    metrics.group_to_segment = plan.group_to_segment;
    metrics.train_loss =
        global_loss(state.global.values(), *context.learner, context.train, state.shards);
    metrics.test_accuracy = test_accuracy(state.global.values(), *context.learner, context.test);

    const double nu_round = max_segment_norm_sq(plan, locals);
    state.nu_running = std::max(state.nu_running, nu_round);
    const double nu = cfg.bounds.nu_override > 0.0 ? cfg.bounds.nu_override : state.nu_running;

    const ContractionTerms terms = eval_contraction(context.constants, cfg.training.learning_rate,
                                                    cfg.training.iterations, S, K);
    metrics.bounds.contraction = terms.contraction;
    metrics.bounds.drift = terms.drift;
    metrics.bounds.penalty = eval_Ht(plan, channels, solution, nu);
    metrics.bounds.delta_bound = delta_norm_bound(plan, channels, solution, nu);
    const DeltaEstimate est = estimate_delta_norm(plan, channels, solution, locals,
                                                  cfg.bounds.delta_reps, state.rng, impaired,
                                                  impaired);
    metrics.bounds.delta_estimate = est.mean;
    metrics.bounds.delta_within_bound =
        est.mean <= metrics.bounds.delta_bound + 3.0 * est.std_error;

    state.cum_uses += uses;
    state.round += 1;

    metrics.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - wall_start)
                          .count();
    return metrics;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    const RunContext context = RunContext::create(config);

    ExperimentResult result;
    for (std::uint64_t seed : config.seeds) {
        SeedRunResult seed_result;
        seed_result.seed = seed;
        RoundState state = RoundState::create(context, seed);
        while (auto metrics = run_round(context, state))
            seed_result.rounds.push_back(std::move(*metrics));
        result.per_seed.push_back(std::move(seed_result));
    }

    if (!config.output.empty()) {
        const std::string path = resolve_output_path(config.output);
        write_metrics_csv(result, path);
        write_aggregate_csv(result, aggregate_path_for(path));
        if (config.timings)
            write_timings_csv(result, path + ".timings.csv");
    }
    return result;
}

std::string metrics_csv_string(const ExperimentResult& result) {
    std::string out = "seed,round,scheme,segments,cum_channel_uses,objective,sinr_groups,"
                      "groups,segment_map,train_loss,test_accuracy,g_t,c_t,h_t,delta_bound,"
                      "delta_estimate,bound_ok\n";
    for (const SeedRunResult& seed : result.per_seed) {
        for (const RoundMetrics& m : seed.rounds) {
            out += std::to_string(m.seed);
            out += ',';
            out += std::to_string(m.round);
            out += ',';
            out += scheme_name(m.scheme);
            out += ',';
            out += std::to_string(m.num_segments);
            out += ',';
            out += std::to_string(m.cum_channel_uses);
            out += ',';
            out += format_double(m.objective);
            out += ',';
            out += join_doubles(m.group_sinr, ';');
            out += ',';
            out += serialize_groups(m.groups);
            out += ',';
            out += serialize_segment_map(m.group_to_segment);
            out += ',';
            out += format_double(m.train_loss);
            out += ',';
            out += format_double(m.test_accuracy);
            out += ',';
            out += format_double(m.bounds.contraction);
            out += ',';
            out += format_double(m.bounds.drift);
            out += ',';
            out += format_double(m.bounds.penalty);
            out += ',';
            out += format_double(m.bounds.delta_bound);
            out += ',';
            out += format_double(m.bounds.delta_estimate);
            out += ',';
            out += m.bounds.delta_within_bound ? '1' : '0';
            out += '\n';
        }
    }
    return out;
}

std::string aggregate_csv_string(const ExperimentResult& result) {
    std::string out = "round,scheme,segments,cum_channel_uses,n_seeds,"
                      "objective_mean,objective_std,train_loss_mean,train_loss_std,"
                      "test_accuracy_mean,test_accuracy_std,g_t,c_t,h_t_mean,h_t_std,"
                      "delta_bound_mean,delta_bound_std,delta_estimate_mean,delta_estimate_std\n";
    if (result.per_seed.empty())
        return out;

    const std::size_t rounds = result.per_seed.front().rounds.size();
    for (const SeedRunResult& seed : result.per_seed)
        if (seed.rounds.size() != rounds)
            throw std::logic_error("aggregate: seeds produced different round counts");

    for (std::size_t r = 0; r < rounds; ++r) {
        const RoundMetrics& first = result.per_seed.front().rounds[r];
        auto collect = [&](auto getter) {
            std::vector<double> values;
            values.reserve(result.per_seed.size());
            for (const SeedRunResult& seed : result.per_seed)
                values.push_back(getter(seed.rounds[r]));
            return mean_std(std::move(values));
        };
        const auto objective = collect([](const RoundMetrics& m) { return m.objective; });
        const auto loss = collect([](const RoundMetrics& m) { return m.train_loss; });
        const auto acc = collect([](const RoundMetrics& m) { return m.test_accuracy; });
        const auto penalty = collect([](const RoundMetrics& m) { return m.bounds.penalty; });
        const auto dbound = collect([](const RoundMetrics& m) { return m.bounds.delta_bound; });
        const auto dest = collect([](const RoundMetrics& m) { return m.bounds.delta_estimate; });

        out += std::to_string(first.round);
        out += ',';
        out += scheme_name(first.scheme);
        out += ',';
        out += std::to_string(first.num_segments);
        out += ',';
        out += std::to_string(first.cum_channel_uses);
        out += ',';
        out += std::to_string(result.per_seed.size());
        out += ',';
        out += format_double(objective.first);
        out += ',';
        out += format_double(objective.second);
        out += ',';
        out += format_double(loss.first);
        out += ',';
        out += format_double(loss.second);
        out += ',';
        out += format_double(acc.first);
        out += ',';
        out += format_double(acc.second);
        out += ',';
        out += format_double(first.bounds.contraction);
        out += ',';
        out += format_double(first.bounds.drift);
        out += ',';
        out += format_double(penalty.first);
        out += ',';
        out += format_double(penalty.second);
        out += ',';
        out += format_double(dbound.first);
        out += ',';
        out += format_double(dbound.second);
        out += ',';
        out += format_double(dest.first);
        out += ',';
        out += format_double(dest.second);
        out += '\n';
    }
    return out;
}

void write_metrics_csv(const ExperimentResult& result, const std::string& path) {
    write_text_file(path, metrics_csv_string(result));
}

void write_aggregate_csv(const ExperimentResult& result, const std::string& path) {
    write_text_file(path, aggregate_csv_string(result));
}

void write_timings_csv(const ExperimentResult& result, const std::string& path) {
    std::string out = "seed,round,wall_ms\n";
    for (const SeedRunResult& seed : result.per_seed)
        for (const RoundMetrics& m : seed.rounds)
            out += std::to_string(m.seed) + ',' + std::to_string(m.round) + ',' +
                   format_double(m.wall_ms) + '\n';
    write_text_file(path, out);
}

std::string aggregate_path_for(const std::string& metrics_path) {
    std::filesystem::path p(metrics_path);
    const std::string ext = p.extension().string();
    p.replace_extension();
    return p.string() + "_agg" + ext;
}

} // namespace segota
