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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "segota/experiment.hpp"

namespace segota {

std::string scheme_name(Scheme scheme) {
    switch (scheme) {
    case Scheme::kSegota:
        return "segota";
    case Scheme::kIdeal:
        return "ideal";
    case Scheme::kRandomGrouping:
        return "random_grouping";
    case Scheme::kZf:
        return "zf";
    }
    return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
    if (name == "segota" || name == "full_model")
        return Scheme::kSegota;
    if (name == "ideal")
        return Scheme::kIdeal;
    if (name == "random_grouping")
        return Scheme::kRandomGrouping;
    if (name == "zf")
        return Scheme::kZf;
    throw std::invalid_argument("unknown scheme '" + name +
                                "' (expected segota, ideal, random_grouping, zf or full_model)");
}

int ExperimentConfig::segments_at(int round) const {
    const int idx = std::min<int>(round, static_cast<int>(segment_schedule.size()) - 1);
    return segment_schedule[idx];
}

void ExperimentConfig::validate() const {
    if (budget <= 0)
        throw std::invalid_argument("experiment: budget must be > 0");
    if (seeds.empty())
        throw std::invalid_argument("experiment: at least one seed required");
    if (segment_schedule.empty())
        throw std::invalid_argument("experiment: empty segment schedule");
    for (int s : segment_schedule) {
        if (s < 1 || s > channel.num_devices)
            throw std::invalid_argument("experiment: segments must be in [1, devices]");
    }
    channel.validate();
    learner.validate();
    training.validate();
    if (!(bcd.rel_tolerance > 0.0) || bcd.max_outer_iters < 1 || bcd.eigen_regularization < 0.0)
        throw std::invalid_argument("experiment: bad bcd settings");
    if (bounds.delta_reps < 1)
        throw std::invalid_argument("experiment: bounds delta_reps must be >= 1");
    if (data.source == DataConfig::Source::kMnist) {
        if (data.mnist_train_images.empty() || data.mnist_train_labels.empty() ||
            data.mnist_test_images.empty() || data.mnist_test_labels.empty())
            throw std::invalid_argument("experiment: mnist source requires all four idx paths");
    } else {
        if (data.synthetic.train_samples < channel.num_devices)
            throw std::invalid_argument("experiment: fewer training samples than devices");
    }
}

namespace {

struct ParsedLine {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& message) {
    throw std::invalid_argument(origin + ":" + std::to_string(line) + ": " + message);
}

double to_double(const ParsedLine& l, const std::string& origin) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(l.value, &pos);
    } catch (const std::exception&) {
        fail(origin, l.line, "expected a number for '" + l.key + "', got '" + l.value + "'");
    }
    if (pos != l.value.size())
        fail(origin, l.line, "trailing characters in number '" + l.value + "'");
    return v;
}

long long to_int(const ParsedLine& l, const std::string& origin) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(l.value, &pos);
    } catch (const std::exception&) {
        fail(origin, l.line, "expected an integer for '" + l.key + "', got '" + l.value + "'");
    }
    if (pos != l.value.size())
        fail(origin, l.line, "trailing characters in integer '" + l.value + "'");
    return v;
}

bool to_bool(const ParsedLine& l, const std::string& origin) {
    if (l.value == "true" || l.value == "1")
        return true;
    if (l.value == "false" || l.value == "0")
        return false;
    fail(origin, l.line, "expected true/false for '" + l.key + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> parts;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
        parts.push_back(trim(item));
    return parts;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    std::vector<ParsedLine> lines;
    {
        std::stringstream ss(text);
        std::string raw;
        std::string section;
        int line_no = 0;
        std::map<std::pair<std::string, std::string>, int> seen;
        while (std::getline(ss, raw)) {
            ++line_no;
            std::string line = trim(raw);
            if (line.empty() || line[0] == '#' || line[0] == ';')
                continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    fail(origin, line_no, "malformed section header '" + line + "'");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                fail(origin, line_no, "expected 'key = value', got '" + line + "'");
            ParsedLine p;
            p.section = section;
            p.key = trim(line.substr(0, eq));
            p.value = trim(line.substr(eq + 1));
            p.line = line_no;
            if (p.section.empty())
                fail(origin, line_no, "key '" + p.key + "' appears before any [section]");
            if (p.key.empty())
                fail(origin, line_no, "empty key");
            auto [it, inserted] = seen.emplace(std::make_pair(p.section, p.key), line_no);
            if (!inserted)
                fail(origin, line_no,
                     "duplicate key '" + p.key + "' (first set on line " +
                         std::to_string(it->second) + ")");
            lines.push_back(std::move(p));
        }
    }

    ExperimentConfig cfg;
    bool scheme_is_full_model = false;
    bool segments_explicit = false;

    for (const ParsedLine& l : lines) {
        if (l.section == "experiment") {
            if (l.key == "scheme") {
                cfg.scheme = scheme_from_string(l.value);
                scheme_is_full_model = (l.value == "full_model");
            } else if (l.key == "seeds") {
                cfg.seeds.clear();
                for (const std::string& part : split_list(l.value)) {
                    ParsedLine p = l;
                    p.value = part;
                    cfg.seeds.push_back(static_cast<std::uint64_t>(to_int(p, origin)));
                }
                if (cfg.seeds.empty())
                    fail(origin, l.line, "empty seeds list");
            } else if (l.key == "budget") {
                cfg.budget = to_int(l, origin);
            } else if (l.key == "segments") {
                segments_explicit = true;
                cfg.segment_schedule.clear();
                for (const std::string& part : split_list(l.value)) {
                    ParsedLine p = l;
                    p.value = part;
                    cfg.segment_schedule.push_back(static_cast<int>(to_int(p, origin)));
                }
                if (cfg.segment_schedule.empty())
                    fail(origin, l.line, "empty segments list");
            } else if (l.key == "assignment") {
                if (l.value == "random")
                    cfg.assignment = AssignPolicy::kRandom;
                else if (l.value == "round_robin")
                    cfg.assignment = AssignPolicy::kRoundRobin;
                else
                    fail(origin, l.line, "assignment must be random or round_robin");
            } else if (l.key == "output") {
                cfg.output = l.value;
            } else if (l.key == "timings") {
                cfg.timings = to_bool(l, origin);
            } else {
                fail(origin, l.line, "unknown key '" + l.key + "' in [experiment]");
            }
        } else if (l.section == "channel") {
            if (l.key == "antennas")
                cfg.channel.num_antennas = static_cast<int>(to_int(l, origin));
            else if (l.key == "devices")
                cfg.channel.num_devices = static_cast<int>(to_int(l, origin));
            else if (l.key == "noise_dbm")
                cfg.channel.noise_power_dbm = to_double(l, origin);
            else if (l.key == "max_power_dbm")
                cfg.channel.max_tx_power_dbm = to_double(l, origin);
            else if (l.key == "pathloss_intercept_db")
                cfg.channel.pathloss_intercept_db = to_double(l, origin);
            else if (l.key == "pathloss_exponent")
                cfg.channel.pathloss_exponent_coeff = to_double(l, origin);
            else if (l.key == "distance_min_km")
                cfg.channel.distance_min_km = to_double(l, origin);
            else if (l.key == "distance_max_km")
                cfg.channel.distance_max_km = to_double(l, origin);
            else if (l.key == "shadowing_std_db")
                cfg.channel.shadowing_std_db = to_double(l, origin);
            else
                fail(origin, l.line, "unknown key '" + l.key + "' in [channel]");
        } else if (l.section == "learner") {
            if (l.key == "model") {
                if (l.value == "logistic")
                    cfg.learner.family = ModelFamily::kLogistic;
                else if (l.value == "mlp")
                    cfg.learner.family = ModelFamily::kMlp;
                else
                    fail(origin, l.line, "model must be logistic or mlp");
            } else if (l.key == "features") {
                cfg.learner.input_dim = static_cast<int>(to_int(l, origin));
            } else if (l.key == "classes") {
                cfg.learner.num_classes = static_cast<int>(to_int(l, origin));
            } else if (l.key == "hidden") {
                cfg.learner.hidden_units = static_cast<int>(to_int(l, origin));
            } else if (l.key == "l2") {
                cfg.learner.l2_reg = to_double(l, origin);
            } else {
                fail(origin, l.line, "unknown key '" + l.key + "' in [learner]");
            }
        } else if (l.section == "data") {
            if (l.key == "source") {
                if (l.value == "synthetic")
                    cfg.data.source = DataConfig::Source::kSynthetic;
                else if (l.value == "mnist")
                    cfg.data.source = DataConfig::Source::kMnist;
                else
                    fail(origin, l.line, "source must be synthetic or mnist");
            } else if (l.key == "train_samples") {
                cfg.data.synthetic.train_samples = static_cast<int>(to_int(l, origin));
            } else if (l.key == "test_samples") {
                cfg.data.synthetic.test_samples = static_cast<int>(to_int(l, origin));
            } else if (l.key == "class_separation") {
                cfg.data.synthetic.class_separation = to_double(l, origin);
            } else if (l.key == "feature_noise") {
                cfg.data.synthetic.feature_noise = to_double(l, origin);
            } else if (l.key == "data_seed") {
                cfg.data.synthetic.seed = static_cast<std::uint64_t>(to_int(l, origin));
            } else if (l.key == "mnist_train_images") {
                cfg.data.mnist_train_images = l.value;
            } else if (l.key == "mnist_train_labels") {
                cfg.data.mnist_train_labels = l.value;
            } else if (l.key == "mnist_test_images") {
                cfg.data.mnist_test_images = l.value;
            } else if (l.key == "mnist_test_labels") {
                cfg.data.mnist_test_labels = l.value;
            } else {
                fail(origin, l.line, "unknown key '" + l.key + "' in [data]");
            }
        } else if (l.section == "training") {
            if (l.key == "iterations")
                cfg.training.iterations = static_cast<int>(to_int(l, origin));
            else if (l.key == "learning_rate")
                cfg.training.learning_rate = to_double(l, origin);
            else if (l.key == "batch_size")
                cfg.training.batch_size = static_cast<int>(to_int(l, origin));
            else
                fail(origin, l.line, "unknown key '" + l.key + "' in [training]");
        } else if (l.section == "bcd") {
            if (l.key == "max_iterations")
                cfg.bcd.max_outer_iters = static_cast<int>(to_int(l, origin));
            else if (l.key == "tolerance")
                cfg.bcd.rel_tolerance = to_double(l, origin);
            else if (l.key == "regularization")
                cfg.bcd.eigen_regularization = to_double(l, origin);
            else
                fail(origin, l.line, "unknown key '" + l.key + "' in [bcd]");
        } else if (l.section == "bounds") {
            if (l.key == "phi")
                cfg.bounds.grad_divergence = to_double(l, origin);
            else if (l.key == "mu")
                cfg.bounds.minibatch_variance = to_double(l, origin);
            else if (l.key == "nu")
                cfg.bounds.nu_override = (l.value == "empirical") ? -1.0 : to_double(l, origin);
            else if (l.key == "lambda")
                cfg.bounds.lambda_override = (l.value == "auto") ? -1.0 : to_double(l, origin);
            else if (l.key == "smoothness")
                cfg.bounds.smoothness_override =
                    (l.value == "auto") ? -1.0 : to_double(l, origin);
            else if (l.key == "delta_reps")
                cfg.bounds.delta_reps = static_cast<int>(to_int(l, origin));
            else
                fail(origin, l.line, "unknown key '" + l.key + "' in [bounds]");
        } else {
            fail(origin, l.line, "unknown section [" + l.section + "]");
        }
    }

    if (scheme_is_full_model) {
        if (segments_explicit &&
            (cfg.segment_schedule.size() != 1 || cfg.segment_schedule[0] != 1))
            throw std::invalid_argument(origin + ": full_model requires segments = 1");
        cfg.segment_schedule = {1};
    }

    // Synthetic dimensions follow the learner spec (single source of truth).
    cfg.data.synthetic.feature_dim = cfg.learner.input_dim;
    cfg.data.synthetic.num_classes = cfg.learner.num_classes;

    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

} // namespace segota
