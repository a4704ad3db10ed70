// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>
#include <stdexcept>
#include <variant>

#include <fmt/format.h>

#include "hypernas/metrics.hpp"
#include "hypernas/rng.hpp"

namespace hypernas {

namespace {

using Field = std::variant<std::size_t RunConfig::*, double RunConfig::*,
                           std::string RunConfig::*>;

const std::map<std::string, Field, std::less<>>& fields() {
    static const std::map<std::string, Field, std::less<>> table = {
        {"seed", &RunConfig::seed},
        {"out_dir", &RunConfig::out_dir},
        {"num_classes", &RunConfig::num_classes},
        {"image_size", &RunConfig::image_size},
        {"train_samples", &RunConfig::train_samples},
        {"val_samples", &RunConfig::val_samples},
        {"test_samples", &RunConfig::test_samples},
        {"noise_sigma", &RunConfig::noise_sigma},
        {"num_cells", &RunConfig::num_cells},
        {"num_nodes", &RunConfig::num_nodes},
        {"channels", &RunConfig::channels},
        {"stem_multiplier", &RunConfig::stem_multiplier},
        {"k", &RunConfig::k},
        {"lookback", &RunConfig::lookback},
        {"t", &RunConfig::t},
        {"derive_epochs", &RunConfig::derive_epochs},
        {"derive_batch_size", &RunConfig::derive_batch_size},
        {"i_train", &RunConfig::i_train},
        {"cross_start", &RunConfig::cross_start},
        {"cross_end", &RunConfig::cross_end},
        {"i_total", &RunConfig::i_total},
        {"batch_size", &RunConfig::batch_size},
        {"sgd_lr", &RunConfig::sgd_lr},
        {"sgd_momentum", &RunConfig::sgd_momentum},
        {"sgd_weight_decay", &RunConfig::sgd_weight_decay},
        {"adam_lr", &RunConfig::adam_lr},
        {"adam_beta1", &RunConfig::adam_beta1},
        {"adam_beta2", &RunConfig::adam_beta2},
        {"adam_weight_decay", &RunConfig::adam_weight_decay},
        {"cross_lr_scale", &RunConfig::cross_lr_scale},
    };
    return table;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T v{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty()) {
        throw std::invalid_argument(fmt::format("config: key '{}' has invalid value '{}'", key, value));
    }
    return v;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw std::invalid_argument(fmt::format("config: unknown key '{}'", key));
    value = trim(value);
    std::visit(
        [&](auto member) {
            using T = std::remove_reference_t<decltype(this->*member)>;
            if constexpr (std::is_same_v<T, std::string>) {
                this->*member = std::string(value);
            } else {
                this->*member = parse_number<T>(key, value);
            }
        },
        it->second);
}

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : fields()) out.push_back(k);
    return out;
}

std::string RunConfig::get(std::string_view key) const {
    const auto it = fields().find(key);
    if (it == fields().end()) throw std::invalid_argument(fmt::format("config: unknown key '{}'", key));
    return std::visit([&](auto member) { return fmt::format("{}", this->*member); }, it->second);
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& key : keys()) out += fmt::format("{} = {}\n", key, get(key));
    return out;
}

std::uint64_t RunConfig::hash() const {
    std::string canonical;
    for (const auto& key : keys()) {
        if (key == "out_dir") continue;
        canonical += fmt::format("{} = {}\n", key, get(key));
    }
    return fnv1a(canonical);
}

void RunConfig::validate() const {
    for (const auto& key : keys()) {
        if (key == "seed" || key == "out_dir") continue;
        const auto& f = fields().at(key);
        if (const auto* m = std::get_if<std::size_t RunConfig::*>(&f); m && this->**m == 0 && key != "lookback") {
            throw std::invalid_argument(fmt::format("config: '{}' must be positive", key));
        }
        if (const auto* m = std::get_if<double RunConfig::*>(&f); m && !(this->**m >= 0)) {
            throw std::invalid_argument(fmt::format("config: '{}' must be non-negative", key));
        }
    }
    if (out_dir.empty()) throw std::invalid_argument("config: out_dir must not be empty");
    backbone().validate();
    const std::size_t candidates = 2 * (kNumOperations - 1);
    if (k > candidates) {
        throw std::invalid_argument(fmt::format("config: K = {} exceeds the {} candidates of the first node", k, candidates));
    }
    if (t > k) throw std::invalid_argument(fmt::format("config: T = {} exceeds K = {}", t, k));
    if (derive_epochs <= lookback) {
        throw std::invalid_argument(
            fmt::format("config: derive_epochs ({}) must exceed lookback ({})", derive_epochs, lookback));
    }
    schedule().validate();
    for (std::size_t n : {train_samples, val_samples, test_samples}) {
        if (n % num_classes != 0) {
            throw std::invalid_argument(fmt::format("config: split size {} is not a multiple of {} classes", n, num_classes));
        }
    }
    if (adam_beta1 >= 1 || adam_beta2 >= 1 || sgd_momentum >= 1) {
        throw std::invalid_argument("config: momentum coefficients must be < 1");
    }
}

BackboneSpec RunConfig::backbone() const {
    BackboneSpec s;
    s.num_cells = num_cells;
    s.channels = channels;
    s.num_nodes = num_nodes;
    s.stem_multiplier = stem_multiplier;
    s.in_channels = 3;
    s.num_classes = num_classes;
    s.image_size = image_size;
    return s;
}

SynthOptions RunConfig::synth() const {
    return SynthOptions{num_classes, image_size, 3, train_samples, val_samples, test_samples, noise_sigma};
}

DeriveOptions RunConfig::derive() const {
    DeriveOptions d;
    d.epochs = derive_epochs;
    d.k = k;
    d.lookback = lookback;
    d.batch_size = derive_batch_size;
    d.weight_lr = sgd_lr;
    d.sgd = SgdOptions{sgd_momentum, sgd_weight_decay};
    d.alpha_lr = adam_lr;
    d.adam = AdamOptions{adam_beta1, adam_beta2, 1e-8, adam_weight_decay};
    return d;
}

SearchSchedule RunConfig::schedule() const {
    SearchSchedule s;
    s.i_train = i_train;
    s.cross_start = cross_start;
    s.cross_end = cross_end;
    s.i_total = i_total;
    s.batch_size = batch_size;
    s.sgd_lr = sgd_lr;
    s.sgd = SgdOptions{sgd_momentum, sgd_weight_decay};
    s.adam_lr = adam_lr;
    s.adam = AdamOptions{adam_beta1, adam_beta2, 1e-8, adam_weight_decay};
    s.cross_lr_scale = cross_lr_scale;
    return s;
}

RunConfig parse_config(std::string_view text) {
    RunConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument(fmt::format("config: line {}: expected 'key = value'", line_no));
        }
        cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

void apply_env_overrides(RunConfig& config) {
    for (const auto& key : RunConfig::keys()) {
        std::string name = "HYPERNAS_" + key;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
        if (const char* v = std::getenv(name.c_str())) config.set(key, v);
    }
}

}  // namespace hypernas
