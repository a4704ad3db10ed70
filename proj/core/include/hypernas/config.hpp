// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hypernas/dataset.hpp"
#include "hypernas/intensive_space.hpp"
#include "hypernas/search.hpp"
#include "hypernas/search_space.hpp"

namespace hypernas {

/// Every tunable constant of a run. Defaults are the full-scale settings;
/// desk-scale runs override them from a config file.
struct RunConfig {
    std::size_t seed = 0;
    std::string out_dir = "runs/default";

    // data
    std::size_t num_classes = 10;
    std::size_t image_size = 32;
    std::size_t train_samples = 25000;
    std::size_t val_samples = 25000;
    std::size_t test_samples = 10000;
    double noise_sigma = 1.0;

    // backbone
    std::size_t num_cells = 8;
    std::size_t num_nodes = 7;
    std::size_t channels = 16;
    std::size_t stem_multiplier = 3;

    // spaces
    std::size_t k = 6;
    std::size_t lookback = 2;
    std::size_t t = 2;
    std::size_t derive_epochs = 50;
    std::size_t derive_batch_size = 64;

    // schedule
    std::size_t i_train = 60;
    std::size_t cross_start = 90;
    std::size_t cross_end = 100;
    std::size_t i_total = 120;
    std::size_t batch_size = 98;

    // optimizers
    double sgd_lr = 0.025;
    double sgd_momentum = 0.9;
    double sgd_weight_decay = 3e-4;
    double adam_lr = 3e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double adam_weight_decay = 1e-3;
    double cross_lr_scale = 0.1;

    void validate() const;

    /// Sets one key from its text value; unknown keys are rejected.
    void set(std::string_view key, std::string_view value);
    /// Every key in sorted order.
    static std::vector<std::string> keys();
    std::string get(std::string_view key) const;

    /// `key = value` lines, sorted by key.
    std::string to_text() const;
    /// FNV-1a of the canonical text, ignoring out_dir.
    std::uint64_t hash() const;

    BackboneSpec backbone() const;
    SynthOptions synth() const;
    DeriveOptions derive() const;
    SearchSchedule schedule() const;
};

/// Parses `key = value` lines (`#` starts a comment) over the defaults.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies HYPERNAS_<UPPERCASE_KEY> environment variables.
void apply_env_overrides(RunConfig& config);

}  // namespace hypernas
