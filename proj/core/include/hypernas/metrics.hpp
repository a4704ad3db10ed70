// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypernas/tensor.hpp"

namespace hypernas {

/// One row of the per-epoch metrics CSV.
struct EpochRecord {
    std::string stage;
    std::size_t epoch = 0;
    double train_loss = 0;
    double val_acc = 0;
    bool gate_alpha = false;
    bool gate_G = false;
    double lr = 0;

    bool operator==(const EpochRecord&) const = default;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

inline constexpr std::string_view kMetricsHeader = "stage,epoch,train_loss,val_acc,gate_alpha,gate_G,lr";

/// Header plus one row per record; floats use shortest round-trip form.
std::string metrics_to_csv(std::span<const EpochRecord> records);
std::vector<EpochRecord> metrics_from_csv(std::string_view text);

/// Fraction of rows whose argmax matches the label (first max wins).
double accuracy(const Tensor& logits, std::span<const int> labels);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace hypernas
