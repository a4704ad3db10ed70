// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hypernas/tensor.hpp"

namespace hypernas {

/// One split of labelled NCHW images.
struct Split {
    Tensor images;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    Tensor batch_images(std::span<const std::size_t> indices) const;
    std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
};

struct Dataset {
    Split train;
    Split val;
    Split test;
    std::size_t num_classes = 0;
    Tensor templates;  // [num_classes, C, H, W]
};

struct SynthOptions {
    std::size_t num_classes = 4;
    std::size_t image_size = 8;
    std::size_t channels = 3;
    std::size_t train_samples = 256;
    std::size_t val_samples = 128;
    std::size_t test_samples = 128;
    double noise_sigma = 1.0;
};

/// Class-conditional images: a fixed N(0,1) template per class plus i.i.d.
/// N(0, sigma^2) pixel noise. Every split holds exactly size/num_classes
/// samples of each class, in shuffled order.
Dataset synth_dataset(const SynthOptions& options, std::uint64_t seed);

/// Contiguous minibatches over a (possibly shuffled) index order; the final
/// batch may be short.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order, std::size_t batch_size);

}  // namespace hypernas
