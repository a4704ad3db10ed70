// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/dataset.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "hypernas/rng.hpp"

namespace hypernas {

Tensor Split::batch_images(std::span<const std::size_t> indices) const {
    const Shape& s = images.shape();
    const std::size_t per = s[1] * s[2] * s[3];
    std::vector<Scalar> out;
    out.reserve(indices.size() * per);
    const auto d = images.data();
    for (std::size_t i : indices) {
        if (i >= size()) throw std::out_of_range(fmt::format("split: sample {} of {}", i, size()));
        out.insert(out.end(), d.begin() + static_cast<std::ptrdiff_t>(i * per),
                   d.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    }
    return Tensor(Shape{indices.size(), s[1], s[2], s[3]}, std::move(out));
}

std::vector<int> Split::batch_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(labels.at(i));
    return out;
}

namespace {

Split make_split(const Tensor& templates, std::size_t count, double sigma, Rng& rng) {
    const std::size_t classes = templates.dim(0);
    const std::size_t per = templates.numel() / classes;
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    Split split;
    split.labels.resize(count);
    std::vector<Scalar> pixels(count * per);
    const auto t = templates.data();
    for (std::size_t i = 0; i < count; ++i) {
        const auto label = static_cast<int>(order[i] % classes);
        split.labels[i] = label;
        for (std::size_t k = 0; k < per; ++k) {
            pixels[i * per + k] = t[static_cast<std::size_t>(label) * per + k] + sigma * rng.normal();
        }
    }
    const Shape& ts = templates.shape();
    split.images = Tensor(Shape{count, ts[1], ts[2], ts[3]}, std::move(pixels));
    return split;
}

}  // namespace

Dataset synth_dataset(const SynthOptions& options, std::uint64_t seed) {
    if (options.num_classes < 2) throw std::invalid_argument("synth_dataset: need at least two classes");
    for (std::size_t n : {options.train_samples, options.val_samples, options.test_samples}) {
        if (n == 0 || n % options.num_classes != 0) {
            throw std::invalid_argument(
                fmt::format("synth_dataset: split size {} is not a positive multiple of {} classes", n,
                            options.num_classes));
        }
    }
    if (options.noise_sigma < 0) throw std::invalid_argument("synth_dataset: noise sigma must be >= 0");

    Rng template_rng(seed, "dataset/templates");
    const Shape tshape{options.num_classes, options.channels, options.image_size, options.image_size};
    std::vector<Scalar> tv(shape_numel(tshape));
    for (auto& v : tv) v = template_rng.normal();

    Dataset ds;
    ds.num_classes = options.num_classes;
    ds.templates = Tensor(tshape, std::move(tv));
    Rng train_rng(seed, "dataset/train");
    Rng val_rng(seed, "dataset/val");
    Rng test_rng(seed, "dataset/test");
    ds.train = make_split(ds.templates, options.train_samples, options.noise_sigma, train_rng);
    ds.val = make_split(ds.templates, options.val_samples, options.noise_sigma, val_rng);
    ds.test = make_split(ds.templates, options.test_samples, options.noise_sigma, test_rng);
    return ds;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order, std::size_t batch_size) {
    if (batch_size == 0) throw std::invalid_argument("make_batches: batch size must be > 0");
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        const std::size_t end = std::min(order.size(), i + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

}  // namespace hypernas
