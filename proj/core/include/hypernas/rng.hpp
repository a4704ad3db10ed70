// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace hypernas {

/// Deterministic generator for one named substream of a run seed. Every
/// source of randomness in a run goes through one of these, so the run seed
/// alone fixes all draws.
class Rng {
public:
    Rng(std::uint64_t seed, std::string_view stream);

    double normal();
    double uniform(double lo, double hi);
    std::size_t index(std::size_t n);
    void shuffle(std::vector<std::size_t>& values);

    std::string state() const;
    void restore(const std::string& state);

    const std::string& stream() const { return stream_; }

private:
    std::string stream_;
    std::mt19937_64 engine_;
};

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace hypernas
