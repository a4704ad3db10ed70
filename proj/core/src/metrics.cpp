// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace hypernas {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view s) {
    // std::from_chars for double is available in libstdc++ 11.
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::invalid_argument(fmt::format("metrics: bad number '{}'", s));
    }
    return v;
}

}  // namespace

std::string metrics_to_csv(std::span<const EpochRecord> records) {
    std::string out(kMetricsHeader);
    out += '\n';
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{},{}\n", r.stage, r.epoch, r.train_loss, r.val_acc, r.gate_alpha ? 1 : 0,
                           r.gate_G ? 1 : 0, r.lr);
    }
    return out;
}

std::vector<EpochRecord> metrics_from_csv(std::string_view text) {
    std::vector<EpochRecord> out;
    bool header = true;
    for (auto line : split(text, '\n')) {
        if (line.empty()) continue;
        if (header) {
            if (line != kMetricsHeader) throw std::invalid_argument(fmt::format("metrics: unexpected header '{}'", line));
            header = false;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 7) throw std::invalid_argument(fmt::format("metrics: expected 7 fields in '{}'", line));
        EpochRecord r;
        r.stage = std::string(f[0]);
        r.epoch = static_cast<std::size_t>(parse_double(f[1]));
        r.train_loss = parse_double(f[2]);
        r.val_acc = parse_double(f[3]);
        r.gate_alpha = f[4] == "1";
        r.gate_G = f[5] == "1";
        r.lr = parse_double(f[6]);
        out.push_back(std::move(r));
    }
    return out;
}

double accuracy(const Tensor& logits, std::span<const int> labels) {
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    if (labels.size() != n) throw std::invalid_argument("accuracy: label count mismatch");
    const auto z = logits.data();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < c; ++k) {
            if (z[i * c + k] > z[i * c + best]) best = k;
        }
        if (static_cast<int>(best) == labels[i]) ++correct;
    }
    return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error(fmt::format("short write to '{}'", path.string()));
}

}  // namespace hypernas
