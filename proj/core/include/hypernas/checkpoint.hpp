// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hypernas/hypernetwork.hpp"
#include "hypernas/optim.hpp"
#include "hypernas/tensor.hpp"

namespace hypernas {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned binary container of named byte sections.
///
/// Layout (little-endian): 8-byte magic, u32 version, u32 section count,
/// then per section {u32 name length, name, u64 offset, u64 size}, then the
/// payloads in index order. Sections are kept sorted by name, so loading and
/// re-saving reproduces the same bytes.
class Checkpoint {
public:
    std::uint32_t version = kCheckpointVersion;

    void put(std::string name, std::string bytes);
    bool has(std::string_view name) const;
    /// Throws naming the missing section.
    const std::string& get(std::string_view name) const;
    std::vector<std::string> section_names() const;

    std::string to_bytes() const;
    static Checkpoint from_bytes(std::string_view bytes);
    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

private:
    std::map<std::string, std::string, std::less<>> sections_;
};

/// Little-endian primitive encoding shared by the section payloads.
class ByteWriter {
public:
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void str(std::string_view s);
    void f64s(std::span<const Scalar> values);
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes, std::string_view what = "section") : in_(bytes), what_(what) {}
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string str();
    std::vector<Scalar> f64s();
    std::string_view raw(std::size_t n) { return take(n); }
    std::size_t position() const { return pos_; }
    bool done() const { return pos_ == in_.size(); }
    void expect_done() const;

private:
    std::string_view take(std::size_t n);
    std::string_view in_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::string encode_tensors(const NamedTensors& tensors);
/// Copies stored values into `into` by name; names and shapes must match.
void decode_tensors_into(std::string_view bytes, const NamedTensors& into);
NamedTensors decode_tensors(std::string_view bytes);

std::string encode_arch(const ArchParams& arch);
ArchParams decode_arch(std::string_view bytes, bool requires_grad);

std::string encode_sgd(const SgdState& state);
SgdState decode_sgd(std::string_view bytes);
std::string encode_adam(const AdamState& state);
AdamState decode_adam(std::string_view bytes);

std::string encode_u64s(std::span<const std::uint64_t> values);
std::vector<std::uint64_t> decode_u64s(std::string_view bytes);

}  // namespace hypernas
