// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

#include <fmt/format.h>

#include "hypernas/metrics.hpp"

namespace hypernas {

namespace {

constexpr std::string_view kMagic = "HNASCKPT";

}  // namespace

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
    u64(s.size());
    out_.append(s);
}

void ByteWriter::f64s(std::span<const Scalar> values) {
    u64(values.size());
    for (Scalar v : values) f64(v);
}

std::string_view ByteReader::take(std::size_t n) {
    if (n > in_.size() - pos_) {
        throw std::runtime_error(fmt::format("checkpoint: {} truncated at byte {} (need {} more)", what_, pos_, n));
    }
    const auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
}

std::uint32_t ByteReader::u32() {
    const auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
}

std::uint64_t ByteReader::u64() {
    const auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
    const std::uint64_t n = u64();
    return std::string(take(n));
}

std::vector<Scalar> ByteReader::f64s() {
    const std::uint64_t n = u64();
    if (n > (in_.size() - pos_) / 8) throw std::runtime_error(fmt::format("checkpoint: {} has a bad array length", what_));
    std::vector<Scalar> v(n);
    for (auto& x : v) x = f64();
    return v;
}

void ByteReader::expect_done() const {
    if (!done()) throw std::runtime_error(fmt::format("checkpoint: {} has {} trailing bytes", what_, in_.size() - pos_));
}

void Checkpoint::put(std::string name, std::string bytes) { sections_[std::move(name)] = std::move(bytes); }

bool Checkpoint::has(std::string_view name) const { return sections_.find(name) != sections_.end(); }

const std::string& Checkpoint::get(std::string_view name) const {
    const auto it = sections_.find(name);
    if (it == sections_.end()) throw std::runtime_error(fmt::format("checkpoint: missing section '{}'", name));
    return it->second;
}

std::vector<std::string> Checkpoint::section_names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : sections_) out.push_back(k);
    return out;
}

std::string Checkpoint::to_bytes() const {
    std::size_t header = kMagic.size() + 8;
    for (const auto& [name, _] : sections_) header += 4 + name.size() + 16;
    ByteWriter w;
    w.u32(version);
    w.u32(static_cast<std::uint32_t>(sections_.size()));
    std::string out(kMagic);
    out += w.take();
    std::uint64_t offset = header;
    for (const auto& [name, bytes] : sections_) {
        ByteWriter e;
        e.u32(static_cast<std::uint32_t>(name.size()));
        out += e.take();
        out += name;
        e.u64(offset);
        e.u64(bytes.size());
        out += e.take();
        offset += bytes.size();
    }
    for (const auto& [_, bytes] : sections_) out += bytes;
    return out;
}

Checkpoint Checkpoint::from_bytes(std::string_view bytes) {
    if (bytes.substr(0, kMagic.size()) != kMagic) throw std::runtime_error("checkpoint: bad magic (not a checkpoint file)");
    ByteReader r(bytes.substr(kMagic.size()), "header");
    Checkpoint ck;
    ck.version = r.u32();
    if (ck.version != kCheckpointVersion) {
        throw std::runtime_error(
            fmt::format("checkpoint: format version {} is not supported (expected {})", ck.version, kCheckpointVersion));
    }
    const std::uint32_t count = r.u32();
    std::uint64_t expected = kMagic.size() + 8;
    struct Entry {
        std::string name;
        std::uint64_t offset, size;
    };
    std::vector<Entry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = r.u32();
        Entry e{std::string(r.raw(len)), 0, 0};
        e.offset = r.u64();
        e.size = r.u64();
        expected += 4 + len + 16;
        entries.push_back(std::move(e));
    }
    for (const auto& e : entries) {
        if (e.offset != expected || e.size > bytes.size() || e.offset > bytes.size() - e.size) {
            throw std::runtime_error(fmt::format("checkpoint: section '{}' has an invalid extent", e.name));
        }
        if (ck.has(e.name)) throw std::runtime_error(fmt::format("checkpoint: duplicate section '{}'", e.name));
        ck.put(e.name, std::string(bytes.substr(e.offset, e.size)));
        expected += e.size;
    }
    if (expected != bytes.size()) throw std::runtime_error("checkpoint: trailing bytes after the last section");
    return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    const auto tmp = path.string() + ".tmp";
    write_file(tmp, to_bytes());
    std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw std::runtime_error(fmt::format("checkpoint '{}' does not exist", path.string()));
    return from_bytes(read_file(path));
}

std::string encode_tensors(const NamedTensors& tensors) {
    ByteWriter w;
    w.u64(tensors.size());
    for (const auto& [name, t] : tensors) {
        w.str(name);
        w.u64(t.rank());
        for (std::size_t d : t.shape()) w.u64(d);
        w.f64s(t.data());
    }
    return w.take();
}

NamedTensors decode_tensors(std::string_view bytes) {
    ByteReader r(bytes, "tensor section");
    NamedTensors out;
    const std::uint64_t n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string name = r.str();
        Shape shape(r.u64());
        for (auto& d : shape) d = r.u64();
        auto values = r.f64s();
        if (values.size() != shape_numel(shape)) {
            throw std::runtime_error(fmt::format("checkpoint: tensor '{}' size does not match shape {}", name, shape_str(shape)));
        }
        out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    r.expect_done();
    return out;
}

void decode_tensors_into(std::string_view bytes, const NamedTensors& into) {
    const NamedTensors stored = decode_tensors(bytes);
    if (stored.size() != into.size()) {
        throw std::runtime_error(
            fmt::format("checkpoint: {} stored tensors, the network has {}", stored.size(), into.size()));
    }
    for (std::size_t i = 0; i < stored.size(); ++i) {
        const auto& [name, src] = stored[i];
        const auto& [want, dst] = into[i];
        if (name != want || src.shape() != dst.shape()) {
            throw std::runtime_error(fmt::format("checkpoint: stored tensor '{}' {} does not match '{}' {}", name,
                                                 shape_str(src.shape()), want, shape_str(dst.shape())));
        }
        auto out = Tensor(dst).mutable_data();
        std::copy(src.data().begin(), src.data().end(), out.begin());
    }
}

std::string encode_arch(const ArchParams& arch) {
    NamedTensors named;
    for (std::size_t l = 0; l < arch.cells.size(); ++l) named.emplace_back(fmt::format("alpha{}", l), arch.cells[l]);
    return encode_tensors(named);
}

ArchParams decode_arch(std::string_view bytes, bool requires_grad) {
    ArchParams arch;
    for (auto& [name, t] : decode_tensors(bytes)) {
        if (name != fmt::format("alpha{}", arch.cells.size())) {
            throw std::runtime_error(fmt::format("checkpoint: unexpected architecture entry '{}'", name));
        }
        t.set_requires_grad(requires_grad);
        arch.cells.push_back(t);
    }
    return arch;
}

namespace {

void write_buffers(ByteWriter& w, const std::vector<std::vector<Scalar>>& buffers) {
    w.u64(buffers.size());
    for (const auto& b : buffers) w.f64s(b);
}

std::vector<std::vector<Scalar>> read_buffers(ByteReader& r) {
    std::vector<std::vector<Scalar>> out(r.u64());
    for (auto& b : out) b = r.f64s();
    return out;
}

}  // namespace

std::string encode_sgd(const SgdState& state) {
    ByteWriter w;
    w.f64(state.options.momentum);
    w.f64(state.options.weight_decay);
    w.u64(state.steps);
    write_buffers(w, state.velocity);
    return w.take();
}

SgdState decode_sgd(std::string_view bytes) {
    ByteReader r(bytes, "SGD state");
    SgdState s;
    s.options.momentum = r.f64();
    s.options.weight_decay = r.f64();
    s.steps = r.u64();
    s.velocity = read_buffers(r);
    r.expect_done();
    return s;
}

std::string encode_adam(const AdamState& state) {
    ByteWriter w;
    w.f64(state.options.beta1);
    w.f64(state.options.beta2);
    w.f64(state.options.eps);
    w.f64(state.options.weight_decay);
    w.u64(state.steps);
    write_buffers(w, state.first_moment);
    write_buffers(w, state.second_moment);
    return w.take();
}

AdamState decode_adam(std::string_view bytes) {
    ByteReader r(bytes, "Adam state");
    AdamState s;
    s.options.beta1 = r.f64();
    s.options.beta2 = r.f64();
    s.options.eps = r.f64();
    s.options.weight_decay = r.f64();
    s.steps = r.u64();
    s.first_moment = read_buffers(r);
    s.second_moment = read_buffers(r);
    r.expect_done();
    return s;
}

std::string encode_u64s(std::span<const std::uint64_t> values) {
    ByteWriter w;
    w.u64(values.size());
    for (auto v : values) w.u64(v);
    return w.take();
}

std::vector<std::uint64_t> decode_u64s(std::string_view bytes) {
    ByteReader r(bytes, "integer list");
    std::vector<std::uint64_t> out(r.u64());
    for (auto& v : out) v = r.u64();
    r.expect_done();
    return out;
}

}  // namespace hypernas
