// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "hypernas/checkpoint.hpp"
#include "hypernas/config.hpp"
#include "hypernas/search.hpp"

namespace hypernas {

/// Failure inside one pipeline stage; `stage()` is the stage tag.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

namespace stage {
inline constexpr std::string_view derive = "derive";
inline constexpr std::string_view train_hyper = "train_hyper";
inline constexpr std::string_view search = "search";
inline constexpr std::string_view discretize = "discretize";
inline constexpr std::string_view evaluate = "evaluate";
}  // namespace stage

struct PipelineOptions {
    /// Input checkpoint of the previous stage; defaults to <out>/<prev>.ckpt.
    std::optional<std::filesystem::path> resume;
    /// Progress lines go here when set.
    std::ostream* log = nullptr;
    SearchOptions search{};
};

std::filesystem::path stage_checkpoint(const RunConfig& config, std::string_view stage);

/// Holds <dir>/.lock for its lifetime; fails if another run holds it.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::filesystem::path path_;
};

struct EvaluationSummary {
    double val_acc = 0;
    double test_acc = 0;
};

struct RunSummary {
    std::size_t derive_best_epoch = 0;
    std::size_t search_best_epoch = 0;
    double search_best_val_acc = 0;
    EvaluationSummary evaluation;
};

/// Stage commands. Each validates the config, reads the previous stage's
/// checkpoint (config hash and stage tag must match), and writes
/// <out>/<stage>.ckpt, <out>/<stage>.csv where applicable, and its text
/// artifacts. Failures surface as StageError.
void cmd_derive_space(const RunConfig& config, const PipelineOptions& options = {});
void cmd_train_hyper(const RunConfig& config, const PipelineOptions& options = {});
void cmd_search(const RunConfig& config, const PipelineOptions& options = {});
void cmd_discretize(const RunConfig& config, const PipelineOptions& options = {});
EvaluationSummary cmd_evaluate(const RunConfig& config, const PipelineOptions& options = {});
ComplexityCount cmd_complexity(std::size_t m, std::size_t k, std::size_t t, std::size_t l);
RunSummary cmd_run_all(const RunConfig& config, const PipelineOptions& options = {});

/// Loads a checkpoint and checks its stage tag and config hash.
Checkpoint load_stage_checkpoint(const std::filesystem::path& path, std::string_view expected_stage,
                                 const RunConfig& config, std::string_view current_stage);

/// Rebuilds the hypernetwork of a checkpoint holding `spaces` and `w_G`.
HyperNetwork restore_hypernetwork(const Checkpoint& ck, const RunConfig& config);

}  // namespace hypernas
