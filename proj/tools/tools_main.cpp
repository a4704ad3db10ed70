// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "hypernas/config.hpp"
#include "hypernas/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> resume;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_resume) {
    cmd->add_option("--config", flags.config_path, "Config file (key = value lines)");
    cmd->add_option("--seed", flags.seed, "Override the run seed");
    cmd->add_option("--out", flags.out, "Override the output directory");
    if (with_resume) cmd->add_option("--resume", flags.resume, "Input checkpoint of the previous stage");
    cmd->add_flag("--quiet", flags.quiet, "Suppress per-epoch progress");
}

hypernas::RunConfig resolve_config(const CommonFlags& flags) {
    hypernas::RunConfig cfg = flags.config_path.empty() ? hypernas::RunConfig{} : hypernas::load_config(flags.config_path);
    hypernas::apply_env_overrides(cfg);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.out_dir = *flags.out;
    cfg.validate();
    return cfg;
}

hypernas::PipelineOptions resolve_options(const CommonFlags& flags) {
    hypernas::PipelineOptions opts;
    if (flags.resume) opts.resume = *flags.resume;
    if (!flags.quiet) opts.log = &std::cerr;
    return opts;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Architecture search with a weight-generating hypernetwork over a pruned intensive space"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto* derive = app.add_subcommand("derive-space", "Derive the normal and reduce intensive spaces");
    auto* train = app.add_subcommand("train-hyper", "Train the hypernetwork with random architecture encodings");
    auto* search = app.add_subcommand("search", "Gated architecture search with the cross-search window");
    auto* disc = app.add_subcommand("discretize", "Keep the top-T operations per node");
    auto* eval = app.add_subcommand("evaluate", "Evaluate the discrete architecture without finetuning");
    auto* all = app.add_subcommand("run-all", "Run every stage in order");
    add_common(derive, flags, false);
    for (auto* c : {train, search, disc, eval}) add_common(c, flags, true);
    add_common(all, flags, false);

    bool force_alpha_off = false;
    search->add_flag("--force-alpha-gate-off", force_alpha_off, "Diagnostic: never update the architecture parameters");

    auto* complexity = app.add_subcommand("complexity", "Count the discrete sub-graphs of the searched space");
    std::size_t m = 7, k = 6, t = 2, l = 8;
    complexity->add_option("M", m, "Nodes per cell")->required();
    complexity->add_option("K", k, "Slots per node in the intensive space")->required();
    complexity->add_option("T", t, "Operations kept per node")->required();
    complexity->add_option("L", l, "Number of cells")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (complexity->parsed()) {
            const auto c = hypernas::cmd_complexity(m, k, t, l);
            fmt::print("{} = {}\n~10^{}\n", c.power, c.exact, c.order);
            return 0;
        }
        const hypernas::RunConfig cfg = resolve_config(flags);
        hypernas::PipelineOptions opts = resolve_options(flags);
        opts.search.force_alpha_gate_off = force_alpha_off;
        if (derive->parsed()) {
            hypernas::cmd_derive_space(cfg, opts);
        } else if (train->parsed()) {
            hypernas::cmd_train_hyper(cfg, opts);
        } else if (search->parsed()) {
            hypernas::cmd_search(cfg, opts);
        } else if (disc->parsed()) {
            hypernas::cmd_discretize(cfg, opts);
            std::cout << hypernas::read_file(std::filesystem::path(cfg.out_dir) / "architecture.txt");
        } else if (eval->parsed()) {
            const auto s = hypernas::cmd_evaluate(cfg, opts);
            fmt::print("val_acc {:.4f}\ntest_acc {:.4f}\n", s.val_acc, s.test_acc);
        } else if (all->parsed()) {
            const auto s = hypernas::cmd_run_all(cfg, opts);
            fmt::print("derive kept epoch {}\nsearch best val_acc {:.4f} (epoch {})\nno-finetune val_acc {:.4f} test_acc {:.4f}\n",
                       s.derive_best_epoch, s.search_best_val_acc, s.search_best_epoch, s.evaluation.val_acc,
                       s.evaluation.test_acc);
        }
    } catch (const hypernas::StageError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
