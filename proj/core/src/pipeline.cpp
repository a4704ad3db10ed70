// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "hypernas/dataset.hpp"
#include "hypernas/intensive_space.hpp"
#include "hypernas/metrics.hpp"

namespace hypernas {

StageError::StageError(std::string stage, const std::string& message)
    : std::runtime_error(fmt::format("[{}] {}", stage, message)), stage_(std::move(stage)) {}

std::filesystem::path stage_checkpoint(const RunConfig& config, std::string_view stage) {
    return std::filesystem::path(config.out_dir) / fmt::format("{}.ckpt", stage);
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
    std::filesystem::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        const int err = errno;
        throw std::runtime_error(err == EEXIST ? fmt::format("output directory '{}' is locked by another run ({} exists)",
                                                             dir.string(), path_.string())
                                               : fmt::format("cannot create lock '{}': {}", path_.string(), std::strerror(err)));
    }
    const std::string pid = fmt::format("{}\n", ::getpid());
    [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

DirectoryLock::~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
}

namespace {

std::string u64_text(std::uint64_t v) {
    ByteWriter w;
    w.u64(v);
    return w.take();
}

std::uint64_t text_u64(std::string_view bytes) {
    ByteReader r(bytes, "integer");
    const auto v = r.u64();
    r.expect_done();
    return v;
}

Checkpoint base_checkpoint(const RunConfig& config, std::string_view stage_tag) {
    Checkpoint ck;
    ck.put("stage", std::string(stage_tag));
    ck.put("config_hash", u64_text(config.hash()));
    ck.put("config", config.to_text());
    return ck;
}

std::string rng_states(std::initializer_list<const Rng*> rngs) {
    ByteWriter w;
    w.u64(rngs.size());
    for (const Rng* r : rngs) {
        w.str(r->stream());
        w.str(r->state());
    }
    return w.take();
}

void log_epoch(std::ostream* log, const EpochRecord& r) {
    if (log == nullptr) return;
    fmt::print(*log, "[{}] epoch {:3d}  loss {:.4f}  val_acc {:.4f}  gates a={} G={}  lr {:.5g}\n", r.stage, r.epoch,
               r.train_loss, r.val_acc, r.gate_alpha ? 1 : 0, r.gate_G ? 1 : 0, r.lr);
    log->flush();
}

EpochCallback collect_into(std::vector<EpochRecord>& rows, std::ostream* log) {
    return [&rows, log](const EpochRecord& r) {
        rows.push_back(r);
        log_epoch(log, r);
    };
}

std::filesystem::path out_path(const RunConfig& config, std::string_view name) {
    return std::filesystem::path(config.out_dir) / name;
}

template <typename Fn>
auto run_stage(std::string_view stage_tag, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(std::string(stage_tag), e.what());
    }
}

std::pair<IntensiveSpace, IntensiveSpace> spaces_of(const Checkpoint& ck) {
    auto spaces = spaces_from_text(ck.get("spaces"));
    if (spaces.size() != 2) throw std::runtime_error("checkpoint: spaces section must hold a normal and a reduce space");
    if (spaces[0].cell_type() != CellType::normal) std::swap(spaces[0], spaces[1]);
    return {spaces[0], spaces[1]};
}

DirectoryLock lock_output(const RunConfig& config, std::string_view stage_tag) {
    return run_stage(stage_tag, [&] { return DirectoryLock(config.out_dir); });
}

std::filesystem::path input_checkpoint(const RunConfig& config, const PipelineOptions& options, std::string_view prev) {
    return options.resume ? *options.resume : stage_checkpoint(config, prev);
}

void derive_impl(const RunConfig& config, const PipelineOptions& options) {
    run_stage(stage::derive, [&] {
        config.validate();
        std::filesystem::create_directories(config.out_dir);
        const Dataset data = synth_dataset(config.synth(), config.seed);
        std::vector<EpochRecord> rows;
        const DerivationResult result =
            derive_intensive_space(config.backbone(), data, config.derive(), config.seed, collect_into(rows, options.log));

        const std::array<IntensiveSpace, 2> pair{result.normal, result.reduce};
        const std::string spaces = spaces_to_text(pair);
        write_file(out_path(config, "derive.csv"), metrics_to_csv(rows));
        write_file(out_path(config, "spaces.txt"), spaces);
        write_file(out_path(config, "trajectory.txt"), result.trajectory.to_text());
        std::string summary = fmt::format("best_epoch = {}\n", result.best_epoch);
        for (std::size_t t = 0; t < result.mean_superiority.size(); ++t) {
            summary += fmt::format("epoch {} val_acc {} mean_superiority {}\n", t,
                                   result.trajectory.epochs[t].val_accuracy, result.mean_superiority[t]);
        }
        write_file(out_path(config, "derive_summary.txt"), summary);

        Checkpoint ck = base_checkpoint(config, stage::derive);
        ck.put("spaces", spaces);
        ck.put("trajectory", result.trajectory.to_text());
        ck.put("epoch", u64_text(config.derive_epochs));
        ck.put("best_epoch", u64_text(result.best_epoch));
        ck.save(stage_checkpoint(config, stage::derive));
        if (options.log) fmt::print(*options.log, "[derive] kept the spaces of epoch {}\n", result.best_epoch);
    });
}

void train_hyper_impl(const RunConfig& config, const PipelineOptions& options) {
    run_stage(stage::train_hyper, [&] {
        config.validate();
        const Checkpoint in =
            load_stage_checkpoint(input_checkpoint(config, options, stage::derive), stage::derive, config, stage::train_hyper);
        const auto [normal, reduce] = spaces_of(in);
        Rng init_rng(config.seed, "hyper/init");
        HyperNetwork net(config.backbone(), normal, reduce, init_rng);
        const Dataset data = synth_dataset(config.synth(), config.seed);
        Rng alpha_rng(config.seed, "train_hyper/alpha");
        Rng shuffle_rng(config.seed, "train_hyper/shuffle");
        std::vector<EpochRecord> rows;
        const StageOneResult result =
            train_hypernetwork(net, data, config.schedule(), alpha_rng, shuffle_rng, collect_into(rows, options.log));

        write_file(out_path(config, "train_hyper.csv"), metrics_to_csv(rows));
        Checkpoint ck = base_checkpoint(config, stage::train_hyper);
        ck.put("spaces", in.get("spaces"));
        ck.put("w_G", encode_tensors(net.named_parameters()));
        ck.put("opt_sgd", encode_sgd(result.sgd));
        ck.put("rng", rng_states({&init_rng, &alpha_rng, &shuffle_rng}));
        ck.put("epoch", u64_text(config.i_train));
        ck.save(stage_checkpoint(config, stage::train_hyper));
    });
}

void search_impl(const RunConfig& config, const PipelineOptions& options) {
    run_stage(stage::search, [&] {
        config.validate();
        const Checkpoint in = load_stage_checkpoint(input_checkpoint(config, options, stage::train_hyper),
                                                    stage::train_hyper, config, stage::search);
        HyperNetwork net = restore_hypernetwork(in, config);
        const Dataset data = synth_dataset(config.synth(), config.seed);
        Rng init_rng(config.seed, "search/init");
        Rng shuffle_rng(config.seed, "search/shuffle");
        std::vector<EpochRecord> rows;
        const SearchResult result = search_architecture(net, data, config.schedule(), decode_sgd(in.get("opt_sgd")),
                                                        init_rng, shuffle_rng, options.search,
                                                        collect_into(rows, options.log));

        write_file(out_path(config, "search.csv"), metrics_to_csv(rows));
        std::string sums = fmt::format("start {:016x}\n", result.wg_checksum_start);
        for (std::size_t i = 0; i < result.wg_checksums.size(); ++i) {
            sums += fmt::format("{} {} {:016x}\n", rows[i].epoch, rows[i].gate_G ? 1 : 0, result.wg_checksums[i]);
        }
        write_file(out_path(config, "wg_checksums.txt"), sums);

        std::vector<std::uint64_t> all{result.wg_checksum_start};
        all.insert(all.end(), result.wg_checksums.begin(), result.wg_checksums.end());
        Checkpoint ck = base_checkpoint(config, stage::search);
        ck.put("spaces", in.get("spaces"));
        ck.put("w_G", encode_tensors(net.named_parameters()));
        ck.put("alpha_arch", encode_arch(result.best));
        ck.put("alpha_final", encode_arch(result.final_arch));
        ck.put("opt_sgd", encode_sgd(result.sgd));
        ck.put("opt_adam", encode_adam(result.adam));
        ck.put("wg_checksums", encode_u64s(all));
        ck.put("rng", rng_states({&init_rng, &shuffle_rng}));
        ck.put("epoch", u64_text(config.i_total));
        ck.put("best_epoch", u64_text(result.best_epoch));
        ck.put("summary", fmt::format("best_epoch = {}\nbest_val_acc = {}\n", result.best_epoch, result.best_val_acc));
        ck.save(stage_checkpoint(config, stage::search));
        if (options.log) {
            fmt::print(*options.log, "[search] best validation accuracy {:.4f} at epoch {}\n", result.best_val_acc,
                       result.best_epoch);
        }
    });
}

void discretize_impl(const RunConfig& config, const PipelineOptions& options) {
    run_stage(stage::discretize, [&] {
        config.validate();
        const Checkpoint in = load_stage_checkpoint(input_checkpoint(config, options, stage::search), stage::search,
                                                    config, stage::discretize);
        const HyperNetwork net = restore_hypernetwork(in, config);
        const ArchParams arch = decode_arch(in.get("alpha_arch"), false);
        const DiscreteArchitecture discrete = discretize(arch, net, config.t);
        const std::string text = discrete.to_text();
        write_file(out_path(config, "architecture.txt"), text);

        Checkpoint ck = base_checkpoint(config, stage::discretize);
        for (const char* s : {"spaces", "w_G", "alpha_arch"}) ck.put(s, in.get(s));
        ck.put("architecture", text);
        ck.put("epoch", in.get("epoch"));
        ck.save(stage_checkpoint(config, stage::discretize));
    });
}

EvaluationSummary evaluate_impl(const RunConfig& config, const PipelineOptions& options) {
    return run_stage(stage::evaluate, [&] {
        config.validate();
        const Checkpoint in = load_stage_checkpoint(input_checkpoint(config, options, stage::discretize),
                                                    stage::discretize, config, stage::evaluate);
        const HyperNetwork net = restore_hypernetwork(in, config);
        const DiscreteArchitecture discrete = DiscreteArchitecture::from_text(in.get("architecture"));
        const Dataset data = synth_dataset(config.synth(), config.seed);
        EvaluationSummary summary;
        summary.val_acc = evaluate_architecture(discrete, net, data.val, config.batch_size);
        summary.test_acc = evaluate_architecture(discrete, net, data.test, config.batch_size);
        const std::string text = fmt::format("chance = {}\nval_acc = {}\ntest_acc = {}\n",
                                             1.0 / static_cast<double>(config.num_classes), summary.val_acc,
                                             summary.test_acc);
        write_file(out_path(config, "evaluation.txt"), text);

        Checkpoint ck = base_checkpoint(config, stage::evaluate);
        ck.put("architecture", in.get("architecture"));
        ck.put("summary", text);
        ck.save(stage_checkpoint(config, stage::evaluate));
        if (options.log) {
            fmt::print(*options.log, "[evaluate] no-finetune accuracy: val {:.4f}  test {:.4f}\n", summary.val_acc,
                       summary.test_acc);
        }
        return summary;
    });
}

}  // namespace

Checkpoint load_stage_checkpoint(const std::filesystem::path& path, std::string_view expected_stage,
                                 const RunConfig& config, std::string_view current_stage) {
    Checkpoint ck;
    try {
        ck = Checkpoint::load(path);
    } catch (const std::exception& e) {
        throw StageError(std::string(current_stage),
                         fmt::format("needs a '{}' checkpoint: {}", expected_stage, e.what()));
    }
    const std::string found = ck.has("stage") ? ck.get("stage") : std::string("<none>");
    if (found != expected_stage) {
        throw StageError(std::string(current_stage), fmt::format("expected a '{}' checkpoint, found stage '{}' in '{}'",
                                                                 expected_stage, found, path.string()));
    }
    const std::uint64_t stored = text_u64(ck.get("config_hash"));
    if (stored != config.hash()) {
        throw StageError(std::string(current_stage),
                         fmt::format("config hash mismatch: checkpoint '{}' has {:016x}, current config has {:016x}",
                                     path.string(), stored, config.hash()));
    }
    return ck;
}

HyperNetwork restore_hypernetwork(const Checkpoint& ck, const RunConfig& config) {
    const auto [normal, reduce] = spaces_of(ck);
    Rng init_rng(config.seed, "hyper/init");
    HyperNetwork net(config.backbone(), normal, reduce, init_rng);
    decode_tensors_into(ck.get("w_G"), net.named_parameters());
    return net;
}

void cmd_derive_space(const RunConfig& config, const PipelineOptions& options) {
    const DirectoryLock lock = lock_output(config, stage::derive);
    derive_impl(config, options);
}

void cmd_train_hyper(const RunConfig& config, const PipelineOptions& options) {
    const DirectoryLock lock = lock_output(config, stage::train_hyper);
    train_hyper_impl(config, options);
}

void cmd_search(const RunConfig& config, const PipelineOptions& options) {
    const DirectoryLock lock = lock_output(config, stage::search);
    search_impl(config, options);
}

void cmd_discretize(const RunConfig& config, const PipelineOptions& options) {
    const DirectoryLock lock = lock_output(config, stage::discretize);
    discretize_impl(config, options);
}

EvaluationSummary cmd_evaluate(const RunConfig& config, const PipelineOptions& options) {
    const DirectoryLock lock = lock_output(config, stage::evaluate);
    return evaluate_impl(config, options);
}

ComplexityCount cmd_complexity(std::size_t m, std::size_t k, std::size_t t, std::size_t l) {
    return run_stage("complexity", [&] { return complexity_count(m, k, t, l); });
}

RunSummary cmd_run_all(const RunConfig& config, const PipelineOptions& options) {
    const DirectoryLock lock = lock_output(config, stage::derive);
    write_file(out_path(config, "config.cfg"), config.to_text());
    PipelineOptions chained = options;
    chained.resume.reset();
    derive_impl(config, chained);
    train_hyper_impl(config, chained);
    search_impl(config, chained);
    discretize_impl(config, chained);
    RunSummary summary;
    summary.evaluation = evaluate_impl(config, chained);
    summary.derive_best_epoch = text_u64(Checkpoint::load(stage_checkpoint(config, stage::derive)).get("best_epoch"));
    const Checkpoint search = Checkpoint::load(stage_checkpoint(config, stage::search));
    summary.search_best_epoch = text_u64(search.get("best_epoch"));
    std::istringstream s(search.get("summary"));
    std::string key, eq;
    double value = 0;
    while (s >> key >> eq >> value) {
        if (key == "best_val_acc") summary.search_best_val_acc = value;
    }
    return summary;
}

}  // namespace hypernas
