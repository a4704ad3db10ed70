// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hypernas/checkpoint.hpp"
#include "hypernas/config.hpp"
#include "hypernas/ops.hpp"
#include "hypernas/pipeline.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace hypernas;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
    bool pass = true;
    std::vector<std::string> notes;
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            failures.push_back(what);
        }
    }
    void note(std::string s) { notes.push_back(std::move(s)); }
};

std::ostream& progress() { return std::cerr; }

// Schoolbook decimal power, independent of the big-integer library.
std::string decimal_power(unsigned base, unsigned exponent) {
    std::vector<unsigned> digits{1};  // little-endian
    for (unsigned e = 0; e < exponent; ++e) {
        unsigned carry = 0;
        for (auto& d : digits) {
            const unsigned v = d * base + carry;
            d = v % 10;
            carry = v / 10;
        }
        while (carry > 0) {
            digits.push_back(carry % 10);
            carry /= 10;
        }
    }
    std::string out;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) out += static_cast<char>('0' + *it);
    return out;
}

Verdict criterion_complexity() {
    Verdict v;
    const auto start = Clock::now();
    const auto c8 = cmd_complexity(7, 6, 2, 8);
    const auto c14 = cmd_complexity(7, 6, 2, 14);
    const double elapsed = seconds_since(start);
    v.expect(c8.order == 37, fmt::format("L=8 order {} != 37", c8.order));
    v.expect(c14.order == 65, fmt::format("L=14 order {} != 65", c14.order));
    v.expect(c8.exact == decimal_power(15, 32), "L=8 exact value differs from 15^32");
    v.expect(c14.exact == decimal_power(15, 56), "L=14 exact value differs from 15^56");
    v.expect(c8.power == "15^32" && c14.power == "15^56", "power strings");
    v.expect(elapsed < 1.0, fmt::format("runtime {:.3f}s >= 1s", elapsed));
    v.note(fmt::format("{} ~10^{}, {} ~10^{}, {:.4f}s", c8.power, c8.order, c14.power, c14.order, elapsed));
    return v;
}

std::pair<IntensiveSpace, IntensiveSpace> random_spaces(std::size_t m, std::size_t k, Rng& rng) {
    const CellSpec nc{m, CellType::normal}, rc{m, CellType::reduce};
    std::vector<Tensor> an, ar;
    for (std::size_t e = 0; e < nc.num_edges(); ++e) {
        an.push_back(oracle::random_tensor({8}, rng));
        ar.push_back(oracle::random_tensor({8}, rng));
    }
    return {select_topk_ops(an, nc, k), select_topk_ops(ar, rc, k)};
}

Verdict criterion_gradients(const RunConfig& config) {
    Verdict v;
    const auto start = Clock::now();
    BackboneSpec spec = config.backbone();
    spec.num_cells = 4;
    spec.image_size = 8;
    Rng srng(config.seed, "acceptance/spaces"), init(config.seed, "acceptance/init");
    Rng xr(config.seed, "acceptance/x"), ar(config.seed, "acceptance/alpha"), pick(config.seed, "acceptance/pick");
    auto [normal, reduce] = random_spaces(spec.num_nodes, config.k, srng);
    HyperNetwork net(spec, normal, reduce, init);
    const std::size_t batch = 2 * spec.num_classes;
    const Tensor x = oracle::random_tensor({batch, spec.in_channels, 8, 8}, xr);
    std::vector<int> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>(i % spec.num_classes);
    ArchParams arch = sample_random_alpha(net, ar).clone(true);
    const auto loss = [&] { return cross_entropy(net.forward(x, arch), labels); };
    backward(loss());
    const auto f = [&] {
        NoGradGuard guard;
        return loss().item();
    };

    // Uniform over flat coordinates of each group. A coordinate whose h-stencil
    // straddles a ReLU/max-pool switch is redrawn, and is itself checked with
    // a step below the switch spacing so that no drawn coordinate goes unchecked.
    const auto check = [&](std::vector<Tensor> group, const char* name) {
        std::size_t total = 0;
        for (const auto& t : group) total += t.numel();
        double worst = 0, worst_kinked = 0;
        std::size_t checked = 0, kinked = 0, unresolved = 0;
        while (checked < 20 && kinked < 100) {
            std::size_t flat = pick.index(total), which = 0;
            while (flat >= group[which].numel()) flat -= group[which++].numel();
            Tensor& t = group[which];
            const double autodiff = t.grad()[flat];
            const auto probe = oracle::probe_difference(f, t, flat, 1e-3);
            if (probe.smooth) {
                const double err = oracle::rel_error(autodiff, probe.derivative);
                worst = std::max(worst, err);
                v.expect(err < 1e-3, fmt::format("{} coordinate rel err {:.3g} (autodiff {:.10g}, fd {:.10g})", name,
                                                 err, autodiff, probe.derivative));
                ++checked;
                continue;
            }
            ++kinked;
            const auto fine = oracle::probe_difference(f, t, flat, 1e-5);
            if (!fine.smooth) {
                ++unresolved;
                continue;
            }
            const double err = oracle::rel_error(autodiff, fine.derivative);
            worst_kinked = std::max(worst_kinked, err);
            v.expect(err < 1e-3, fmt::format("{} kinked coordinate rel err {:.3g} at h=1e-5 (autodiff {:.10g}, fd {:.10g})",
                                             name, err, autodiff, fine.derivative));
        }
        v.expect(checked == 20, fmt::format("{}: only {} smooth coordinates in {} draws", name, checked, checked + kinked));
        v.expect(unresolved <= kinked / 10, fmt::format("{}: {} coordinates not smooth even at h=1e-5", name, unresolved));
        v.note(fmt::format("{} {} coords max rel err {:.2e}; {} kinked at h=1e-3 re-checked at h=1e-5, max rel err {:.2e}, "
                           "{} unresolved",
                           name, checked, worst, kinked, worst_kinked, unresolved));
    };
    check(net.parameters(), "w_G");
    check(arch.cells, "alpha");
    const double elapsed = seconds_since(start);
    v.expect(elapsed < 300, fmt::format("runtime {:.1f}s >= 300s", elapsed));
    v.note(fmt::format("{:.1f}s", elapsed));
    return v;
}

Verdict criterion_oracles() {
    Verdict v;
    Rng rng(7, "acceptance/oracles");
    // select_topk_ops: best K-subset by total probability (M=5, K=3) and a
    // full-width sort oracle (M=7, K=6).
    std::size_t topk_mismatch = 0;
    for (int draw = 0; draw < 200; ++draw) {
        for (const auto& [m, k] : {std::pair<std::size_t, std::size_t>{5, 3}, {7, 6}}) {
            const CellSpec cell{m};
            std::vector<Tensor> alpha;
            for (std::size_t e = 0; e < cell.num_edges(); ++e) alpha.push_back(oracle::random_tensor({8}, rng, 2.0));
            const IntensiveSpace got = select_topk_ops(alpha, cell, k);
            for (std::size_t j = 2; j + 1 < m; ++j) {
                std::vector<std::pair<double, Slot>> cands;
                for (std::size_t i = 0; i < j; ++i) {
                    const Tensor& a = alpha[cell.edge_index(i, j)];
                    double z = 0;
                    for (std::size_t o = 0; o < 8; ++o) z += std::exp(a[o]);
                    for (std::size_t o = 0; o < 7; ++o) cands.push_back({std::exp(a[o]) / z, Slot{j, i, kAllOperations[o]}});
                }
                std::set<Slot> want;
                if (m == 5) {
                    double best = -1;
                    for (const auto& sub : oracle::subsets(cands.size(), k)) {
                        double s = 0;
                        for (auto c : sub) s += cands[c].first;
                        if (s > best) {
                            best = s;
                            want.clear();
                            for (auto c : sub) want.insert(cands[c].second);
                        }
                    }
                } else {
                    std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
                    for (std::size_t r = 0; r < k; ++r) want.insert(cands[r].second);
                }
                const auto ns = got.node_slots(j);
                topk_mismatch += std::set<Slot>(ns.begin(), ns.end()) != want;
            }
        }
    }
    v.expect(topk_mismatch == 0, fmt::format("select_topk_ops disagreed on {} node selections", topk_mismatch));

    // discretize: best T-subset of each node's slots by cell probability.
    BackboneSpec spec;
    Rng srng(8, "acceptance/spaces"), init(8, "acceptance/init");
    auto [normal, reduce] = random_spaces(7, 6, srng);
    const HyperNetwork net(spec, normal, reduce, init);
    std::size_t disc_mismatch = 0;
    for (int draw = 0; draw < 200; ++draw) {
        const ArchParams arch = sample_random_alpha(net, rng);
        const DiscreteArchitecture d = discretize(arch, net, 2);
        std::set<std::tuple<std::size_t, Slot>> got;
        for (const auto& o : d.ops) got.insert({o.cell, Slot{o.node, o.source, o.op}});
        std::set<std::tuple<std::size_t, Slot>> want;
        for (std::size_t l = 0; l < spec.num_cells; ++l) {
            const auto& sp = net.cell_space(l);
            double z = 0;
            for (double a : arch.cells[l].data()) z += std::exp(a);
            for (std::size_t j = 2; j < 6; ++j) {
                const std::size_t off = sp.slot_offset(j);
                double best = -1;
                std::vector<std::size_t> pick;
                for (const auto& sub : oracle::subsets(sp.k(), 2)) {
                    double s = 0;
                    for (auto q : sub) s += std::exp(arch.cells[l][off + q]) / z;
                    if (s > best) {
                        best = s;
                        pick = sub;
                    }
                }
                for (auto q : pick) want.insert({l, sp.slots()[off + q]});
            }
        }
        disc_mismatch += got != want;
    }
    v.expect(disc_mismatch == 0, fmt::format("discretize disagreed on {} of 200 draws", disc_mismatch));

    // conv / pool against nested loops on every geometry the pipeline runs.
    double conv_err = 0, pool_err = 0;
    for (std::size_t c : {8u, 16u}) {
        const Tensor x = oracle::random_tensor({2, c, 8, 8}, rng);
        for (OperationKind op : kAllOperations) {
            if (!is_conv(op)) continue;
            const auto stages = kernel_stages(op, c);
            const Tensor dw = oracle::random_tensor(stages[0], rng);
            const std::size_t k = stages[0][2];
            const std::size_t dil = op == OperationKind::dil_conv_3x3 || op == OperationKind::dil_conv_5x5 ? 2 : 1;
            for (std::size_t stride : {1u, 2u}) {
                const std::size_t pad = dil * (k - 1) / 2;
                const auto got = conv2d(x, dw, {stride, pad, dil, c});
                const auto want = oracle::conv2d(x, dw, stride, pad, dil, c);
                for (std::size_t i = 0; i < want.size(); ++i) conv_err = std::max(conv_err, std::abs(got[i] - want[i]));
                for (PoolKind kind : {PoolKind::max, PoolKind::avg}) {
                    const auto pgot = pool2d(x, kind, {3, stride, 1});
                    const auto pwant = kind == PoolKind::max ? oracle::max_pool(x, 3, stride, 1) : oracle::avg_pool(x, 3, stride, 1);
                    for (std::size_t i = 0; i < pwant.size(); ++i) pool_err = std::max(pool_err, std::abs(pgot[i] - pwant[i]));
                }
            }
            const Tensor pw = oracle::random_tensor(stages[1], rng);
            const auto got = conv2d(x, pw);
            const auto want = oracle::conv2d(x, pw, 1, 0, 1, 1);
            for (std::size_t i = 0; i < want.size(); ++i) conv_err = std::max(conv_err, std::abs(got[i] - want[i]));
        }
        const Tensor stem = oracle::random_tensor({c, 3, 3, 3}, rng);
        const Tensor img = oracle::random_tensor({2, 3, 8, 8}, rng);
        const auto got = conv2d(img, stem, {.padding = 1});
        const auto want = oracle::conv2d(img, stem, 1, 1, 1, 1);
        for (std::size_t i = 0; i < want.size(); ++i) conv_err = std::max(conv_err, std::abs(got[i] - want[i]));
    }
    v.expect(conv_err < 1e-5, fmt::format("conv max abs err {:.3g}", conv_err));
    v.expect(pool_err < 1e-5, fmt::format("pool max abs err {:.3g}", pool_err));

    // complexity against explicit enumeration of per-node T-subsets.
    const auto per_node = oracle::subsets(3, 2);
    std::set<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> graphs;
    for (const auto& a : per_node)
        for (const auto& b : per_node) graphs.insert({a, b});
    const auto small = complexity_count(5, 3, 2, 1);
    v.expect(graphs.size() == 9 && small.exact == "9", fmt::format("enumeration {} vs count {}", graphs.size(), small.exact));

    v.note(fmt::format("topk 200 draws x2, discretize 200 draws, conv err {:.1e}, pool err {:.1e}, M5K3T2L1 = {}",
                       conv_err, pool_err, small.exact));
    return v;
}

struct RunOutcome {
    fs::path dir;
    RunConfig config;
    RunSummary summary;
    double seconds = 0;
    bool ok = false;
    std::string error;
};

RunOutcome run_pipeline(RunConfig config, const fs::path& dir) {
    RunOutcome r;
    r.dir = dir;
    fs::remove_all(dir);
    config.out_dir = dir.string();
    r.config = config;
    progress() << "acceptance: run_all into " << dir << "\n";
    const auto start = Clock::now();
    try {
        PipelineOptions opts;
        opts.log = &progress();
        r.summary = cmd_run_all(config, opts);
        r.ok = true;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    r.seconds = seconds_since(start);
    return r;
}

std::string slurp(const fs::path& p) { return fs::exists(p) ? read_file(p) : std::string(); }

struct ChecksumRow {
    std::size_t epoch = 0;
    bool gate_g = false;
    std::uint64_t sum = 0;
};

std::pair<std::uint64_t, std::vector<ChecksumRow>> read_checksums(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string tag, hex;
    in >> tag >> hex;
    if (tag != "start") throw std::runtime_error("wg_checksums.txt: missing start line");
    const std::uint64_t start = std::stoull(hex, nullptr, 16);
    std::vector<ChecksumRow> rows;
    ChecksumRow r;
    int g = 0;
    while (in >> r.epoch >> g >> hex) {
        r.gate_g = g != 0;
        r.sum = std::stoull(hex, nullptr, 16);
        rows.push_back(r);
    }
    return {start, rows};
}

// w_G may change at epoch e only if e lies in the window; inside the window it must change.
void check_gate_discipline(Verdict& v, const RunOutcome& run, const std::string& label) {
    const auto [start, rows] = read_checksums(run.dir / "wg_checksums.txt");
    v.expect(rows.size() == run.config.i_total - run.config.i_train, label + ": checksum rows per Stage-2 epoch");
    std::uint64_t prev = start;
    for (const auto& r : rows) {
        const bool in_window = r.epoch >= run.config.cross_start && r.epoch < run.config.cross_end;
        v.expect(r.gate_g == in_window, fmt::format("{}: epoch {} gate_G flag {}", label, r.epoch, r.gate_g));
        if (in_window) {
            v.expect(r.sum != prev, fmt::format("{}: w_G unchanged inside the window at epoch {}", label, r.epoch));
        } else {
            v.expect(r.sum == prev, fmt::format("{}: w_G changed outside the window at epoch {}", label, r.epoch));
        }
        prev = r.sum;
    }
}

Verdict criterion_invariants(const RunOutcome& a) {
    Verdict v;
    Rng rng(9, "acceptance/invariants");
    double worst_softmax = 0;
    for (int i = 0; i < 200; ++i) {
        Tensor x({4, 8});
        for (auto& e : x.mutable_data()) e = rng.uniform(-50, 50);
        const Tensor p = softmax(x, 1);
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 8; ++c) s += p[r * 8 + c];
            worst_softmax = std::max(worst_softmax, std::abs(s - 1));
        }
        const Tensor q = encode_cell_probabilities(oracle::random_tensor({24}, rng, 10));
        double s = 0;
        for (double e : q.data()) s += e;
        worst_softmax = std::max(worst_softmax, std::abs(s - 1));
    }
    v.expect(worst_softmax < 1e-6, fmt::format("softmax normalization error {:.3g}", worst_softmax));

    const auto spaces = spaces_from_text(slurp(a.dir / "spaces.txt"));
    v.expect(spaces.size() == 2, "derived spaces: expected normal and reduce");
    for (const auto& sp : spaces) {
        for (std::size_t j = 2; j + 1 < sp.num_nodes(); ++j) {
            const auto ns = sp.node_slots(j);
            v.expect(ns.size() == a.config.k, fmt::format("node {} holds {} slots", j, ns.size()));
            for (const Slot& s : ns) {
                v.expect(s.op != OperationKind::zero, "zero op in a derived space");
                v.expect(s.node == j && s.source < j, "slot outside its node");
            }
        }
    }

    const CellSpec cell{a.config.num_nodes};
    std::vector<IntensiveSpace> random;
    for (int i = 0; i < 20; ++i) {
        std::vector<Tensor> alpha;
        for (std::size_t e = 0; e < cell.num_edges(); ++e) alpha.push_back(oracle::random_tensor({8}, rng));
        random.push_back(select_topk_ops(alpha, cell, a.config.k));
    }
    for (const auto& x : random) {
        v.expect(stability(x, x) == 1.0, "stability identity");
        for (const auto& y : random) {
            const double s = stability(x, y);
            v.expect(s >= 0 && s <= 1 && s == stability(y, x), "stability bounds/symmetry");
        }
    }
    const std::vector<IntensiveSpace> same(3, random[0]);
    const std::vector<double> perfect(3, 1.0);
    v.expect(superiority(same, perfect, 2, 2) == 1.0, "superiority saturation case");

    const auto arch = DiscreteArchitecture::from_text(slurp(a.dir / "architecture.txt"));
    std::map<std::size_t, std::size_t> per_cell;
    for (const auto& o : arch.ops) ++per_cell[o.cell];
    v.expect(per_cell.size() == a.config.num_cells, "architecture covers every cell");
    for (const auto& [l, n] : per_cell) {
        v.expect(n == (a.config.num_nodes - 3) * a.config.t, fmt::format("cell {} keeps {} ops", l, n));
    }
    for (const auto& o : arch.ops) {
        const bool reduce_cell = a.config.backbone().is_reduction(o.cell);
        const auto& sp = spaces[0].cell_type() == (reduce_cell ? CellType::reduce : CellType::normal) ? spaces[0] : spaces[1];
        v.expect(sp.contains({o.node, o.source, o.op}), "retained op outside the intensive space");
    }

    check_gate_discipline(v, a, "run A");

    std::size_t checkpoints = 0;
    for (const char* stage : {"derive", "train_hyper", "search", "discretize", "evaluate"}) {
        const fs::path p = a.dir / fmt::format("{}.ckpt", stage);
        const std::string bytes = slurp(p);
        const Checkpoint ck = Checkpoint::from_bytes(bytes);
        const fs::path copy = a.dir / fmt::format("{}.roundtrip", stage);
        ck.save(copy);
        v.expect(slurp(copy) == bytes, fmt::format("{} checkpoint round trip differs", stage));
        fs::remove(copy);
        ++checkpoints;
    }
    v.note(fmt::format("softmax err {:.1e}, {} derived spaces, {} ops/cell, {} Stage-2 checksums, {} checkpoints round-tripped",
                       worst_softmax, spaces.size(), (a.config.num_nodes - 3) * a.config.t,
                       a.config.i_total - a.config.i_train, checkpoints));
    return v;
}

Verdict criterion_end_to_end(const RunOutcome& a) {
    Verdict v;
    v.expect(a.ok, "run_all failed: " + a.error);
    if (!a.ok) return v;
    const double chance = 1.0 / static_cast<double>(a.config.num_classes);
    v.expect(a.seconds < 1800, fmt::format("runtime {:.0f}s >= 1800s", a.seconds));
    const auto stage1 = metrics_from_csv(slurp(a.dir / "train_hyper.csv"));
    v.expect(!stage1.empty() && stage1.back().train_loss < stage1.front().train_loss,
             "Stage 1 final epoch loss not below first epoch loss");
    v.expect(a.summary.search_best_val_acc > chance + 0.15,
             fmt::format("Stage 2 best val acc {:.4f} <= {:.4f}", a.summary.search_best_val_acc, chance + 0.15));
    v.expect(a.summary.evaluation.test_acc > chance + 0.15,
             fmt::format("no-finetune test acc {:.4f} <= {:.4f}", a.summary.evaluation.test_acc, chance + 0.15));
    v.note(fmt::format("{:.0f}s, stage-1 loss {:.4f} -> {:.4f}, search best val {:.4f} (epoch {}), no-finetune val {:.4f} "
                       "test {:.4f}, chance {:.2f}",
                       a.seconds, stage1.front().train_loss, stage1.back().train_loss, a.summary.search_best_val_acc,
                       a.summary.search_best_epoch, a.summary.evaluation.val_acc, a.summary.evaluation.test_acc, chance));
    return v;
}

Verdict criterion_determinism(const RunOutcome& a, const RunOutcome& b) {
    Verdict v;
    v.expect(a.ok && b.ok, "a pipeline run failed");
    std::size_t compared = 0;
    for (const char* name : {"architecture.txt", "derive.csv", "train_hyper.csv", "search.csv", "spaces.txt",
                             "wg_checksums.txt", "evaluation.txt"}) {
        const std::string x = slurp(a.dir / name), y = slurp(b.dir / name);
        v.expect(!x.empty() && x == y, fmt::format("{} differs between runs", name));
        ++compared;
    }
    v.note(fmt::format("{} artifacts byte-identical across two runs", compared));
    return v;
}

std::string w_g_bytes(const fs::path& ckpt) { return Checkpoint::load(ckpt).get("w_G"); }

Verdict criterion_ablation(const RunOutcome& a, const RunOutcome& c, const fs::path& work) {
    Verdict v;
    v.expect(a.ok && c.ok, "a pipeline run failed: " + a.error + c.error);
    if (!a.ok || !c.ok) return v;
    check_gate_discipline(v, a, "with window");
    check_gate_discipline(v, c, "without window");
    v.expect(w_g_bytes(a.dir / "train_hyper.ckpt") != w_g_bytes(a.dir / "search.ckpt"),
             "with window: w_G identical to Stage 1");
    v.expect(w_g_bytes(c.dir / "train_hyper.ckpt") == w_g_bytes(c.dir / "search.ckpt"),
             "without window: w_G differs from Stage 1");

    const auto with = metrics_from_csv(slurp(a.dir / "search.csv"));
    const auto without = metrics_from_csv(slurp(c.dir / "search.csv"));
    v.expect(with.size() == without.size() && !with.empty(), "traces differ in length");
    std::string side = "epoch,val_acc_with_window,val_acc_without_window,loss_with_window,loss_without_window\n";
    for (std::size_t i = 0; i < std::min(with.size(), without.size()); ++i) {
        side += fmt::format("{},{},{},{},{}\n", with[i].epoch, with[i].val_acc, without[i].val_acc, with[i].train_loss,
                            without[i].train_loss);
    }
    write_file(work / "ablation.csv", side);
    v.note(fmt::format("best val with window {:.4f}, without {:.4f}; traces in {}", a.summary.search_best_val_acc,
                       c.summary.search_best_val_acc, (work / "ablation.csv").string()));
    return v;
}

void report(int id, const std::string& title, const Verdict& v, bool& all_pass) {
    all_pass = all_pass && v.pass;
    std::string detail;
    for (const auto& n : v.notes) detail += (detail.empty() ? "" : "; ") + n;
    fmt::print("{} criterion {}: {}{}\n", v.pass ? "PASS" : "FAIL", id, title, detail.empty() ? "" : " (" + detail + ")");
    for (std::size_t i = 0; i < std::min<std::size_t>(v.failures.size(), 10); ++i) fmt::print("    - {}\n", v.failures[i]);
    if (v.failures.size() > 10) fmt::print("    - ... {} more\n", v.failures.size() - 10);
}

Verdict guarded(const std::function<Verdict()>& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        Verdict v;
        v.expect(false, std::string("exception: ") + e.what());
        return v;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks for the hypernas pipeline"};
    std::string work_dir = "acceptance_runs";
    std::string config_path;
    app.add_option("--work-dir", work_dir, "Scratch directory for the pipeline runs");
    app.add_option("--config", config_path, "Desk-scale reference config")->required()->check(CLI::ExistingFile);
    CLI11_PARSE(app, argc, argv);

    const RunConfig config = load_config(config_path);
    const fs::path work(work_dir);
    fs::create_directories(work);

    const Verdict c1 = guarded(criterion_complexity);
    const Verdict c4 = guarded(criterion_oracles);
    progress() << "acceptance: gradient check\n";
    const Verdict c2 = guarded([&] { return criterion_gradients(config); });

    const RunOutcome run_a = run_pipeline(config, work / "run_a");
    const RunOutcome run_b = run_pipeline(config, work / "run_b");
    RunConfig no_window = config;
    no_window.cross_start = no_window.cross_end = no_window.i_total;
    const RunOutcome run_c = run_pipeline(no_window, work / "run_c");

    const Verdict c3 = guarded([&] {
        if (!run_a.ok) throw std::runtime_error(run_a.error);
        return criterion_invariants(run_a);
    });
    const Verdict c5 = guarded([&] { return criterion_end_to_end(run_a); });
    const Verdict c6 = guarded([&] { return criterion_determinism(run_a, run_b); });
    const Verdict c7 = guarded([&] { return criterion_ablation(run_a, run_c, work); });

    bool all_pass = true;
    report(1, "complexity reproduction", c1, all_pass);
    report(2, "gradient fidelity", c2, all_pass);
    report(3, "invariant suite", c3, all_pass);
    report(4, "oracle equivalence", c4, all_pass);
    report(5, "end-to-end desk pipeline", c5, all_pass);
    report(6, "determinism", c6, all_pass);
    report(7, "cross-search ablation", c7, all_pass);
    return all_pass ? 0 : 1;
}
