// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <foldkit/foldkit.hpp>

#include "test_support.hpp"

namespace {

using namespace foldkit;
namespace fs = std::filesystem;

struct Outcome {
    bool pass = true;
    std::string detail;
    std::vector<std::string> failures;

    void check(bool ok, const std::string& what) {
        if (ok) return;
        pass = false;
        if (failures.size() < 5) failures.push_back(what);
    }
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool chain_holds(const TheoremVerdict& v) {
    const double tol = 1e-9 * std::max(1.0, v.err_prune_sq);
    return v.err_prune_sq + tol >= v.err_singleton_sq && v.err_singleton_sq + tol >= v.err_fold_sq;
}

Outcome ac1_exact_chain() {
    Outcome o;
    Rng rng(1001);
    std::size_t verdicts = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t m = 2 + rng.below(9), p = 1 + rng.below(16);
        const Matrix w = random_uniform(m, p, rng);
        for (auto crit : {MagnitudeCriterion::l1, MagnitudeCriterion::l2}) {
            const auto vs = verify_theorems(w, crit, true, 0);
            o.check(vs.size() == m, fmt("matrix %d: %zu verdicts for m=%zu", t, vs.size(), m));
            for (const auto& v : vs) {
                ++verdicts;
                // The fold side must be the exhaustive optimum, not a local one.
                const double exact = kmeans_exact(w, v.k_p + 1).wcss;
                o.check(std::fabs(v.err_fold_sq - exact) <= 1e-9 * std::max(1.0, exact),
                        fmt("matrix %d k_p=%zu fold error is not the exact optimum", t, v.k_p));
                o.check(chain_holds(v), describe_violation("matrix " + std::to_string(t), v));
            }
        }
    }
    o.detail = fmt("%zu verdicts over 200 matrices x 2 criteria", verdicts);
    return o;
}

Outcome ac2_warm_start_chain() {
    Outcome o;
    Rng rng(2002);
    std::size_t verdicts = 0;
    VerifyOptions opt;
    opt.exact = false;
    opt.rank_stride = 8;
    for (int t = 0; t < 50; ++t) {
        const std::size_t m = 64 + rng.below(512 - 64 + 1);
        const std::size_t p = 32 + rng.below(256 - 32 + 1);
        const Matrix w = random_uniform(m, p, rng);
        const auto crit = t % 2 == 0 ? MagnitudeCriterion::l2 : MagnitudeCriterion::l1;
        for (const auto& v : verify_theorems(w, crit, opt)) {
            ++verdicts;
            o.check(chain_holds(v), describe_violation("matrix " + std::to_string(t), v));
        }
    }
    o.detail = fmt("%zu verdicts over 50 matrices, every 8th rank", verdicts);
    return o;
}

Outcome ac3_closed_form() {
    Outcome o;
    Rng rng(3003);
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
        const std::size_t m = 1 + rng.below(48), p = 1 + rng.below(24);
        const Matrix w = random_uniform(m, p, rng);
        const auto sel = magnitude_select(w, rng.below(m), t % 2 ? MagnitudeCriterion::l1
                                                                  : MagnitudeCriterion::l2);
        const double direct = recon_error_sq(w, fold_rows(singleton_fold(sel), w));
        const double closed = singleton_fold_error_closed_form(w, sel);
        const double rel = std::fabs(direct - closed) / std::max(1.0, std::fabs(direct));
        worst = std::max(worst, rel);
        o.check(rel <= 1e-9, fmt("case %d: direct %.17g closed %.17g", t, direct, closed));
    }
    o.detail = fmt("500 cases, worst relative gap %.3e", worst);
    return o;
}

Outcome ac4_fold_equals_wcss() {
    Outcome o;
    Rng rng(4004);
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
        const std::size_t m = 1 + rng.below(64), p = 1 + rng.below(24);
        const Matrix w = random_uniform(m, p, rng);
        const std::size_t k = 1 + rng.below(m);
        const ClusterAssignment a(testing::random_labels(m, k, rng), k);
        const double err = recon_error_sq(w, fold_rows(a, w));
        const double oracle = testing::direct_wcss(w, a.labels(), k);
        const double rel = std::max(std::fabs(err - oracle), std::fabs(err - wcss(a, w))) /
                           std::max(1.0, std::fabs(oracle));
        worst = std::max(worst, rel);
        o.check(rel <= 1e-9, fmt("pair %d: fold error %.17g wcss %.17g", t, err, oracle));
    }
    o.detail = fmt("500 pairs, worst relative gap %.3e", worst);
    return o;
}

Outcome ac5_projection_axioms() {
    Outcome o;
    Rng rng(5005);
    double worst = 0.0;
    auto check = [&](const ProjectionMatrix& c, const char* kind, int t) {
        const double bound = 1e-10 * std::max(1.0, std::sqrt(frobenius_sq(c.matrix())));
        const double res = std::max(c.symmetry_residual(), c.idempotence_residual());
        worst = std::max(worst, res);
        o.check(res <= bound, fmt("%s basis %d: residual %.3e > %.3e", kind, t, res, bound));
    };
    for (int t = 0; t < 500; ++t) {
        const std::size_t m = 1 + rng.below(64);
        const PruneSelection sel(testing::random_subset(m, rng), m);
        const auto cp = prune_projection(sel);
        check(cp, "prune", t);
        o.check(max_abs_diff(cp.matrix(), testing::generic_projection(prune_basis(sel))) <= 1e-10,
                fmt("prune basis %d differs from U(U^T U)^-1 U^T", t));
        const std::size_t k = 1 + rng.below(m);
        const ClusterAssignment a(testing::random_labels(m, k, rng), k);
        const auto cf = fold_projection(a);
        check(cf, "fold", t);
        o.check(max_abs_diff(cf.matrix(), testing::generic_projection(fold_basis(a))) <= 1e-10,
                fmt("fold basis %d differs from U(U^T U)^-1 U^T", t));
    }
    o.detail = fmt("500 prune + 500 fold bases, worst residual %.3e", worst);
    return o;
}

Outcome ac6_hartigan() {
    Outcome o;
    Rng rng(6006);
    std::size_t sweeps = 0;
    double worst_gap = 0.0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t m = 1 + rng.below(10), p = 1 + rng.below(8);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(m, 4));
        const Matrix w = random_uniform(m, p, rng);
        const auto h = kmeans_hartigan(w, k, rng.below(1u << 30));
        for (std::size_t i = 1; i < h.wcss_history.size(); ++i) {
            ++sweeps;
            o.check(h.wcss_history[i] <= h.wcss_history[i - 1],
                    fmt("draw %d sweep %zu: wcss rose %.17g -> %.17g", t, i, h.wcss_history[i - 1],
                        h.wcss_history[i]));
        }
        const auto e = kmeans_exact(w, k);
        worst_gap = std::max(worst_gap, e.wcss - h.wcss);
        o.check(e.wcss <= h.wcss + 1e-9, fmt("draw %d: exact %.17g > hartigan %.17g", t, e.wcss, h.wcss));
        const auto oracle = testing::brute_force_kmeans(w, k);
        o.check(std::fabs(e.wcss - oracle.wcss) <= 1e-9 * std::max(1.0, oracle.wcss),
                fmt("draw %d: exact %.17g vs brute force %.17g", t, e.wcss, oracle.wcss));
    }
    o.detail = fmt("200 draws, %zu sweeps checked, max(exact - hartigan) %.3e", sweeps, worst_gap);
    return o;
}

Outcome ac7_merge_equivalence() {
    Outcome o;
    Rng rng(7007);
    double worst_fold = 0.0, worst_prune = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 1 + rng.below(32), h = 1 + rng.below(64), c = 1 + rng.below(16);
        const auto net = random_mlp({d, h, c}, 9000 + t);
        const Matrix x = random_uniform(1 + rng.below(64), d, rng);
        const std::size_t k = 1 + rng.below(h);
        const ClusterAssignment a(testing::random_labels(h, k, rng), k);
        const double fd = fold_equivalence_check(net, 0, a, x);
        worst_fold = std::max(worst_fold, fd);
        o.check(fd <= 1e-9, fmt("triple %d: fold deviation %.3e", t, fd));

        const PruneSelection sel(testing::random_subset(h, rng), h);
        const double pd = prune_equivalence_check(net, 0, sel, x);
        worst_prune = std::max(worst_prune, pd);
        o.check(pd <= 1e-12, fmt("triple %d: prune deviation %.3e", t, pd));
        // Dropped-column algebra: the retained entries are copied bit for bit.
        const auto pair = prune_drop_pair(net.layers[0], net.layers[1], sel);
        for (std::size_t r = 0; r < sel.rank(); ++r) {
            const auto src = sel.retained()[r];
            for (std::size_t col = 0; col < d; ++col) {
                o.check(pair.layer(r, col) == net.layers[0](src, col), fmt("triple %d: layer copy", t));
            }
            for (std::size_t row = 0; row < c; ++row) {
                o.check(pair.next(row, r) == net.layers[1](row, src), fmt("triple %d: next copy", t));
            }
        }
    }
    o.detail = fmt("100 triples, worst fold %.3e, worst prune %.3e", worst_fold, worst_prune);
    return o;
}

Outcome ac8_delta_rank() {
    Outcome o;
    Rng rng(8008);
    double lowest = 0.0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t m = 1 + rng.below(40), p = 1 + rng.below(20);
        const Matrix w = random_uniform(m, p, rng);
        for (auto crit : {MagnitudeCriterion::l1, MagnitudeCriterion::l2}) {
            for (std::size_t k = 0; k < m; ++k) {
                const double d = delta_rank(w, crit, k);
                lowest = std::min(lowest, d);
                o.check(d >= -1e-12, fmt("matrix %d k=%zu: delta_rank %.3e", t, k, d));
            }
        }
    }
    o.detail = fmt("200 matrices, all ranks, min delta_rank %.3e", lowest);
    return o;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome ac9_rank_slack_report() {
    Outcome o;
    Rng rng(9009);
    std::vector<double> methods, ranks;
    for (int t = 0; t < 20; ++t) {
        const Matrix w = random_uniform(64, 128, rng);
        const std::size_t k = 32;
        ranks.push_back(delta_rank(w, MagnitudeCriterion::l2, k));
        methods.push_back(delta_method(w, MagnitudeCriterion::l2, k, FoldOptions{std::uint64_t(t)}));
    }
    const double med_method = median(methods), med_rank = median(ranks);
    const double ratio = med_method / med_rank;
    o.check(std::isfinite(med_method) && std::isfinite(med_rank) && std::isfinite(ratio),
            "non-finite report");
    o.detail = fmt("median delta_method %.4e, median delta_rank %.4e, ratio %.3f (logged only)",
                   med_method, med_rank, ratio);
    return o;
}

int cli_exit(const std::string& args) {
    return testing::run_command(std::string(FOLDKIT_CLI_PATH) + " " + args).exit_code;
}

Outcome ac10_pipeline() {
    Outcome o;
    const auto dir = testing::make_temp_dir("acceptance");
    const auto manifest = testing::write_chain_checkpoint(dir / "in", {12, 10, 8, 4}, 10010);
    const auto input = load_checkpoint(manifest);

    // Library round trip at ratio 1.0, then through disk.
    for (auto method : {CompressionMethod::mag1, CompressionMethod::mag2, CompressionMethod::fold,
                        CompressionMethod::singleton_fold}) {
        CompressionConfig cfg;
        cfg.ratio = 1.0;
        cfg.method = method;
        const auto out_dir = dir / (std::string("lib_") + to_string(method));
        const auto back = load_checkpoint(save_checkpoint(compress_checkpoint(input, cfg).checkpoint, out_dir));
        for (std::size_t i = 0; i < input.weights.size(); ++i) {
            o.check(bitwise_equal(back.weights[i], input.weights[i]),
                    fmt("%s layer %zu not bitwise identical", to_string(method), i));
        }
    }

    // CSV round trip to 15 significant digits.
    Rng rng(10011);
    const auto report = sweep_report(random_uniform(10, 7, rng), MagnitudeCriterion::l1, 5, false, "fc");
    const auto parsed = parse_sweep_csv(to_csv(report));
    o.check(parsed.size() == report.rows.size(), "CSV row count");
    auto same15 = [](double a, double b) { return fmt("%.15g", a) == fmt("%.15g", b); };
    for (std::size_t i = 0; i < std::min(parsed.size(), report.rows.size()); ++i) {
        const auto& a = report.rows[i];
        const auto& b = parsed[i].row;
        o.check(a.k == b.k && a.chain_ok == b.chain_ok && same15(a.err_prune_sq, b.err_prune_sq) &&
                    same15(a.err_singleton_sq, b.err_singleton_sq) &&
                    same15(a.err_optfold_sq, b.err_optfold_sq) && same15(a.rel_prune, b.rel_prune) &&
                    same15(a.rel_singleton, b.rel_singleton) && same15(a.rel_optfold, b.rel_optfold) &&
                    same15(a.delta_rank, b.delta_rank) && same15(a.delta_method, b.delta_method),
                fmt("CSV row %zu differs", i));
    }

    // CLI exit-code matrix: good inputs 0, violations 1, invalid inputs 2.
    const auto zero = testing::write_chain_checkpoint(dir / "zero", {3, 4, 2}, 1, true);
    const auto wide = testing::write_chain_checkpoint(dir / "wide", {4, 100, 2}, 2);
    std::ofstream(dir / "broken.json") << "{ not json";
    const std::string m = manifest.string();
    const std::string d = dir.string();
    struct Case {
        std::string args;
        int expected;
    };
    const std::vector<Case> cases = {
        {"compress --input " + m + " --out " + d + "/c1 --ratio 1.0 --method fold", 0},
        {"compress --input " + m + " --out " + d + "/c2 --ratio 0.5 --method mag2", 0},
        {"sweep --input " + m + " --out " + d + "/s --exact", 0},
        {"verify --input " + m + " --exact", 0},
        {"verify --input " + m, 0},
        {"demo --dims 4,8,3 --k 2 --lipschitz-trials 50", 0},
        {"verify --input " + zero.string() + " --tolerance -1e-9", 1},
        {"compress --input " + m + " --out " + d + "/c3 --ratio 0", 2},
        {"compress --input " + m + " --out " + d + "/c4 --method nope", 2},
        {"sweep --input " + d + "/missing.json --out " + d + "/s2", 2},
        {"verify --input " + d + "/broken.json", 2},
        {"verify --exact --input " + wide.string(), 2},
        {"demo --dims 4,x,3", 2},
        {"unknown-command", 2},
    };
    for (const auto& c : cases) {
        const int got = cli_exit(c.args);
        o.check(got == c.expected, fmt("`foldkit %s` exited %d, expected %d", c.args.c_str(), got, c.expected));
    }
    const auto cli_out = load_checkpoint(dir / "c1" / "manifest.json");
    for (std::size_t i = 0; i < input.weights.size(); ++i) {
        o.check(bitwise_equal(cli_out.weights[i], input.weights[i]),
                fmt("CLI ratio 1.0 layer %zu not bitwise identical", i));
    }
    o.detail = fmt("4 methods bitwise, %zu CSV rows, %zu CLI cases", parsed.size(), cases.size());
    fs::remove_all(dir);
    return o;
}

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double time_limit_s;  // 0 = no stated bound
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"AC1  exact chain prune >= singleton fold >= k-means fold", ac1_exact_chain, 60.0},
        {"AC2  warm-start chain at scale", ac2_warm_start_chain, 120.0},
        {"AC3  singleton-fold closed form", ac3_closed_form, 0.0},
        {"AC4  fold error equals wcss", ac4_fold_equals_wcss, 0.0},
        {"AC5  projection axioms", ac5_projection_axioms, 0.0},
        {"AC6  Hartigan monotone and dominated by exact", ac6_hartigan, 0.0},
        {"AC7  merge and drop functional equivalence", ac7_merge_equivalence, 0.0},
        {"AC8  delta_rank nonnegative", ac8_delta_rank, 0.0},
        {"AC9  rank-slack report", ac9_rank_slack_report, 0.0},
        {"AC10 pipeline round trip and CLI exit codes", ac10_pipeline, 0.0},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.time_limit_s > 0.0 && secs > c.time_limit_s) {
            o.pass = false;
            o.failures.push_back(fmt("took %.1fs, limit %.0fs", secs, c.time_limit_s));
        }
        std::printf("[%s] %s (%.2fs): %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
        for (const auto& f : o.failures) std::printf("       %s\n", f.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
