#pragma once

// Reconstruction-error analysis of pruning versus folding.
//
// For a weight matrix W and magnitude criterion, with W_p^(k) the k-row
// magnitude pruning, W'_f the singleton fold built from it (k + 1 clusters)
// and W*_f a k-means fold:
//
//   ||W - W_p^(k)||^2  >=  ||W - W'_f^(k+1)||^2  >=  ||W - W*_f^(k+1)||^2
//
// holds for every k in [0, m-1] (with W*_f globally optimal, or any fold that
// Hartigan reaches from W'_f since Hartigan never increases the objective).
// The rank-slack quantities compare the gain of one extra pruned row
// (delta_rank) with the gain of folding at the same rank (delta_method).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "compress.hpp"
#include "error.hpp"
#include "kmeans.hpp"
#include "matrix.hpp"
#include "norms.hpp"
#include "projection.hpp"

namespace foldkit {

inline constexpr double kChainRelTol = 1e-9;

// Slack allowed in each link of the chain: rel_tol * max(1, err_prune_sq).
// A negative rel_tol demands a strict margin instead.
inline double chain_tolerance(double err_prune_sq, double rel_tol = kChainRelTol) {
    return rel_tol * std::max(1.0, err_prune_sq);
}

inline double prune_error_sq(const Matrix& w, const PruneSelection& sel) {
    return recon_error_sq(w, prune_rows_masked(sel, w));
}

// sum_{pruned i} w_i^T w_i - n_pruned * mu^T mu, mu the mean of the pruned
// rows. Independent of fold_rows(); used to cross-check the singleton fold.
inline double singleton_fold_error_closed_form(const Matrix& w, const PruneSelection& sel) {
    const auto pruned = sel.pruned();
    if (pruned.empty()) return 0.0;
    std::vector<double> mu(w.cols(), 0.0);
    CompensatedSum energy;
    for (auto i : pruned) {
        const auto r = w.row(i);
        for (std::size_t c = 0; c < r.size(); ++c) {
            mu[c] += r[c];
            energy += r[c] * r[c];
        }
    }
    const double n = static_cast<double>(pruned.size());
    CompensatedSum mu_sq;
    for (double& v : mu) {
        v /= n;
        mu_sq += v * v;
    }
    return energy.value() - n * mu_sq.value();
}

// (||W - W_p^(k)||_F - ||W - W_p^(k+1)||_F) / ||W||_F, 0 for W = 0.
inline double delta_rank(const Matrix& w, MagnitudeCriterion crit, std::size_t k) {
    if (k + 1 > w.rows()) {
        throw Error(ErrorKind::invalid_budget,
                    "delta_rank needs k <= m-1, got k=" + std::to_string(k));
    }
    const double norm = frobenius(w);
    if (norm == 0.0) return 0.0;
    const auto order = magnitude_order(w, crit);
    const double e0 = std::sqrt(prune_error_sq(w, select_prefix(order, k)));
    const double e1 = std::sqrt(prune_error_sq(w, select_prefix(order, k + 1)));
    return (e0 - e1) / norm;
}

// (||W - W_p^(k)||_F - ||W - W*_f^(k)||_F) / ||W||_F at matched rank k.
// Reported, never asserted for sign.
inline double delta_method(const Matrix& w, MagnitudeCriterion crit, std::size_t k,
                           const FoldOptions& fold) {
    if (k < 1 || k > w.rows()) {
        throw Error(ErrorKind::invalid_budget,
                    "delta_method needs 1 <= k <= m, got k=" + std::to_string(k));
    }
    const double norm = frobenius(w);
    if (norm == 0.0) return 0.0;
    const double e_prune = std::sqrt(prune_error_sq(w, magnitude_select(w, k, crit)));
    const auto a = optimal_fold_result(w, k, fold).assignment;
    const double e_fold = std::sqrt(recon_error_sq(w, fold_rows(a, w)));
    return (e_prune - e_fold) / norm;
}

inline double delta_method(const Matrix& w, MagnitudeCriterion crit, std::size_t k,
                           std::uint64_t seed, bool exact) {
    return delta_method(w, crit, k, FoldOptions{seed, exact});
}

struct TheoremVerdict {
    std::size_t k_p = 0;
    double err_prune_sq = 0.0;      // rank k_p
    double err_singleton_sq = 0.0;  // rank k_p + 1
    double err_fold_sq = 0.0;       // rank k_p + 1
    bool singleton_ok = false;      // err_prune >= err_singleton - tol
    bool fold_ok = false;           // err_singleton >= err_fold - tol

    bool ok() const noexcept { return singleton_ok && fold_ok; }
};

struct VerifyOptions {
    bool exact = false;
    std::uint64_t seed = 0;  // unused: the warm start is deterministic
    std::size_t max_sweeps = kDefaultMaxSweeps;
    std::size_t rank_stride = 1;  // check k_p = 0, stride, 2*stride, ...
    double rel_tol = kChainRelTol;
};

// Checks the pruning/singleton-fold/optimal-fold chain at every checked k_p.
// With exact = false the fold side is Hartigan warm-started from the
// singleton assignment, which can only lower the singleton error.
inline std::vector<TheoremVerdict> verify_theorems(const Matrix& w, MagnitudeCriterion crit,
                                                   const VerifyOptions& opt) {
    const std::size_t m = w.rows();
    if (opt.exact && m > kExactMaxRows) {
        throw Error(ErrorKind::instance_too_large,
                    "exact verification needs m <= " + std::to_string(kExactMaxRows) +
                        ", got m=" + std::to_string(m));
    }
    const std::size_t stride = std::max<std::size_t>(1, opt.rank_stride);
    const auto order = magnitude_order(w, crit);
    std::vector<TheoremVerdict> verdicts;
    for (std::size_t k_p = 0; k_p < m; k_p += stride) {
        const auto sel = select_prefix(order, k_p);
        const auto single = singleton_fold(sel);
        TheoremVerdict v;
        v.k_p = k_p;
        v.err_prune_sq = prune_error_sq(w, sel);
        v.err_singleton_sq = recon_error_sq(w, fold_rows(single, w));
        const auto fold = opt.exact ? kmeans_exact(w, k_p + 1)
                                    : hartigan_from(w, single, opt.max_sweeps);
        v.err_fold_sq = recon_error_sq(w, fold_rows(fold.assignment, w));
        const double tol = chain_tolerance(v.err_prune_sq, opt.rel_tol);
        v.singleton_ok = v.err_prune_sq + tol >= v.err_singleton_sq;
        v.fold_ok = v.err_singleton_sq + tol >= v.err_fold_sq;
        verdicts.push_back(v);
    }
    return verdicts;
}

inline std::vector<TheoremVerdict> verify_theorems(const Matrix& w, MagnitudeCriterion crit,
                                                   bool exact, std::uint64_t seed) {
    return verify_theorems(w, crit, VerifyOptions{exact, seed});
}

inline std::string describe_violation(const std::string& layer, const TheoremVerdict& v) {
    char buf[512];
    if (!v.singleton_ok) {
        std::snprintf(buf, sizeof buf,
                      "theorem violation: layer=%s k=%zu prune(k)=%.17g < singleton(k+1)=%.17g",
                      layer.c_str(), v.k_p, v.err_prune_sq, v.err_singleton_sq);
    } else {
        std::snprintf(buf, sizeof buf,
                      "theorem violation: layer=%s k=%zu singleton(k+1)=%.17g < fold(k+1)=%.17g",
                      layer.c_str(), v.k_p, v.err_singleton_sq, v.err_fold_sq);
    }
    return buf;
}

struct SweepRow {
    std::size_t k = 0;
    double err_prune_sq = 0.0;      // pruning to k rows
    double err_singleton_sq = 0.0;  // singleton fold, k + 1 clusters
    double err_optfold_sq = 0.0;    // k-means fold, k + 1 clusters
    double rel_prune = 0.0;
    double rel_singleton = 0.0;
    double rel_optfold = 0.0;
    double delta_rank = 0.0;
    double delta_method = 0.0;
    bool chain_ok = false;
};

struct RankSweepReport {
    std::string layer_name;
    MagnitudeCriterion criterion = MagnitudeCriterion::l2;
    double frob_norm_sq = 0.0;
    std::vector<SweepRow> rows;  // k = 0 .. m-1
};

// One row per k in [0, m-1]. The k-means fold at rank r is the exact optimum
// when `exact`, otherwise the better of (a) Hartigan warm-started from the
// singleton fold of the (r-1)-row pruning and (b) seeded Hartigan; (a) keeps
// the chain guaranteed. delta_method at k = 0 is 0: both rank-0 projections
// are the zero map.
inline RankSweepReport sweep_report(const Matrix& w, MagnitudeCriterion crit, const FoldOptions& fold,
                                    std::string layer_name = "layer") {
    const std::size_t m = w.rows();
    if (fold.exact && m > kExactMaxRows) {
        throw Error(ErrorKind::instance_too_large,
                    "exact sweep needs m <= " + std::to_string(kExactMaxRows) + ", got m=" +
                        std::to_string(m));
    }
    RankSweepReport report;
    report.layer_name = std::move(layer_name);
    report.criterion = crit;
    report.frob_norm_sq = frobenius_sq(w);
    const double norm_sq = report.frob_norm_sq;
    const double norm = std::sqrt(norm_sq);

    const auto order = magnitude_order(w, crit);
    std::vector<double> prune(m + 1), single(m), opt(m + 1, 0.0);
    for (std::size_t k = 0; k <= m; ++k) prune[k] = prune_error_sq(w, select_prefix(order, k));
    for (std::size_t k = 0; k < m; ++k) {
        const auto a = singleton_fold(select_prefix(order, k));
        single[k] = recon_error_sq(w, fold_rows(a, w));
        const std::size_t r = k + 1;
        if (fold.exact) {
            opt[r] = kmeans_exact(w, r).wcss;
        } else {
            const auto warm = hartigan_from(w, a, fold.max_sweeps);
            const auto seeded = kmeans_hartigan(w, r, fold.seed, fold.max_sweeps, fold.restarts);
            const auto& best = seeded.wcss < warm.wcss ? seeded : warm;
            opt[r] = recon_error_sq(w, fold_rows(best.assignment, w));
        }
    }

    auto rel = [&](double e) { return norm_sq > 0.0 ? e / norm_sq : 0.0; };
    for (std::size_t k = 0; k < m; ++k) {
        SweepRow row;
        row.k = k;
        row.err_prune_sq = prune[k];
        row.err_singleton_sq = single[k];
        row.err_optfold_sq = opt[k + 1];
        row.rel_prune = rel(prune[k]);
        row.rel_singleton = rel(single[k]);
        row.rel_optfold = rel(opt[k + 1]);
        if (norm > 0.0) {
            row.delta_rank = (std::sqrt(prune[k]) - std::sqrt(prune[k + 1])) / norm;
            row.delta_method = k == 0 ? 0.0 : (std::sqrt(prune[k]) - std::sqrt(opt[k])) / norm;
        }
        const double tol = chain_tolerance(prune[k]);
        row.chain_ok = prune[k] + tol >= single[k] && single[k] + tol >= opt[k + 1];
        report.rows.push_back(row);
    }
    return report;
}

inline RankSweepReport sweep_report(const Matrix& w, MagnitudeCriterion crit, std::uint64_t seed,
                                    bool exact, std::string layer_name = "layer") {
    return sweep_report(w, crit, FoldOptions{seed, exact}, std::move(layer_name));
}

// ---- CSV --------------------------------------------------------------------

inline constexpr std::string_view kSweepCsvHeader =
    "layer,k,crit,err_prune_sq,err_singleton_sq,err_optfold_sq,rel_prune,rel_singleton,"
    "rel_optfold,delta_rank,delta_method,chain_ok";

struct SweepCsvRecord {
    std::string layer;
    std::string crit;
    SweepRow row;
};

namespace csv_detail {

inline std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw Error(ErrorKind::format, "bad number '" + s + "' in sweep CSV");
    }
    if (used != s.size()) throw Error(ErrorKind::format, "bad number '" + s + "' in sweep CSV");
    return v;
}

}  // namespace csv_detail

inline std::string to_csv(const RankSweepReport& report, bool with_header = true) {
    using csv_detail::fmt;
    std::string out;
    if (with_header) {
        out += kSweepCsvHeader;
        out += '\n';
    }
    const std::string layer = csv_detail::quote(report.layer_name);
    const char* crit = to_string(report.criterion);
    for (const auto& r : report.rows) {
        out += layer + ',' + std::to_string(r.k) + ',' + crit + ',' + fmt(r.err_prune_sq) + ',' +
               fmt(r.err_singleton_sq) + ',' + fmt(r.err_optfold_sq) + ',' + fmt(r.rel_prune) +
               ',' + fmt(r.rel_singleton) + ',' + fmt(r.rel_optfold) + ',' + fmt(r.delta_rank) +
               ',' + fmt(r.delta_method) + ',' + (r.chain_ok ? "true" : "false") + '\n';
    }
    return out;
}

inline std::vector<SweepCsvRecord> parse_sweep_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kSweepCsvHeader) {
        throw Error(ErrorKind::format, "sweep CSV header mismatch");
    }
    std::vector<SweepCsvRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = csv_detail::split(line);
        if (f.size() != 12) {
            throw Error(ErrorKind::format, "sweep CSV row has " + std::to_string(f.size()) + " fields");
        }
        SweepCsvRecord rec;
        rec.layer = f[0];
        const double k = csv_detail::parse_double(f[1]);
        if (k < 0 || k != std::floor(k)) throw Error(ErrorKind::format, "bad k '" + f[1] + "'");
        rec.row.k = static_cast<std::size_t>(k);
        rec.crit = f[2];
        double* dst[] = {&rec.row.err_prune_sq, &rec.row.err_singleton_sq, &rec.row.err_optfold_sq,
                         &rec.row.rel_prune,    &rec.row.rel_singleton,    &rec.row.rel_optfold,
                         &rec.row.delta_rank,   &rec.row.delta_method};
        for (std::size_t n = 0; n < 8; ++n) *dst[n] = csv_detail::parse_double(f[3 + n]);
        if (f[11] != "true" && f[11] != "false") {
            throw Error(ErrorKind::format, "chain_ok must be true/false");
        }
        rec.row.chain_ok = f[11] == "true";
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace foldkit
