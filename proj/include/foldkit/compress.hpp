#pragma once

// Layer-level compression: magnitude pruning, singleton folding, k-means
// folding, and the physical shrink of a (layer, next layer) pair.
//
// Pruning drops rows of the layer and the matching columns of its successor.
// Folding replaces the layer rows by cluster means; since the units of one
// cluster then emit identical activations, the successor's columns for that
// cluster are summed into one column and the network function is unchanged.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "checkpoint.hpp"
#include "error.hpp"
#include "kmeans.hpp"
#include "matrix.hpp"
#include "norms.hpp"
#include "projection.hpp"

namespace foldkit {

enum class MagnitudeCriterion { l1, l2 };
enum class CompressionMethod { mag1, mag2, fold, singleton_fold };
enum class RankMode { matched, theorem_slack };

inline const char* to_string(MagnitudeCriterion c) { return c == MagnitudeCriterion::l1 ? "l1" : "l2"; }

inline const char* to_string(CompressionMethod m) {
    switch (m) {
        case CompressionMethod::mag1: return "mag1";
        case CompressionMethod::mag2: return "mag2";
        case CompressionMethod::fold: return "fold";
        case CompressionMethod::singleton_fold: return "singleton-fold";
    }
    return "?";
}

inline const char* to_string(RankMode r) {
    return r == RankMode::matched ? "matched" : "theorem-slack";
}

inline MagnitudeCriterion parse_criterion(std::string_view s) {
    if (s == "l1" || s == "L1") return MagnitudeCriterion::l1;
    if (s == "l2" || s == "L2") return MagnitudeCriterion::l2;
    throw Error(ErrorKind::invalid_config, "unknown criterion '" + std::string(s) + "'");
}

inline CompressionMethod parse_method(std::string_view s) {
    if (s == "mag1") return CompressionMethod::mag1;
    if (s == "mag2") return CompressionMethod::mag2;
    if (s == "fold") return CompressionMethod::fold;
    if (s == "singleton-fold") return CompressionMethod::singleton_fold;
    throw Error(ErrorKind::invalid_config, "unknown method '" + std::string(s) + "'");
}

inline RankMode parse_rank_mode(std::string_view s) {
    if (s == "matched") return RankMode::matched;
    if (s == "theorem-slack") return RankMode::theorem_slack;
    throw Error(ErrorKind::invalid_config, "unknown rank mode '" + std::string(s) + "'");
}

// L1: sum |w|; L2: sum w^2 (squared norm ranks rows identically to the norm).
inline std::vector<double> row_scores(const Matrix& w, MagnitudeCriterion crit) {
    std::vector<double> scores(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double s = 0.0;
        for (double v : w.row(i)) s += crit == MagnitudeCriterion::l1 ? std::fabs(v) : v * v;
        scores[i] = s;
    }
    return scores;
}

// Rows ordered by descending score, lower index first among equal scores.
// Every budget keeps a prefix of this order, so selections are nested.
inline std::vector<std::size_t> magnitude_order(const Matrix& w, MagnitudeCriterion crit) {
    const auto scores = row_scores(w, crit);
    std::vector<std::size_t> order(w.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

inline PruneSelection select_prefix(const std::vector<std::size_t>& order, std::size_t k_p) {
    std::vector<std::size_t> kept(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_p));
    std::sort(kept.begin(), kept.end());
    return PruneSelection(std::move(kept), order.size());
}

inline PruneSelection magnitude_select(const Matrix& w, std::size_t k_p, MagnitudeCriterion crit) {
    if (k_p > w.rows()) {
        throw Error(ErrorKind::invalid_budget, "budget " + std::to_string(k_p) + " exceeds m=" +
                                                   std::to_string(w.rows()));
    }
    return select_prefix(magnitude_order(w, crit), k_p);
}

// All pruned rows share one cluster; each retained row is a singleton.
// k_f = k_p + 1.
inline ClusterAssignment singleton_fold(const PruneSelection& sel) {
    if (sel.rank() >= sel.m()) {
        throw Error(ErrorKind::nothing_pruned,
                    "selection keeps all " + std::to_string(sel.m()) + " rows");
    }
    const std::size_t pruned_label = sel.rank();
    std::vector<std::size_t> labels(sel.m(), pruned_label);
    for (std::size_t r = 0; r < sel.rank(); ++r) labels[sel.retained()[r]] = r;
    return ClusterAssignment(std::move(labels), sel.rank() + 1).canonical();
}

struct FoldOptions {
    std::uint64_t seed = 0;
    bool exact = false;
    std::size_t max_sweeps = kDefaultMaxSweeps;
    std::size_t restarts = 1;
};

inline KMeansResult optimal_fold_result(const Matrix& w, std::size_t k_f, const FoldOptions& opt) {
    if (opt.exact) return kmeans_exact(w, k_f);
    return kmeans_hartigan(w, k_f, opt.seed, opt.max_sweeps, opt.restarts);
}

inline ClusterAssignment optimal_fold(const Matrix& w, std::size_t k_f, std::uint64_t seed,
                                      bool exact) {
    return optimal_fold_result(w, k_f, FoldOptions{seed, exact}).assignment;
}

enum class PairMode { pruned, folded };

struct CompressedLayerPair {
    Matrix layer;  // k_eff x p
    Matrix next;   // q x k_eff
    PairMode mode = PairMode::pruned;
    std::variant<PruneSelection, ClusterAssignment> mapping;

    std::size_t k_eff() const noexcept { return layer.rows(); }
};

// Column j of the result is the sum of the columns of `next` whose index
// falls in cluster j (starting from the first member, so singletons copy).
inline Matrix merge_columns(const Matrix& next, const ClusterAssignment& a) {
    if (next.cols() != a.m()) {
        throw Error(ErrorKind::shape, "next layer has " + std::to_string(next.cols()) +
                                          " inputs but assignment covers " + std::to_string(a.m()));
    }
    Matrix out(next.rows(), a.k());
    std::vector<bool> seen(a.k(), false);
    for (std::size_t i = 0; i < a.m(); ++i) {
        const auto j = a.label(i);
        for (std::size_t r = 0; r < next.rows(); ++r) {
            out(r, j) = seen[j] ? out(r, j) + next(r, i) : next(r, i);
        }
        seen[j] = true;
    }
    return out;
}

inline Matrix select_rows(const Matrix& w, const PruneSelection& sel) {
    if (sel.m() != w.rows()) {
        throw Error(ErrorKind::shape, "selection covers " + std::to_string(sel.m()) +
                                          " rows but layer is " + w.shape_string());
    }
    Matrix out(sel.rank(), w.cols());
    for (std::size_t r = 0; r < sel.rank(); ++r) {
        auto src = w.row(sel.retained()[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

inline Matrix select_columns(const Matrix& next, const PruneSelection& sel) {
    if (next.cols() != sel.m()) {
        throw Error(ErrorKind::shape, "next layer has " + std::to_string(next.cols()) +
                                          " inputs but selection covers " + std::to_string(sel.m()));
    }
    Matrix out(next.rows(), sel.rank());
    for (std::size_t r = 0; r < next.rows(); ++r) {
        for (std::size_t c = 0; c < sel.rank(); ++c) out(r, c) = next(r, sel.retained()[c]);
    }
    return out;
}

inline CompressedLayerPair fold_merge_pair(const Matrix& w, const Matrix& next,
                                           const ClusterAssignment& a) {
    if (next.cols() != w.rows()) {
        throw Error(ErrorKind::shape, "layer " + w.shape_string() + " does not feed next " +
                                          next.shape_string());
    }
    return {cluster_means(a, w), merge_columns(next, a), PairMode::folded, a};
}

inline CompressedLayerPair prune_drop_pair(const Matrix& w, const Matrix& next,
                                           const PruneSelection& sel) {
    if (next.cols() != w.rows()) {
        throw Error(ErrorKind::shape, "layer " + w.shape_string() + " does not feed next " +
                                          next.shape_string());
    }
    return {select_rows(w, sel), select_columns(next, sel), PairMode::pruned, sel};
}

// k = max(1, round(ratio * m)), capped at m.
inline std::size_t budget_for(double ratio, std::size_t m) {
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw Error(ErrorKind::invalid_config, "ratio must lie in (0, 1]");
    }
    const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(m)));
    return std::clamp<std::size_t>(k, 1, m);
}

struct CompressionConfig {
    double ratio = 1.0;
    CompressionMethod method = CompressionMethod::fold;
    MagnitudeCriterion criterion = MagnitudeCriterion::l2;  // used by singleton-fold
    std::uint64_t seed = 0;
    bool exact = false;
    std::size_t restarts = 1;
    std::size_t max_sweeps = kDefaultMaxSweeps;
    RankMode rank_mode = RankMode::matched;
};

struct LayerReport {
    std::string name;
    std::size_t m = 0;
    std::size_t budget = 0;  // round(ratio * m) clamped to [1, m]
    std::size_t k = 0;       // rows after compression
    std::string criterion;
    double error_sq = 0.0;   // ||W - C W||_F^2 of the full-size projection
    std::optional<double> wcss;
};

struct CompressionResult {
    Checkpoint checkpoint;
    std::vector<LayerReport> per_layer;
};

namespace compress_detail {

struct LayerPlan {
    std::variant<PruneSelection, ClusterAssignment> mapping;
    double error_sq = 0.0;
    std::optional<double> wcss;
};

inline LayerPlan plan_layer(const Matrix& w, std::size_t k, const CompressionConfig& cfg) {
    const std::size_t m = w.rows();
    const bool slack = cfg.rank_mode == RankMode::theorem_slack;
    LayerPlan plan;
    switch (cfg.method) {
        case CompressionMethod::mag1:
        case CompressionMethod::mag2: {
            const auto crit = cfg.method == CompressionMethod::mag1 ? MagnitudeCriterion::l1
                                                                    : MagnitudeCriterion::l2;
            auto sel = magnitude_select(w, k, crit);
            plan.error_sq = recon_error_sq(w, prune_rows_masked(sel, w));
            plan.mapping = std::move(sel);
            break;
        }
        case CompressionMethod::fold: {
            const std::size_t k_f = slack ? std::min(k + 1, m) : k;
            auto res = optimal_fold_result(
                w, k_f, FoldOptions{cfg.seed, cfg.exact, cfg.max_sweeps, cfg.restarts});
            plan.error_sq = recon_error_sq(w, fold_rows(res.assignment, w));
            plan.wcss = res.wcss;
            plan.mapping = std::move(res.assignment);
            break;
        }
        case CompressionMethod::singleton_fold: {
            // matched: k clusters = (k - 1) kept rows + 1 merged cluster.
            // slack: k kept rows + 1 merged cluster; nothing to merge when k == m.
            const std::size_t k_p = slack ? k : k - 1;
            if (k_p >= m) {
                plan.mapping = ClusterAssignment::singletons(m);
                plan.wcss = 0.0;
                break;
            }
            auto a = singleton_fold(magnitude_select(w, k_p, cfg.criterion));
            plan.error_sq = recon_error_sq(w, fold_rows(a, w));
            plan.wcss = plan.error_sq;
            plan.mapping = std::move(a);
            break;
        }
    }
    return plan;
}

}  // namespace compress_detail

// Compresses every layer that feeds a successor (per the adjacency list) to
// budget k = round(ratio * m); successors are adapted so dimensions chain.
// Layers are processed in manifest order, so a layer whose inputs were just
// merged is clustered on its adapted weights. Layers without a successor are
// copied unchanged.
inline CompressionResult compress_checkpoint(const Checkpoint& ckpt, const CompressionConfig& cfg) {
    if (cfg.restarts < 1) throw Error(ErrorKind::invalid_config, "restarts must be >= 1");
    if (cfg.max_sweeps < 1) throw Error(ErrorKind::invalid_config, "max-sweeps must be >= 1");
    validate_manifest(ckpt.manifest);

    CompressionResult out;
    out.checkpoint = ckpt;
    auto& manifest = out.checkpoint.manifest;
    auto& weights = out.checkpoint.weights;

    for (std::size_t i = 0; i < manifest.layers.size(); ++i) {
        const auto succ = manifest.successors(i);
        if (succ.empty()) continue;

        const Matrix& w = weights[i];
        const std::size_t k = budget_for(cfg.ratio, w.rows());
        auto plan = compress_detail::plan_layer(w, k, cfg);

        LayerReport report;
        report.name = manifest.layers[i].name;
        report.m = w.rows();
        report.budget = k;
        report.criterion = cfg.method == CompressionMethod::mag1   ? "l1"
                           : cfg.method == CompressionMethod::mag2 ? "l2"
                           : cfg.method == CompressionMethod::singleton_fold
                               ? to_string(cfg.criterion)
                               : "kmeans";
        report.error_sq = plan.error_sq;
        report.wcss = plan.wcss;

        Matrix new_layer;
        if (const auto* sel = std::get_if<PruneSelection>(&plan.mapping)) {
            new_layer = select_rows(w, *sel);
            for (auto s : succ) weights[s] = select_columns(weights[s], *sel);
        } else {
            const auto& a = std::get<ClusterAssignment>(plan.mapping);
            new_layer = cluster_means(a, w);
            for (auto s : succ) weights[s] = merge_columns(weights[s], a);
        }
        weights[i] = std::move(new_layer);
        manifest.layers[i].out_dim = weights[i].rows();
        for (auto s : succ) manifest.layers[s].in_dim = weights[i].rows();
        report.k = weights[i].rows();
        out.per_layer.push_back(std::move(report));
    }
    return out;
}

inline std::string metadata_json(const CompressionResult& result, const CompressionConfig& cfg) {
    nlohmann::ordered_json doc;
    doc["method"] = to_string(cfg.method);
    doc["ratio"] = cfg.ratio;
    doc["rank_mode"] = to_string(cfg.rank_mode);
    doc["seed"] = cfg.seed;
    doc["exact"] = cfg.exact;
    doc["per_layer"] = nlohmann::ordered_json::array();
    for (const auto& r : result.per_layer) {
        nlohmann::ordered_json entry;
        entry["name"] = r.name;
        entry["m"] = r.m;
        entry["k"] = r.k;
        entry["criterion"] = r.criterion;
        entry["error_sq"] = r.error_sq;
        entry["wcss"] = r.wcss ? nlohmann::ordered_json(*r.wcss) : nlohmann::ordered_json(nullptr);
        doc["per_layer"].push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

}  // namespace foldkit
