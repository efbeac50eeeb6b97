#pragma once

// k-means on weight rows.
//
// kmeans_hartigan() is the production path: Hartigan's point-by-point local
// search with the exact size-corrected move cost, O(mkp) per sweep, capped at
// max_sweeps (10 by default). kmeans_exact() enumerates every partition into
// exactly k blocks and is the small-instance oracle (m <= 12).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "projection.hpp"

namespace foldkit {

inline constexpr std::size_t kDefaultMaxSweeps = 10;
inline constexpr std::size_t kExactMaxRows = 12;

struct KMeansResult {
    ClusterAssignment assignment;
    double wcss = 0.0;
    std::size_t sweeps_used = 0;
    bool converged = false;
    // wcss of the starting assignment, then after every completed sweep.
    std::vector<double> wcss_history;
};

// Within-cluster sum of squares, recomputed directly from the assignment.
inline double wcss(const ClusterAssignment& a, const Matrix& w) {
    const Matrix means = cluster_means(a, w);
    CompensatedSum acc;
    for (std::size_t i = 0; i < w.rows(); ++i) {
        acc += squared_distance(w.row(i), means.row(a.label(i)));
    }
    return acc.value();
}

namespace kmeans_detail {

inline void check_k(std::size_t k, std::size_t m) {
    if (k < 1 || k > m) {
        throw Error(ErrorKind::invalid_k,
                    "k=" + std::to_string(k) + " must lie in [1, m=" + std::to_string(m) + "]");
    }
}

// Squared distance with an early exit once the running sum reaches `limit`.
inline double bounded_distance(std::span<const double> a, std::span<const double> b,
                               double limit) noexcept {
    constexpr std::size_t kChunk = 16;
    double s = 0.0;
    std::size_t j = 0;
    const std::size_t n = a.size();
    while (j < n) {
        const std::size_t end = std::min(n, j + kChunk);
        for (; j < end; ++j) {
            const double d = a[j] - b[j];
            s += d * d;
        }
        if (s >= limit) return s;
    }
    return s;
}

class HartiganState {
public:
    HartiganState(const Matrix& w, const ClusterAssignment& init)
        : w_(w), labels_(init.labels()), sizes_(init.sizes()), sums_(init.k(), w.cols()),
          means_(init.k(), w.cols()) {
        rebuild();
    }

    // Recomputes sums and means from scratch so rounding drift from
    // incremental updates cannot accumulate across sweeps.
    void rebuild() {
        std::fill(sums_.data().begin(), sums_.data().end(), 0.0);
        for (std::size_t i = 0; i < w_.rows(); ++i) {
            auto dst = sums_.row(labels_[i]);
            auto src = w_.row(i);
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        }
        for (std::size_t j = 0; j < sizes_.size(); ++j) refresh_mean(j);
    }

    // One pass over all rows in ascending order; returns the number of moves.
    std::size_t sweep(double threshold) {
        const std::size_t k = sizes_.size();
        std::size_t moves = 0;
        for (std::size_t i = 0; i < w_.rows(); ++i) {
            const std::size_t from = labels_[i];
            const std::size_t n_from = sizes_[from];
            if (n_from == 1) continue;  // moving would empty the cluster
            const auto x = w_.row(i);
            const double removal = static_cast<double>(n_from) / static_cast<double>(n_from - 1) *
                                   squared_distance(x, means_.row(from));
            // Only targets whose insertion cost beats removal - threshold can
            // yield a move; strict '<' keeps the lowest id among ties.
            double best = removal - threshold;
            std::size_t target = k;
            for (std::size_t j = 0; j < k; ++j) {
                if (j == from) continue;
                const double n_to = static_cast<double>(sizes_[j]);
                const double factor = n_to / (n_to + 1.0);
                const double d = bounded_distance(x, means_.row(j), best / factor);
                const double cost = factor * d;
                if (cost < best) {
                    best = cost;
                    target = j;
                }
            }
            if (target != k) {
                move(i, from, target);
                ++moves;
            }
        }
        return moves;
    }

    ClusterAssignment assignment() const {
        return ClusterAssignment(labels_, sizes_.size()).canonical();
    }

private:
    void refresh_mean(std::size_t j) {
        const double n = static_cast<double>(sizes_[j]);
        auto s = sums_.row(j);
        auto mu = means_.row(j);
        for (std::size_t c = 0; c < s.size(); ++c) mu[c] = s[c] / n;
    }

    void move(std::size_t i, std::size_t from, std::size_t to) {
        const auto x = w_.row(i);
        auto s_from = sums_.row(from);
        auto s_to = sums_.row(to);
        for (std::size_t c = 0; c < x.size(); ++c) {
            s_from[c] -= x[c];
            s_to[c] += x[c];
        }
        --sizes_[from];
        ++sizes_[to];
        labels_[i] = to;
        refresh_mean(from);
        refresh_mean(to);
    }

    const Matrix& w_;
    std::vector<std::size_t> labels_;
    std::vector<std::size_t> sizes_;
    Matrix sums_;
    Matrix means_;
};

}  // namespace kmeans_detail

// k-means++ seeding: first center uniform, later centers drawn with
// probability proportional to squared distance from the nearest chosen
// center. Each center row is pinned to its own cluster, the rest go to the
// nearest center (lowest id on ties). Labels are returned in canonical order.
inline ClusterAssignment init_assignment(const Matrix& w, std::size_t k, std::uint64_t seed) {
    const std::size_t m = w.rows();
    kmeans_detail::check_k(k, m);
    Rng rng(seed);

    std::vector<std::size_t> centers;
    centers.reserve(k);
    std::vector<bool> chosen(m, false);
    std::vector<double> nearest(m, std::numeric_limits<double>::infinity());

    auto add_center = [&](std::size_t c) {
        centers.push_back(c);
        chosen[c] = true;
        for (std::size_t i = 0; i < m; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(w.row(i), w.row(c)));
        }
    };

    add_center(static_cast<std::size_t>(rng.below(m)));
    while (centers.size() < k) {
        CompensatedSum total;
        for (std::size_t i = 0; i < m; ++i) {
            if (!chosen[i]) total += nearest[i];
        }
        std::size_t pick = m;
        if (total.value() > 0.0) {
            const double r = rng.uniform() * total.value();
            double cumulative = 0.0;
            std::size_t last_positive = m;
            for (std::size_t i = 0; i < m; ++i) {
                if (chosen[i] || nearest[i] <= 0.0) continue;
                last_positive = i;
                cumulative += nearest[i];
                if (cumulative > r) {
                    pick = i;
                    break;
                }
            }
            if (pick == m) pick = last_positive;
        } else {
            // Every remaining row duplicates a center; choose uniformly.
            std::size_t nth = static_cast<std::size_t>(rng.below(m - centers.size()));
            for (std::size_t i = 0; i < m; ++i) {
                if (chosen[i]) continue;
                if (nth-- == 0) {
                    pick = i;
                    break;
                }
            }
        }
        add_center(pick);
    }

    std::vector<std::size_t> labels(m, k);
    for (std::size_t c = 0; c < k; ++c) labels[centers[c]] = c;
    for (std::size_t i = 0; i < m; ++i) {
        if (labels[i] != k) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            const double d = squared_distance(w.row(i), w.row(centers[c]));
            if (d < best) {
                best = d;
                labels[i] = c;
            }
        }
    }
    return ClusterAssignment(std::move(labels), k).canonical();
}

// Hartigan local search from a given assignment. A row moves from cluster a
// to b when |S_b|/(|S_b|+1) ||w - mu_b||^2 - |S_a|/(|S_a|-1) ||w - mu_a||^2
// is below -1e-12 * max(1, wcss); singleton clusters never lose their row.
// Stops after a sweep with no moves or after max_sweeps sweeps.
inline KMeansResult hartigan_from(const Matrix& w, const ClusterAssignment& start,
                                  std::size_t max_sweeps = kDefaultMaxSweeps) {
    if (start.m() != w.rows()) {
        throw Error(ErrorKind::shape, "assignment covers " + std::to_string(start.m()) +
                                          " rows but weights are " + w.shape_string());
    }
    KMeansResult result;
    kmeans_detail::HartiganState state(w, start);
    double current = wcss(start, w);
    result.wcss_history.push_back(current);

    for (std::size_t s = 0; s < max_sweeps; ++s) {
        if (s > 0) state.rebuild();
        const std::size_t moves = state.sweep(1e-12 * std::max(1.0, current));
        ++result.sweeps_used;
        if (moves == 0) {
            result.converged = true;
            break;
        }
        current = wcss(state.assignment(), w);
        result.wcss_history.push_back(current);
    }
    result.assignment = state.assignment();
    result.wcss = current;
    return result;
}

inline KMeansResult kmeans_hartigan(const Matrix& w, std::size_t k, std::uint64_t seed,
                                    std::size_t max_sweeps = kDefaultMaxSweeps) {
    return hartigan_from(w, init_assignment(w, k, seed), max_sweeps);
}

// Best of `restarts` seeded runs: minimal wcss, then lowest restart index.
// Restart r uses seed + r * 0x9E3779B97F4A7C15, so restarts == 1 is exactly
// kmeans_hartigan(w, k, seed).
inline KMeansResult kmeans_hartigan(const Matrix& w, std::size_t k, std::uint64_t seed,
                                    std::size_t max_sweeps, std::size_t restarts) {
    if (restarts < 1) throw Error(ErrorKind::invalid_config, "restarts must be >= 1");
    KMeansResult best = kmeans_hartigan(w, k, seed, max_sweeps);
    for (std::size_t r = 1; r < restarts; ++r) {
        KMeansResult run = kmeans_hartigan(w, k, seed + r * 0x9E3779B97F4A7C15ull, max_sweeps);
        if (run.wcss < best.wcss) best = std::move(run);
    }
    return best;
}

// Exhaustive search over set partitions into exactly k nonempty blocks,
// enumerated as restricted growth strings in lexicographic order. A later
// partition replaces the incumbent only if it is lower by more than
// 1e-12 * max(1, best), so exact ties resolve to the lexicographically
// smallest label vector despite rounding in the incremental objective.
inline KMeansResult kmeans_exact(const Matrix& w, std::size_t k) {
    const std::size_t m = w.rows();
    kmeans_detail::check_k(k, m);
    if (m > kExactMaxRows) {
        throw Error(ErrorKind::instance_too_large,
                    "exact k-means enumerates partitions only for m <= " +
                        std::to_string(kExactMaxRows) + ", got m=" + std::to_string(m));
    }
    const std::size_t p = w.cols();

    // wcss = sum_i ||w_i||^2 - sum_j ||S_j||^2 / n_j
    double total_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) total_sq += squared_norm(w.row(i));

    std::vector<std::size_t> labels(m, 0);
    std::vector<std::size_t> best_labels;
    double best = std::numeric_limits<double>::infinity();
    Matrix sums(k, p);
    std::vector<std::size_t> counts(k, 0);
    std::vector<double> contrib(k, 0.0);

    // Row i's block state is saved before insertion and restored verbatim on
    // backtrack, so no add/subtract drift builds up over the enumeration.
    Matrix saved_sums(m, p);
    std::vector<double> saved_contrib(m, 0.0);

    auto place = [&](std::size_t i, std::size_t c) {
        auto s = sums.row(c);
        auto x = w.row(i);
        std::copy(s.begin(), s.end(), saved_sums.row(i).begin());
        saved_contrib[i] = contrib[c];
        for (std::size_t t = 0; t < p; ++t) s[t] += x[t];
        ++counts[c];
        contrib[c] = squared_norm(s) / static_cast<double>(counts[c]);
    };
    auto unplace = [&](std::size_t i, std::size_t c) {
        auto saved = saved_sums.row(i);
        std::copy(saved.begin(), saved.end(), sums.row(c).begin());
        --counts[c];
        contrib[c] = saved_contrib[i];
    };

    auto recurse = [&](auto&& self, std::size_t i, std::size_t blocks) -> void {
        if (i == m) {
            if (blocks != k) return;
            double explained = 0.0;
            for (double c : contrib) explained += c;
            const double value = total_sq - explained;
            if (best_labels.empty() || value < best - 1e-12 * std::max(1.0, std::fabs(best))) {
                best = value;
                best_labels = labels;
            }
            return;
        }
        const std::size_t remaining = m - i - 1;
        const std::size_t limit = std::min(blocks, k - 1);
        for (std::size_t c = 0; c <= limit; ++c) {
            const std::size_t after = c == blocks ? blocks + 1 : blocks;
            if (after + remaining < k) continue;
            labels[i] = c;
            place(i, c);
            self(self, i + 1, after);
            unplace(i, c);
        }
    };
    labels[0] = 0;
    place(0, 0);
    recurse(recurse, 1, 1);

    KMeansResult result;
    result.assignment = ClusterAssignment(std::move(best_labels), k);
    result.wcss = wcss(result.assignment, w);
    result.wcss_history = {result.wcss};
    result.converged = true;
    return result;
}

}  // namespace foldkit
