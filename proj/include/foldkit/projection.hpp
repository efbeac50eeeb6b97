#pragma once

// Pruning and folding as orthogonal projections C = U (U^T U)^-1 U^T acting on
// the rows of a weight matrix.
//
// Both bases admit a closed form for (U^T U)^-1: for a coordinate basis it is
// the identity on the retained coordinates, for a cluster-indicator basis it
// is diag(1/|S_j|). Nothing here inverts a general matrix. The explicit m x m
// ProjectionMatrix exists for verification on small m; the production paths
// are prune_rows_masked() and fold_rows(), both O(mp).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace foldkit {

// Retained-row index set of a structured pruning.
class PruneSelection {
public:
    PruneSelection() = default;

    PruneSelection(std::vector<std::size_t> retained, std::size_t m)
        : retained_(std::move(retained)), m_(m) {
        for (std::size_t i = 0; i < retained_.size(); ++i) {
            if (retained_[i] >= m_) {
                throw Error(ErrorKind::invalid_budget,
                            "retained index " + std::to_string(retained_[i]) + " out of range for m=" +
                                std::to_string(m_));
            }
            if (i > 0 && retained_[i] <= retained_[i - 1]) {
                throw Error(ErrorKind::invalid_budget, "retained indices must be strictly increasing");
            }
        }
    }

    const std::vector<std::size_t>& retained() const noexcept { return retained_; }
    std::size_t m() const noexcept { return m_; }
    std::size_t rank() const noexcept { return retained_.size(); }

    std::vector<std::size_t> pruned() const {
        std::vector<std::size_t> out;
        std::size_t r = 0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (r < retained_.size() && retained_[r] == i) {
                ++r;
            } else {
                out.push_back(i);
            }
        }
        return out;
    }

    std::vector<bool> mask() const {
        std::vector<bool> keep(m_, false);
        for (auto i : retained_) keep[i] = true;
        return keep;
    }

    friend bool operator==(const PruneSelection&, const PruneSelection&) = default;

private:
    std::vector<std::size_t> retained_;
    std::size_t m_ = 0;
};

// Folding basis as a label vector: row i belongs to cluster labels[i]. Every
// cluster in [0, k) is nonempty.
class ClusterAssignment {
public:
    ClusterAssignment() = default;

    ClusterAssignment(std::vector<std::size_t> labels, std::size_t k)
        : labels_(std::move(labels)), k_(k), sizes_(k, 0) {
        if (labels_.empty()) throw Error(ErrorKind::invalid_k, "assignment over zero rows");
        if (k_ < 1 || k_ > labels_.size()) {
            throw Error(ErrorKind::invalid_k, "k=" + std::to_string(k_) + " outside [1, " +
                                                  std::to_string(labels_.size()) + "]");
        }
        for (auto l : labels_) {
            if (l >= k_) {
                throw Error(ErrorKind::invalid_k, "label " + std::to_string(l) + " >= k=" + std::to_string(k_));
            }
            ++sizes_[l];
        }
        for (std::size_t j = 0; j < k_; ++j) {
            if (sizes_[j] == 0) {
                throw Error(ErrorKind::invalid_k, "cluster " + std::to_string(j) + " is empty");
            }
        }
    }

    // k is taken as max(label) + 1.
    static ClusterAssignment from_labels(std::vector<std::size_t> labels) {
        std::size_t k = 0;
        for (auto l : labels) k = std::max(k, l + 1);
        return ClusterAssignment(std::move(labels), k);
    }

    static ClusterAssignment singletons(std::size_t m) {
        std::vector<std::size_t> labels(m);
        for (std::size_t i = 0; i < m; ++i) labels[i] = i;
        return ClusterAssignment(std::move(labels), m);
    }

    const std::vector<std::size_t>& labels() const noexcept { return labels_; }
    std::size_t label(std::size_t i) const noexcept { return labels_[i]; }
    std::size_t k() const noexcept { return k_; }
    std::size_t m() const noexcept { return labels_.size(); }
    const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

    std::vector<std::vector<std::size_t>> members() const {
        std::vector<std::vector<std::size_t>> out(k_);
        for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(i);
        return out;
    }

    // Relabels clusters in order of first appearance, so that cluster j's
    // first member precedes cluster (j+1)'s. Singletons become 0..m-1.
    ClusterAssignment canonical() const {
        std::vector<std::size_t> remap(k_, k_);
        std::vector<std::size_t> out(labels_.size());
        std::size_t next = 0;
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            auto& r = remap[labels_[i]];
            if (r == k_) r = next++;
            out[i] = r;
        }
        return ClusterAssignment(std::move(out), k_);
    }

    friend bool operator==(const ClusterAssignment& a, const ClusterAssignment& b) {
        return a.k_ == b.k_ && a.labels_ == b.labels_;
    }

private:
    std::vector<std::size_t> labels_;
    std::size_t k_ = 0;
    std::vector<std::size_t> sizes_;
};

// Materialized m x m projection. Intended for verification and small m only.
class ProjectionMatrix {
public:
    explicit ProjectionMatrix(Matrix c) : c_(std::move(c)) {
        if (c_.rows() != c_.cols()) {
            throw Error(ErrorKind::shape, "projection must be square, got " + c_.shape_string());
        }
    }

    const Matrix& matrix() const noexcept { return c_; }
    std::size_t m() const noexcept { return c_.rows(); }

    double symmetry_residual() const {
        CompensatedSum acc;
        for (std::size_t i = 0; i < m(); ++i) {
            for (std::size_t j = 0; j < m(); ++j) {
                const double d = c_(i, j) - c_(j, i);
                acc += d * d;
            }
        }
        return std::sqrt(acc.value());
    }

    double idempotence_residual() const {
        const Matrix c2 = matmul(c_, c_);
        CompensatedSum acc;
        for (std::size_t n = 0; n < c_.size(); ++n) {
            const double d = c2.data()[n] - c_.data()[n];
            acc += d * d;
        }
        return std::sqrt(acc.value());
    }

    // Both residuals <= tol * max(1, ||C||_F).
    bool satisfies_axioms(double tol = 1e-10) const {
        const double bound = tol * std::max(1.0, std::sqrt(frobenius_sq(c_)));
        return symmetry_residual() <= bound && idempotence_residual() <= bound;
    }

private:
    Matrix c_;
};

// Coordinate basis U_p (m x k_p): column r is e_{retained[r]}.
inline Matrix prune_basis(const PruneSelection& sel) {
    Matrix u(sel.m(), sel.rank());
    for (std::size_t r = 0; r < sel.rank(); ++r) u(sel.retained()[r], r) = 1.0;
    return u;
}

// Cluster-indicator basis U_f (m x k): u(i, j) = 1 iff row i is in cluster j.
inline Matrix fold_basis(const ClusterAssignment& a) {
    Matrix u(a.m(), a.k());
    for (std::size_t i = 0; i < a.m(); ++i) u(i, a.label(i)) = 1.0;
    return u;
}

inline ProjectionMatrix prune_projection(const PruneSelection& sel) {
    Matrix c(sel.m(), sel.m());
    for (auto i : sel.retained()) c(i, i) = 1.0;
    return ProjectionMatrix(std::move(c));
}

inline ProjectionMatrix fold_projection(const ClusterAssignment& a) {
    const std::size_t m = a.m();
    Matrix c(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        const double inv = 1.0 / static_cast<double>(a.sizes()[a.label(i)]);
        for (std::size_t j = 0; j < m; ++j) {
            if (a.label(j) == a.label(i)) c(i, j) = inv;
        }
    }
    return ProjectionMatrix(std::move(c));
}

inline Matrix apply_projection(const ProjectionMatrix& c, const Matrix& w) {
    if (c.m() != w.rows()) {
        throw Error(ErrorKind::shape, "projection is " + c.matrix().shape_string() +
                                          " but weights are " + w.shape_string());
    }
    return matmul(c.matrix(), w);
}

// Per-cluster means, k x p. The accumulator starts from the first member's
// row, so a singleton cluster reproduces its row bit for bit.
inline Matrix cluster_means(const ClusterAssignment& a, const Matrix& w) {
    if (a.m() != w.rows()) {
        throw Error(ErrorKind::shape, "assignment covers " + std::to_string(a.m()) +
                                          " rows but weights are " + w.shape_string());
    }
    Matrix means(a.k(), w.cols());
    std::vector<bool> seen(a.k(), false);
    for (std::size_t i = 0; i < a.m(); ++i) {
        const auto j = a.label(i);
        auto dst = means.row(j);
        auto src = w.row(i);
        if (!seen[j]) {
            std::copy(src.begin(), src.end(), dst.begin());
            seen[j] = true;
        } else {
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        }
    }
    for (std::size_t j = 0; j < a.k(); ++j) {
        const auto n = a.sizes()[j];
        if (n == 1) continue;
        const double scale = static_cast<double>(n);
        for (double& v : means.row(j)) v /= scale;
    }
    return means;
}

// C_f W without forming C_f: every row replaced by its cluster mean.
inline Matrix fold_rows(const ClusterAssignment& a, const Matrix& w) {
    const Matrix means = cluster_means(a, w);
    Matrix out(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        auto src = means.row(a.label(i));
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

// C_p W without forming C_p: pruned rows zeroed, retained rows copied.
inline Matrix prune_rows_masked(const PruneSelection& sel, const Matrix& w) {
    if (sel.m() != w.rows()) {
        throw Error(ErrorKind::shape, "selection covers " + std::to_string(sel.m()) +
                                          " rows but weights are " + w.shape_string());
    }
    Matrix out(w.rows(), w.cols());
    for (auto i : sel.retained()) {
        auto src = w.row(i);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace foldkit
