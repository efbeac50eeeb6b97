#pragma once

// Minimal bias-free MLP used to check the functional side of compression:
// a folded layer merged with its successor computes exactly what the
// full-size folded network computes, and likewise for physical pruning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "compress.hpp"
#include "error.hpp"
#include "matrix.hpp"
#include "norms.hpp"
#include "projection.hpp"

namespace foldkit {

enum class Activation { relu, identity };

struct ToyMLP {
    std::vector<Matrix> layers;  // layer i maps dims[i] -> dims[i+1]; shape out x in
    std::vector<Activation> activations;

    std::size_t input_dim() const { return layers.front().cols(); }
    std::size_t output_dim() const { return layers.back().rows(); }

    void validate() const {
        if (layers.empty()) throw Error(ErrorKind::shape, "network has no layers");
        if (activations.size() != layers.size()) {
            throw Error(ErrorKind::shape, "one activation per layer required");
        }
        for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
            if (layers[i + 1].cols() != layers[i].rows()) {
                throw Error(ErrorKind::shape, "layer " + std::to_string(i + 1) + " expects " +
                                                  std::to_string(layers[i + 1].cols()) +
                                                  " inputs, previous layer emits " +
                                                  std::to_string(layers[i].rows()));
            }
        }
    }
};

// ReLU on every layer but the last.
inline ToyMLP make_mlp(std::vector<Matrix> layers) {
    ToyMLP net;
    net.activations.assign(layers.size(), Activation::relu);
    if (!net.activations.empty()) net.activations.back() = Activation::identity;
    net.layers = std::move(layers);
    net.validate();
    return net;
}

// dims = {d, h1, ..., c}; weights i.i.d. uniform[-1, 1] from `seed`.
inline ToyMLP random_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw Error(ErrorKind::shape, "need at least input and output dims");
    for (auto d : dims) {
        if (d == 0) throw Error(ErrorKind::shape, "zero-width layer");
    }
    Rng rng(seed);
    std::vector<Matrix> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        layers.push_back(random_uniform(dims[i + 1], dims[i], rng));
    }
    return make_mlp(std::move(layers));
}

struct EvalBatch {
    Matrix inputs;   // n x d
    Matrix targets;  // n x c
};

// x is n x d; returns n x c.
inline Matrix forward(const ToyMLP& net, const Matrix& x) {
    net.validate();
    if (x.cols() != net.input_dim()) {
        throw Error(ErrorKind::shape, "input has " + std::to_string(x.cols()) +
                                          " features, network expects " +
                                          std::to_string(net.input_dim()));
    }
    Matrix h = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Matrix& w = net.layers[l];
        Matrix next(h.rows(), w.rows());
        for (std::size_t n = 0; n < h.rows(); ++n) {
            const auto in = h.row(n);
            auto out = next.row(n);
            for (std::size_t j = 0; j < w.rows(); ++j) {
                const auto wr = w.row(j);
                double s = 0.0;
                for (std::size_t t = 0; t < wr.size(); ++t) s += wr[t] * in[t];
                out[j] = net.activations[l] == Activation::relu ? std::max(0.0, s) : s;
            }
        }
        h = std::move(next);
    }
    return h;
}

// Mean of squared residuals over all n x c outputs.
inline double mse_loss(const ToyMLP& net, const EvalBatch& batch) {
    const Matrix out = forward(net, batch.inputs);
    if (!same_shape(out, batch.targets)) {
        throw Error(ErrorKind::shape, "targets " + batch.targets.shape_string() +
                                          " do not match outputs " + out.shape_string());
    }
    if (out.size() == 0) throw Error(ErrorKind::shape, "empty batch");
    return recon_error_sq(out, batch.targets) / static_cast<double>(out.size());
}

namespace toynet_detail {

inline void check_pair_index(const ToyMLP& net, std::size_t layer_idx) {
    if (layer_idx + 1 >= net.layers.size()) {
        throw Error(ErrorKind::shape, "layer " + std::to_string(layer_idx) + " has no successor");
    }
}

}  // namespace toynet_detail

// max |f_fullsize_folded(x) - f_merged(x)| over the batch.
inline double fold_equivalence_check(const ToyMLP& net, std::size_t layer_idx,
                                     const ClusterAssignment& a, const Matrix& inputs) {
    toynet_detail::check_pair_index(net, layer_idx);
    ToyMLP projected = net;
    projected.layers[layer_idx] = fold_rows(a, net.layers[layer_idx]);

    const auto pair = fold_merge_pair(net.layers[layer_idx], net.layers[layer_idx + 1], a);
    ToyMLP merged = net;
    merged.layers[layer_idx] = pair.layer;
    merged.layers[layer_idx + 1] = pair.next;

    return max_abs_diff(forward(projected, inputs), forward(merged, inputs));
}

// max |f_zero_masked(x) - f_dropped(x)| over the batch.
inline double prune_equivalence_check(const ToyMLP& net, std::size_t layer_idx,
                                      const PruneSelection& sel, const Matrix& inputs) {
    toynet_detail::check_pair_index(net, layer_idx);
    ToyMLP masked = net;
    masked.layers[layer_idx] = prune_rows_masked(sel, net.layers[layer_idx]);

    const auto pair = prune_drop_pair(net.layers[layer_idx], net.layers[layer_idx + 1], sel);
    ToyMLP dropped = net;
    dropped.layers[layer_idx] = pair.layer;
    dropped.layers[layer_idx + 1] = pair.next;

    return max_abs_diff(forward(masked, inputs), forward(dropped, inputs));
}

struct CompressionSpec {
    CompressionMethod method = CompressionMethod::fold;
    MagnitudeCriterion criterion = MagnitudeCriterion::l2;  // singleton-fold pruning order
    FoldOptions fold;
};

// Full-size projection C W of one layer. Budget k is the retained rank for
// mag1/mag2 (0 allowed) and the cluster count for fold; singleton-fold keeps k
// rows and merges the rest into one extra cluster, pairing it with pruning
// to k rows as in the error chain.
inline Matrix project_layer(const Matrix& w, const CompressionSpec& spec, std::size_t k) {
    switch (spec.method) {
        case CompressionMethod::mag1:
            return prune_rows_masked(magnitude_select(w, k, MagnitudeCriterion::l1), w);
        case CompressionMethod::mag2:
            return prune_rows_masked(magnitude_select(w, k, MagnitudeCriterion::l2), w);
        case CompressionMethod::fold:
            return fold_rows(optimal_fold_result(w, k, spec.fold).assignment, w);
        case CompressionMethod::singleton_fold:
            if (k >= w.rows()) return w;
            return fold_rows(singleton_fold(magnitude_select(w, k, spec.criterion)), w);
    }
    return w;
}

struct LossPerturbation {
    double param_dist = 0.0;  // ||W - W_c||_F
    double loss_delta = 0.0;  // |L(W) - L(W_c)|
};

inline LossPerturbation loss_perturbation(const ToyMLP& net, std::size_t layer_idx,
                                          const CompressionSpec& spec, std::size_t k,
                                          const EvalBatch& batch) {
    if (layer_idx >= net.layers.size()) {
        throw Error(ErrorKind::shape, "no layer " + std::to_string(layer_idx));
    }
    ToyMLP compressed = net;
    compressed.layers[layer_idx] = project_layer(net.layers[layer_idx], spec, k);
    LossPerturbation out;
    out.param_dist = std::sqrt(recon_error_sq(net.layers[layer_idx], compressed.layers[layer_idx]));
    out.loss_delta = std::fabs(mse_loss(net, batch) - mse_loss(compressed, batch));
    return out;
}

// Empirical local Lipschitz constant of the loss in one layer's weights:
// max over random Gaussian directions scaled to `radius` of |dL| / radius.
inline double estimate_local_lipschitz(const ToyMLP& net, std::size_t layer_idx,
                                       const EvalBatch& batch, double radius, std::size_t trials,
                                       std::uint64_t seed) {
    if (radius <= 0.0 || trials == 0) return 0.0;
    const double base = mse_loss(net, batch);
    Rng rng(seed);
    ToyMLP probe = net;
    const Matrix& w = net.layers.at(layer_idx);
    double best = 0.0;
    Matrix dir(w.rows(), w.cols());
    for (std::size_t t = 0; t < trials; ++t) {
        for (double& v : dir.data()) v = rng.normal();
        const double scale = radius / std::sqrt(frobenius_sq(dir));
        auto& target = probe.layers[layer_idx];
        for (std::size_t n = 0; n < w.size(); ++n) {
            target.data()[n] = w.data()[n] + scale * dir.data()[n];
        }
        best = std::max(best, std::fabs(mse_loss(probe, batch) - base) / radius);
    }
    return best;
}

}  // namespace foldkit
