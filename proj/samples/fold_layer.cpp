// Folds one random layer and its successor to half width and shows that the
// shrunk pair computes the same function as the full-size folded pair.

#include <cstdio>

#include <foldkit/foldkit.hpp>

int main() {
    using namespace foldkit;

    Rng rng(42);
    const Matrix layer = random_uniform(32, 16, rng);
    const Matrix next = random_uniform(8, 32, rng);

    const auto clusters = kmeans_hartigan(layer, 16, /*seed=*/0);
    const auto pair = fold_merge_pair(layer, next, clusters.assignment);
    std::printf("layer %s -> %s, next %s -> %s, wcss %.6f after %zu sweeps\n",
                layer.shape_string().c_str(), pair.layer.shape_string().c_str(),
                next.shape_string().c_str(), pair.next.shape_string().c_str(), clusters.wcss,
                clusters.sweeps_used);

    const auto pruned = magnitude_select(layer, 16, MagnitudeCriterion::l2);
    std::printf("pruning error %.6f vs folding error %.6f\n", prune_error_sq(layer, pruned),
                recon_error_sq(layer, fold_rows(clusters.assignment, layer)));

    const ToyMLP net = make_mlp({layer, next});
    const Matrix x = random_uniform(4, 16, rng);
    std::printf("max output deviation after merge: %.3e\n",
                fold_equivalence_check(net, 0, clusters.assignment, x));
    return 0;
}
