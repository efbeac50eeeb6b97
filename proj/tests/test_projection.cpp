#include <gtest/gtest.h>

#include <foldkit/projection.hpp>

#include "test_support.hpp"

namespace {

using foldkit::ClusterAssignment;
using foldkit::Matrix;
using foldkit::PruneSelection;
using foldkit::testing::generic_projection;

void expect_near(const Matrix& got, const Matrix& want, double tol) {
    ASSERT_TRUE(foldkit::same_shape(got, want)) << got.shape_string() << " vs " << want.shape_string();
    EXPECT_LE(foldkit::max_abs_diff(got, want), tol);
}

TEST(PruneProjection, CoordinateExamples) {
    expect_near(foldkit::prune_projection(PruneSelection({0, 2}, 3)).matrix(),
                Matrix{{1, 0, 0}, {0, 0, 0}, {0, 0, 1}}, 0.0);
    expect_near(foldkit::prune_projection(PruneSelection({}, 2)).matrix(), Matrix(2, 2), 0.0);
    expect_near(foldkit::prune_projection(PruneSelection({0, 1}, 2)).matrix(),
                Matrix{{1, 0}, {0, 1}}, 0.0);
}

TEST(PruneSelection, RejectsUnsortedOrOutOfRange) {
    EXPECT_THROW(PruneSelection({1, 0}, 3), foldkit::Error);
    EXPECT_THROW(PruneSelection({0, 0}, 3), foldkit::Error);
    EXPECT_THROW(PruneSelection({3}, 3), foldkit::Error);
}

TEST(FoldProjection, AveragingExamples) {
    expect_near(foldkit::fold_projection(ClusterAssignment({0, 0}, 1)).matrix(),
                Matrix{{.5, .5}, {.5, .5}}, 1e-15);
    expect_near(foldkit::fold_projection(ClusterAssignment({0, 1, 2}, 3)).matrix(),
                Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 0.0);
}

TEST(FoldProjection, BlockDiagonalMatchesGenericFormula) {
    const Matrix u{{1, 0}, {1, 0}, {0, 1}};
    const Matrix by_hand{{.5, .5, 0}, {.5, .5, 0}, {0, 0, 1}};
    expect_near(generic_projection(u), by_hand, 1e-14);
    expect_near(foldkit::fold_projection(ClusterAssignment({0, 0, 1}, 2)).matrix(), by_hand, 1e-15);
}

TEST(ClusterAssignment, RejectsEmptyClustersAndBadK) {
    EXPECT_THROW(ClusterAssignment({0, 2}, 3), foldkit::Error);
    EXPECT_THROW(ClusterAssignment({0, 0}, 0), foldkit::Error);
    EXPECT_THROW(ClusterAssignment({0, 1}, 3), foldkit::Error);
}

TEST(ApplyProjection, Examples) {
    foldkit::Rng rng(5);
    const Matrix w = foldkit::random_uniform(4, 3, rng);
    expect_near(foldkit::apply_projection(foldkit::prune_projection(PruneSelection({0, 1, 2, 3}, 4)), w),
                w, 1e-15);
    expect_near(foldkit::apply_projection(foldkit::prune_projection(PruneSelection({0}, 2)),
                                          Matrix{{1, 2}, {3, 4}}),
                Matrix{{1, 2}, {0, 0}}, 0.0);
    expect_near(foldkit::apply_projection(foldkit::fold_projection(ClusterAssignment({0, 0}, 1)),
                                          Matrix{{1, 0}, {0, 1}}),
                Matrix{{.5, .5}, {.5, .5}}, 1e-15);
    EXPECT_THROW(foldkit::apply_projection(foldkit::prune_projection(PruneSelection({0}, 2)), w),
                 foldkit::Error);
}

TEST(ApplyProjection, FastPathsMatchMatrixRoute) {
    foldkit::Rng rng(21);
    for (int t = 0; t < 100; ++t) {
        const std::size_t m = 1 + rng.below(24), p = 1 + rng.below(12);
        const Matrix w = foldkit::random_uniform(m, p, rng);
        const std::size_t k = 1 + rng.below(m);
        const auto a = ClusterAssignment(foldkit::testing::random_labels(m, k, rng), k);
        expect_near(foldkit::fold_rows(a, w),
                    foldkit::apply_projection(foldkit::fold_projection(a), w), 1e-12);
        const PruneSelection sel(foldkit::testing::random_subset(m, rng), m);
        expect_near(foldkit::prune_rows_masked(sel, w),
                    foldkit::apply_projection(foldkit::prune_projection(sel), w), 0.0);
    }
}

TEST(ProjectionProperties, AxiomsAndAgreementWithGenericFormula) {
    foldkit::Rng rng(99);
    for (int t = 0; t < 500; ++t) {
        const std::size_t m = 1 + rng.below(64);
        const PruneSelection sel(foldkit::testing::random_subset(m, rng), m);
        const auto cp = foldkit::prune_projection(sel);
        EXPECT_TRUE(cp.satisfies_axioms());
        expect_near(cp.matrix(), generic_projection(foldkit::prune_basis(sel)), 1e-12);

        const std::size_t k = 1 + rng.below(m);
        const ClusterAssignment a(foldkit::testing::random_labels(m, k, rng), k);
        const auto cf = foldkit::fold_projection(a);
        EXPECT_TRUE(cf.satisfies_axioms());
        expect_near(cf.matrix(), generic_projection(foldkit::fold_basis(a)), 1e-10);
    }
}

// A projection onto Range(U) is the closest point: for any z in the range,
// ||w - Cw|| <= ||w - z||.
TEST(ProjectionProperties, BestApproximation) {
    foldkit::Rng rng(7);
    for (int t = 0; t < 100; ++t) {
        const std::size_t m = 2 + rng.below(20), p = 1 + rng.below(8);
        const Matrix w = foldkit::random_uniform(m, p, rng);
        const std::size_t k = 1 + rng.below(m);
        const ClusterAssignment a(foldkit::testing::random_labels(m, k, rng), k);
        const Matrix u = foldkit::fold_basis(a);
        Matrix diff = w;
        const Matrix proj = foldkit::fold_rows(a, w);
        for (std::size_t n = 0; n < w.size(); ++n) diff.data()[n] -= proj.data()[n];
        const double err = foldkit::frobenius_sq(diff);
        const Matrix z = foldkit::matmul(u, foldkit::random_uniform(k, p, rng, -2, 2));
        Matrix dz = w;
        for (std::size_t n = 0; n < w.size(); ++n) dz.data()[n] -= z.data()[n];
        EXPECT_LE(err, foldkit::frobenius_sq(dz) + 1e-9);
    }
}

}  // namespace
