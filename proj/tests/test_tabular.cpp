#include <gtest/gtest.h>

#include <set>

#include "sskf/rng.hpp"
#include "sskf/tabular.hpp"

using namespace sskf;

namespace {

AugmentedData random_augmented(std::size_t n, std::size_t p, std::size_t m, std::uint64_t seed) {
    auto eng = RngSeed(seed, "data").engine();
    AugmentedData a;
    a.xx.resize(n, 2 * p);
    for (Eigen::Index k = 0; k < a.xx.size(); ++k) a.xx.data()[k] = standard_normal(eng);
    a.y = Vector::Zero(n);
    a.z.resize(n, m);
    for (Eigen::Index k = 0; k < a.z.size(); ++k) a.z.data()[k] = bernoulli(eng, 0.5);
    return a;
}

}  // namespace

TEST(Rng, SameSeedAndLabelReplays) {
    RngSeed s(42, "a");
    auto e1 = s.child("b").engine();
    auto e2 = RngSeed(42, "a/b").engine();
    for (int i = 0; i < 10; ++i) EXPECT_EQ(e1(), e2());
    EXPECT_NE(RngSeed(42, "a").derived(), RngSeed(43, "a").derived());
    EXPECT_NE(RngSeed(42, "a").derived(), RngSeed(42, "b").derived());
}

TEST(Rng, PermutationIsBijection) {
    auto eng = RngSeed(3).engine();
    auto perm = permutation(eng, 50);
    std::set<std::size_t> seen(perm.begin(), perm.end());
    EXPECT_EQ(seen.size(), 50u);
    EXPECT_EQ(*seen.rbegin(), 49u);
}

TEST(SwapMask, DegenerateProbabilities) {
    auto zero = make_swap_mask(3, 2, 0.0, RngSeed(1));
    auto one = make_swap_mask(3, 2, 1.0, RngSeed(1));
    EXPECT_TRUE((zero.v.array() == 0).all());
    EXPECT_TRUE((one.v.array() == 1).all());
}

TEST(SwapMask, FairCoinMean) {
    auto v = make_swap_mask(10000, 1, RngSeed(7));
    double mean = v.v.cast<double>().mean();
    EXPECT_NEAR(mean, 0.5, 0.02);
}

TEST(SwapMask, InvalidProbability) {
    EXPECT_THROW(make_swap_mask(3, 2, 1.5, RngSeed(1)), ParameterError);
    EXPECT_THROW(make_swap_mask(3, 2, -0.1, RngSeed(1)), ParameterError);
}

TEST(SwapByMask, SingleCell) {
    AugmentedData a;
    a.xx.resize(1, 2);
    a.xx << 5, 7;
    a.y = Vector::Zero(1);
    a.z.resize(1, 0);
    SwapMask v(1, 1, 1);
    auto b = swap_by_mask(a, v);
    EXPECT_EQ(b.xx(0, 0), 7);
    EXPECT_EQ(b.xx(0, 1), 5);
}

TEST(SwapByMask, ZeroMaskIsIdentity) {
    auto a = random_augmented(15, 3, 2, 1);
    auto b = swap_by_mask(a, SwapMask(15, 3));
    EXPECT_EQ(a.xx, b.xx);
}

TEST(SwapByMask, Involution) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto a = random_augmented(25, 4, 2, s);
        auto v = make_swap_mask(25, 4, RngSeed(s, "v"));
        EXPECT_EQ(swap_by_mask(swap_by_mask(a, v), v).xx, a.xx);
    }
}

TEST(SwapByMask, BlockExchangeWithComplement) {
    auto a = random_augmented(20, 3, 1, 9);
    auto v = make_swap_mask(20, 3, RngSeed(9, "v"));
    AugmentedData flipped = a;
    flipped.xx << a.xx.rightCols(3), a.xx.leftCols(3);
    EXPECT_EQ(swap_by_mask(a, v).xx, swap_by_mask(flipped, v.complement()).xx);
}

TEST(SwapByMask, ShapeMismatch) {
    auto a = random_augmented(5, 2, 1, 1);
    EXPECT_THROW(swap_by_mask(a, SwapMask(5, 3)), ShapeError);
    EXPECT_THROW(swap_by_mask(a, SwapMask(4, 2)), ShapeError);
}

TEST(SubgroupRows, TrivialPartition) {
    auto psi = PartitionFunction::trivial(2);
    Matrix z(4, 1);
    z << 0, 1, 1, 0;
    auto rows = subgroup_rows(psi, z, 0, 0);
    EXPECT_EQ(rows, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(SubgroupRows, SingleIndicator) {
    PartitionFunction psi({{CovariateSplit{0}}}, {});
    Matrix z(3, 1);
    z << 0, 1, 0;
    EXPECT_EQ(subgroup_rows(psi, z, 0, 0), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(subgroup_rows(psi, z, 0, 1), (std::vector<std::size_t>{1}));
    EXPECT_THROW(subgroup_rows(psi, z, 0, 2), IndexError);
}

TEST(SubgroupRows, DisjointCover) {
    auto a = random_augmented(60, 3, 4, 5);
    PartitionFunction psi({{CovariateSplit{0}, CovariateSplit{2}}, {}, {CovariateSplit{1}, CovariateSplit{2}, CovariateSplit{3}}}, {});
    for (std::size_t j = 0; j < 3; ++j) {
        std::vector<int> hits(60, 0);
        for (std::size_t g = 0; g < psi.groups(j); ++g)
            for (auto i : subgroup_rows(psi, a.z, j, g)) ++hits[i];
        for (int h : hits) EXPECT_EQ(h, 1);
    }
}

TEST(Partition, LexicographicLabels) {
    PartitionFunction psi({{CovariateSplit{1}, CovariateSplit{3}}}, {"A", "B", "C", "D"});
    std::vector<double> z00{0, 0, 0, 0}, z01{0, 0, 0, 1}, z10{0, 1, 0, 0}, z11{1, 1, 1, 1};
    EXPECT_EQ(psi.group_of(0, z00), 0u);
    EXPECT_EQ(psi.group_of(0, z01), 1u);
    EXPECT_EQ(psi.group_of(0, z10), 2u);
    EXPECT_EQ(psi.group_of(0, z11), 3u);
    EXPECT_EQ(psi.definition(0, 1), "B : 0 and D : 1");
    EXPECT_EQ(PartitionFunction::trivial(1).definition(0, 0), "All individuals");
}

TEST(Partition, JsonRoundTrip) {
    PartitionFunction psi({{CovariateSplit{0}, CovariateSplit{2, 0.25, false}}, {}}, {"a", "b", "c"});
    auto back = PartitionFunction::from_json(psi.to_json());
    EXPECT_EQ(back, psi);
    EXPECT_EQ(psi.definition(0, 1), "a : 0 and c > 0.25");
}

TEST(Partition, RejectsUnsortedSplits) {
    EXPECT_THROW(PartitionFunction({{CovariateSplit{2}, CovariateSplit{1}}}, {}), ParameterError);
}

TEST(SwapByHypotheses, EmptySetIsIdentity) {
    auto a = random_augmented(10, 2, 2, 3);
    PartitionFunction psi({{CovariateSplit{0}}, {CovariateSplit{1}}}, {});
    EXPECT_EQ(swap_by_hypotheses(a, psi, {}).xx, a.xx);
}

TEST(SwapByHypotheses, TrivialGroupIsWholeColumn) {
    auto a = random_augmented(10, 3, 1, 4);
    auto psi = PartitionFunction::trivial(3);
    SwapMask v(10, 3);
    for (std::size_t i = 0; i < 10; ++i) v.set(i, 1, true);
    EXPECT_EQ(swap_by_hypotheses(a, psi, {{1, 0}}).xx, swap_by_mask(a, v).xx);
}

TEST(SwapByHypotheses, AllPairsIsAllOnes) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto a = random_augmented(20, 3, 3, s);
        PartitionFunction psi({{CovariateSplit{0}}, {CovariateSplit{1}, CovariateSplit{2}}, {}}, {});
        auto ids = psi.hypotheses();
        std::set<HypothesisId> all(ids.begin(), ids.end());
        EXPECT_EQ(swap_by_hypotheses(a, psi, all).xx, swap_by_mask(a, SwapMask(20, 3, 1)).xx);
    }
}

TEST(SwapByHypotheses, InvalidId) {
    auto a = random_augmented(10, 2, 1, 3);
    PartitionFunction psi({{CovariateSplit{0}}, {}}, {});
    EXPECT_THROW(swap_by_hypotheses(a, psi, {{1, 1}}), IndexError);
    EXPECT_THROW(swap_by_hypotheses(a, psi, {{2, 0}}), IndexError);
}

TEST(Dataset, ValidatesBinomialOutcome) {
    Dataset d{Matrix::Zero(3, 1), Vector::Constant(3, 0.5), Matrix::Zero(3, 0), Family::binomial, {}, {}};
    EXPECT_THROW(d.validate(), DataError);
    d.y << 0, 1, 1;
    EXPECT_NO_THROW(d.validate());
}
