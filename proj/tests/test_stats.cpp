#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <set>

#include "sskf/knockoffs.hpp"
#include "sskf/simgen.hpp"
#include "sskf/stats.hpp"
#include "sskf/subgroup.hpp"

using namespace sskf;

namespace {

StatOptions fast_stats() {
    StatOptions o;
    o.path.cv.folds = 5;
    o.path.cv.grid_size = 20;
    o.path.xi_grid = {0.0, 0.5, 1.0};
    return o;
}

SimulatedData small_sim(std::size_t n, std::uint64_t seed, double null_fraction = 0.5) {
    SyntheticConfig c;
    c.n = n;
    c.p = 4;
    c.m = 8;
    c.binary_covariates = 4;
    c.null_fraction = null_fraction;
    c.seed = seed;
    return gen_synthetic(c);
}

AugmentedData with_knockoffs(const SimulatedData& sim, std::uint64_t seed) {
    return augment(sim.data, knockoffs_iid_product(sim.data.x, sim.x_marginals, RngSeed(seed, "ko")));
}

void expect_same_bits(double a, double b) { EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0) << a << " vs " << b; }

}  // namespace

TEST(Zeta, FormulaPoints) {
    EXPECT_DOUBLE_EQ(zeta(0.0), 20.0);
    EXPECT_DOUBLE_EQ(zeta(0.95), 1.0);
    EXPECT_DOUBLE_EQ(zeta(0.2), 4.0);
    EXPECT_DOUBLE_EQ(zeta(1.95), 0.5);
}

TEST(PriorWeights, PositiveAndDecreasing) {
    const auto sim = small_sim(400, 3);
    const auto a = with_knockoffs(sim, 3);
    const auto v = make_swap_mask(a.n(), a.p(), RngSeed(1));
    const auto w = prior_weights(a, v, RngSeed(2), fast_stats());
    ASSERT_EQ(w.pi.size(), 4);
    for (Eigen::Index j = 0; j < 4; ++j) {
        EXPECT_GT(w.pi[j], 0.0);
        EXPECT_DOUBLE_EQ(w.pi[j], zeta(w.t_prior[j] + w.t_prior_knockoff[j]));
    }
    for (Eigen::Index j = 0; j < 4; ++j)
        for (Eigen::Index k = 0; k < 4; ++k)
            if (w.t_prior[j] + w.t_prior_knockoff[j] < w.t_prior[k] + w.t_prior_knockoff[k]) {
                EXPECT_GT(w.pi[j], w.pi[k]);
            }
}

TEST(PriorWeights, DependOnlyOnMaskedMatrix) {
    const auto sim = small_sim(400, 4);
    const auto a = with_knockoffs(sim, 4);
    const auto v = make_swap_mask(a.n(), a.p(), RngSeed(1));
    const auto psi = build_partition({{0, 1}, {2}, {}, {3}}, 8);
    const std::set<HypothesisId> s{{0, 2}, {1, 1}};
    const auto a2 = swap_by_hypotheses(a, psi, s);
    const auto v2 = v ^ hypotheses_mask(psi, a.z, s);
    const auto w1 = prior_weights(a, v, RngSeed(2), fast_stats());
    const auto w2 = prior_weights(a2, v2, RngSeed(2), fast_stats());
    EXPECT_EQ(w1.pi, w2.pi);
    EXPECT_EQ(w1.covariate_pi, w2.covariate_pi);
}

TEST(HypothesisStatistic, TiedColumnsGiveZero) {
    auto sim = small_sim(200, 5);
    auto a = augment(sim.data, sim.data.x);  // knockoffs equal X
    const auto v = make_swap_mask(a.n(), a.p(), RngSeed(1));
    const auto psi = PartitionFunction::trivial(4);
    const auto prior = prior_weights(a, v, RngSeed(2), fast_stats());
    const auto st = hypothesis_statistic(a, v, psi, prior, {0, 0}, RngSeed(3), fast_stats());
    EXPECT_TRUE(st.tied_columns);
    EXPECT_EQ(st.w, 0.0);
}

TEST(HypothesisStatistic, TinySubgroupIsDegenerate) {
    auto sim = small_sim(200, 6);
    auto a = with_knockoffs(sim, 6);
    for (Eigen::Index i = 0; i < a.z.rows(); ++i) a.z(i, 0) = i < 3 ? 1.0 : 0.0;
    const auto v = make_swap_mask(a.n(), a.p(), RngSeed(1));
    const auto psi = build_partition({{0}, {}, {}, {}}, 8);
    const auto prior = prior_weights(a, v, RngSeed(2), fast_stats());
    const auto st = hypothesis_statistic(a, v, psi, prior, {0, 1}, RngSeed(3), fast_stats());
    EXPECT_TRUE(st.degenerate);
    EXPECT_EQ(st.w, 0.0);
    EXPECT_EQ(st.n_rows, 3u);
    EXPECT_THROW(hypothesis_statistic(a, v, psi, prior, {0, 2}, RngSeed(3), fast_stats()), IndexError);
}

TEST(AllStatistics, TableOneScenarioCount) {
    const auto sim = small_sim(300, 7);
    const auto a = with_knockoffs(sim, 7);
    AugmentedData a3 = a;
    a3.xx.resize(a.n(), 6);
    a3.xx << a.xx.leftCols(3), a.xx.middleCols(4, 3);
    a3.x_names.resize(3);
    const auto v = make_swap_mask(a3.n(), 3, RngSeed(1));
    const auto psi = build_partition({{0, 1}, {2}, {}}, 8);
    const auto prior = prior_weights(a3, v, RngSeed(2), fast_stats());
    const auto st = all_statistics(a3, v, psi, prior, RngSeed(3), fast_stats());
    EXPECT_EQ(st.size(), 7u);
    for (const auto& e : st.entries) expect_same_bits(e.w, e.t - e.t_knockoff);
}

TEST(AllStatistics, OrderIndependent) {
    const auto sim = small_sim(300, 8);
    const auto a = with_knockoffs(sim, 8);
    const auto v = make_swap_mask(a.n(), a.p(), RngSeed(1));
    const auto psi = build_partition({{0, 1}, {2}, {}, {3}}, 8);
    const auto prior = prior_weights(a, v, RngSeed(2), fast_stats());
    auto order = psi.hypotheses();
    const auto s1 = all_statistics(a, v, psi, prior, RngSeed(3), fast_stats(), order);
    std::reverse(order.begin(), order.end());
    std::swap(order[1], order[4]);
    const auto s2 = all_statistics(a, v, psi, prior, RngSeed(3), fast_stats(), order);
    ASSERT_EQ(s1.size(), s2.size());
    for (std::size_t k = 0; k < s1.size(); ++k) expect_same_bits(s1.entries[k].w, s2.entries[k].w);
}

class SwapEquivariance : public ::testing::TestWithParam<int> {};

// Swapping the sub-columns in S (with V adjusted so the masked matrix is
// unchanged) exchanges T and T~ exactly on S and nowhere else.
TEST_P(SwapEquivariance, ExactOnTargetedHypotheses) {
    const int kind = GetParam();
    const auto sim = small_sim(300, 30 + kind);
    const auto a = with_knockoffs(sim, 30 + kind);
    const auto v = make_swap_mask(a.n(), a.p(), RngSeed(kind, "v"));
    const auto psi = build_partition({{0, 1}, {2}, {}, {1}}, 8);
    const auto ids = psi.hypotheses();
    std::set<HypothesisId> s;
    auto eng = RngSeed(kind, "s").engine();
    if (kind == 0) s.insert(ids[uniform_index(eng, ids.size())]);
    if (kind == 1) {
        const auto perm = permutation(eng, ids.size());
        s.insert(ids[perm[0]]);
        s.insert(ids[perm[1]]);
    }
    if (kind == 2) s.insert(ids.begin(), ids.end());
    const auto a2 = swap_by_hypotheses(a, psi, s);
    const auto v2 = v ^ hypotheses_mask(psi, a.z, s);
    const auto prior = prior_weights(a, v, RngSeed(2), fast_stats());
    const auto before = all_statistics(a, v, psi, prior, RngSeed(3), fast_stats());
    const auto after = all_statistics(a2, v2, psi, prior_weights(a2, v2, RngSeed(2), fast_stats()), RngSeed(3), fast_stats());
    for (std::size_t k = 0; k < before.size(); ++k) {
        const auto& b = before.entries[k];
        const auto& c = after.entries[k];
        if (s.count(b.id)) {
            expect_same_bits(c.t, b.t_knockoff);
            expect_same_bits(c.t_knockoff, b.t);
            expect_same_bits(c.w, b.w == 0.0 ? 0.0 : -b.w);
        } else {
            expect_same_bits(c.t, b.t);
            expect_same_bits(c.t_knockoff, b.t_knockoff);
            expect_same_bits(c.w, b.w);
        }
    }
}

INSTANTIATE_TEST_SUITE_P(SetSizes, SwapEquivariance, ::testing::Values(0, 1, 2));

TEST(HypothesisStatistic, NonNullRegionMostlyPositive) {
    int positive = 0, total = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto sim = small_sim(2000, 300 + s);
        const auto a = with_knockoffs(sim, 300 + s);
        const auto v = make_swap_mask(a.n(), a.p(), RngSeed(s, "v"));
        std::vector<std::vector<std::size_t>> ihat(4);
        for (std::size_t j = 0; j < 4; ++j) ihat[j] = sim.truth.relevant_covariates(j);
        const auto psi = build_partition(ihat, 8);
        const auto prior = prior_weights(a, v, RngSeed(s, "prior"), fast_stats());
        for (std::size_t j = 0; j < 4; ++j) {
            if (!sim.truth.affected(j)) continue;
            const std::size_t g = psi.groups(j) - 1;  // all interacting covariates equal 1
            const auto st = hypothesis_statistic(a, v, psi, prior, {j, g}, RngSeed(s, "h"), fast_stats());
            ++total;
            positive += st.w > 0.0;
        }
    }
    ASSERT_GT(total, 0);
    EXPECT_GE(positive, 0.8 * total);
}
