#include <gtest/gtest.h>

#include "fame/warmup.hpp"

using namespace fame;

namespace {

EvalSummary summary(Candidate c, std::vector<double> returns) { return {c, std::move(returns)}; }

CandidateSummaries three(std::vector<double> meta, std::vector<double> fast, std::vector<double> random) {
    return {summary(Candidate::meta, std::move(meta)), summary(Candidate::fast, std::move(fast)),
            summary(Candidate::random, std::move(random))};
}

}  // namespace

TEST(Warmup, WelchMatchesReferenceValues) {
    // Reference p-values from an independent Welch implementation.
    EXPECT_NEAR(welch_one_sided_p(summary(Candidate::meta, {1, 2, 3, 4, 5.5}),
                                  summary(Candidate::fast, {0, 0.5, 1, 1.5, 0.2, 0.9})),
                0.016892827431978022, 1e-10);
    EXPECT_NEAR(welch_one_sided_p(summary(Candidate::meta, {0.2, 0.4, 0.1}),
                                  summary(Candidate::fast, {0.3, 0.5, 0.9, 0.6})),
                0.9615694796768304, 1e-10);
}

TEST(Warmup, WelchZeroVarianceCases) {
    EXPECT_EQ(welch_one_sided_p(summary(Candidate::meta, {1, 1}), summary(Candidate::fast, {0, 0})), 0.0);
    EXPECT_EQ(welch_one_sided_p(summary(Candidate::meta, {0, 0}), summary(Candidate::fast, {0, 0})), 1.0);
    EXPECT_THROW(welch_one_sided_p(summary(Candidate::meta, {1}), summary(Candidate::fast, {0, 0})),
                 std::invalid_argument);
}

TEST(Warmup, StrictModeNeedsSignificanceAgainstEveryCandidate) {
    const auto clear = three({10, 11, 10.5, 10.2}, {0, 1, 0.5, 0.2}, {0, 0.3, 0.1, 0.2});
    auto d = one_vs_all_test(clear, 0.05, WarmupMode::strict_test);
    EXPECT_EQ(d.chosen, Candidate::meta);
    EXPECT_TRUE(d.bc_enabled);
    ASSERT_TRUE(d.p_values);
    EXPECT_LT((*d.p_values)[0], 0.05);

    const auto close = three({1.0, 1.2, 0.9, 1.1}, {0.9, 1.3, 0.8, 1.1}, {0, 0.1, 0.2, 0});
    d = one_vs_all_test(close, 0.05, WarmupMode::strict_test);
    EXPECT_NE(d.chosen, Candidate::meta);
    EXPECT_FALSE(d.bc_enabled);
}

TEST(Warmup, EmpiricalModeRanksByMean) {
    auto d = one_vs_all_test(three({1.0, 1.2}, {0.9, 1.1}, {0, 0}), 0.05, WarmupMode::empirical_ranking);
    EXPECT_EQ(d.chosen, Candidate::meta);
    EXPECT_FALSE(d.p_values);
    d = one_vs_all_test(three({1.0, 1.0}, {1.0, 1.0}, {0, 0}), 0.05, WarmupMode::empirical_ranking);
    EXPECT_EQ(d.chosen, Candidate::fast);  // ties do not favor Meta
    d = one_vs_all_test(three({0, 0}, {0, 0.2}, {1, 1}), 0.05, WarmupMode::empirical_ranking);
    EXPECT_EQ(d.chosen, Candidate::random);
}

TEST(Warmup, FirstTaskHasOnlyRandom) {
    EXPECT_EQ(available_candidates(0), (std::array<bool, 3>{false, false, true}));
    CandidateSummaries only_random{std::nullopt, std::nullopt, summary(Candidate::random, {0, 1})};
    EXPECT_EQ(one_vs_all_test(only_random, 0.05, WarmupMode::strict_test).chosen, Candidate::random);
    EXPECT_THROW(one_vs_all_test(CandidateSummaries{}, 0.05, WarmupMode::strict_test), std::invalid_argument);
}

TEST(Warmup, EvaluateCandidatesChargesEverySimulatedStep) {
    int calls = 0;
    const auto eval = evaluate_candidates(
        [&](Candidate c) {
            ++calls;
            return EpisodeOutcome{static_cast<double>(c), 7};
        },
        {true, false, true}, 4);
    EXPECT_EQ(calls, 8);
    EXPECT_EQ(eval.steps, 56u);
    EXPECT_FALSE(eval.summaries[1]);
    EXPECT_DOUBLE_EQ(eval.summaries[2]->mean(), 2.0);
}

TEST(Warmup, ValueWarmStarts) {
    QTable prev(2, 2, 3.0);
    WarmupDecision d;
    d.chosen = Candidate::fast;
    EXPECT_EQ(apply_warmup(d, prev, 2, 2, 1.0).q, prev);
    d.chosen = Candidate::meta;
    auto ws = apply_warmup(d, prev, 2, 2, 1.0);
    EXPECT_TRUE(ws.bc_enabled);
    EXPECT_EQ(ws.q, QTable(2, 2));
    d.chosen = Candidate::random;
    EXPECT_FALSE(apply_warmup(d, prev, 2, 2, 1.0).bc_enabled);
}

TEST(Warmup, PolicyWarmStartsCopyParameters) {
    GaussianLearner prev(3, 1);
    prev.policy.mean = {1, 2, 3};
    prev.baseline = {5, 5, 5};
    GaussianMetaState meta(3, 1);
    meta.policy.mean = {-1, -2, -3};
    WarmupDecision d;
    d.chosen = Candidate::meta;
    auto learner = apply_warmup(d, prev, meta);
    EXPECT_EQ(learner.policy, meta.policy);
    EXPECT_EQ(learner.baseline, std::vector<double>(3, 0.0));
    d.chosen = Candidate::fast;
    EXPECT_EQ(apply_warmup(d, prev, meta), prev);
    d.chosen = Candidate::random;
    EXPECT_EQ(apply_warmup(d, prev, meta), GaussianLearner(3, 1));
}

TEST(Warmup, StrictModeFalsePositiveRateIsNearAlpha) {
    Rng rng(51);
    int meta_chosen = 0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
        CandidateSummaries s;
        for (Candidate c : kCandidates) {
            EvalSummary e{c, {}};
            for (int i = 0; i < 10; ++i) e.returns.push_back(rng.normal());
            s[static_cast<std::size_t>(c)] = e;
        }
        meta_chosen += one_vs_all_test(s, 0.05, WarmupMode::strict_test).chosen == Candidate::meta;
    }
    EXPECT_LE(meta_chosen / double(trials), 0.07);
}
