#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "fame/rng.hpp"

using fame::Rng;

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, MatchesReferenceEngine) {
    Rng a(7);
    std::mt19937_64 ref(7);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), ref());
}

TEST(Rng, DerivedSeedsAreDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t seed = 0; seed < 50; ++seed)
        for (std::uint64_t tag = 0; tag < 50; ++tag) seen.insert(fame::derive_seed(seed, tag));
    EXPECT_EQ(seen.size(), 2500u);
    EXPECT_EQ(fame::derive_seed(3, 9), fame::derive_seed(3, 9));
}

TEST(Rng, UniformMoments) {
    Rng rng(1);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sq += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
    EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMoments) {
    Rng rng(2);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal(3.0, 2.0);
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, 3.0, 0.03);
    EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 2.0, 0.03);
}

TEST(Rng, UniformIndexCoversRange) {
    Rng rng(3);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 500);
    EXPECT_THROW(rng.uniform_index(0), std::invalid_argument);
}

TEST(Rng, CategoricalFrequencies) {
    Rng rng(4);
    const std::vector<double> w{0.0, 2.0, 1.0, 0.0, 1.0};
    std::vector<int> counts(w.size(), 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(w)];
    EXPECT_EQ(counts[0], 0);
    EXPECT_EQ(counts[3], 0);
    EXPECT_NEAR(counts[1] / double(n), 0.5, 0.01);
    EXPECT_NEAR(counts[2] / double(n), 0.25, 0.01);
    EXPECT_THROW(rng.categorical(std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

TEST(Rng, SerializeRoundTripContinuesStream) {
    Rng a(5);
    for (int i = 0; i < 17; ++i) a.normal();
    a.normal();  // leaves a cached variate
    Rng b = Rng::deserialize(a.serialize());
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.normal(), b.normal());
    EXPECT_THROW(Rng::deserialize("garbage"), std::runtime_error);
}
