#include <bilstm_ae/rng.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

using namespace bilstm_ae;

namespace {

// Straight transcription of the published xoshiro256** and SplitMix64 reference code.
struct ReferenceXoshiro {
    std::uint64_t s[4];

    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    explicit ReferenceXoshiro(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : s) {
            std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            w = z ^ (z >> 31);
        }
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }
};

} // namespace

TEST(SplitMix64, KnownOutputsFromZero) {
    std::uint64_t state = 0;
    EXPECT_EQ(splitmix64(state), 0xe220a8397b1dcdafULL);
    EXPECT_EQ(splitmix64(state), 0x6e789e6aa1b965f4ULL);
    EXPECT_EQ(splitmix64(state), 0x06c45d188009454fULL);
}

TEST(Rng, FrozenVectors) {
    Rng a(0);
    EXPECT_EQ(a.next_u64(), 0x99ec5f36cb75f2b4ULL);
    EXPECT_EQ(a.next_u64(), 0xbf6e1f784956452aULL);
    EXPECT_EQ(a.next_u64(), 0x1a5f849d4933e6e0ULL);
    EXPECT_EQ(a.next_u64(), 0x6aa594f1262d2d2cULL);

    Rng b(42);
    EXPECT_DOUBLE_EQ(b.uniform(), 0.08386297105988216);
    EXPECT_DOUBLE_EQ(b.uniform(), 0.3789802506626686);
}

TEST(Rng, MatchesReferenceImplementation) {
    for (std::uint64_t seed : {1ULL, 7ULL, 0xdeadbeefULL, ~0ULL}) {
        Rng rng(seed);
        ReferenceXoshiro ref(seed);
        for (int k = 0; k < 1000; ++k) ASSERT_EQ(rng.next_u64(), ref.next());
    }
}

TEST(Rng, SameSeedSameSequence) {
    Rng a(123), b(123);
    for (int k = 0; k < 100; ++k) {
        EXPECT_EQ(a.uniform(), b.uniform());
        EXPECT_EQ(a.normal(), b.normal());
        EXPECT_EQ(a.below(17), b.below(17));
    }
    EXPECT_EQ(a.seed(), 123u);
}

TEST(Rng, UniformRange) {
    Rng rng(8);
    for (int k = 0; k < 10000; ++k) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double v = rng.uniform(-2.0, 3.0);
        ASSERT_GE(v, -2.0);
        ASSERT_LT(v, 3.0);
    }
}

TEST(Rng, BelowIsBoundedAndCoversRange) {
    Rng rng(21);
    std::array<int, 7> hits{};
    for (int k = 0; k < 7000; ++k) {
        const auto v = rng.below(7);
        ASSERT_LT(v, 7u);
        ++hits[v];
    }
    for (int h : hits) EXPECT_GT(h, 800);
    EXPECT_THROW(rng.below(0), ArgumentError);
}

TEST(Rng, NormalMoments) {
    Rng rng(99);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
        const double z = rng.normal(1.0, 2.0);
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    EXPECT_NEAR(mean, 1.0, 4.0 * 2.0 / std::sqrt(double(n)));
    EXPECT_NEAR(var, 4.0, 0.06);
}

TEST(Rng, ShuffleIsPermutationAndDeterministic) {
    std::vector<int> a(50), b(50);
    std::iota(a.begin(), a.end(), 0);
    b = a;
    Rng r1(4), r2(4);
    r1.shuffle(std::span<int>(a));
    r2.shuffle(std::span<int>(b));
    EXPECT_EQ(a, b);
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < 50; ++k) EXPECT_EQ(sorted[k], k);
    std::vector<int> ident(50);
    std::iota(ident.begin(), ident.end(), 0);
    EXPECT_NE(a, ident);
}

TEST(DeriveSeed, DistinctStreams) {
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
    EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}
