#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "hopencls/rng.hpp"

using namespace hopencls;

TEST_CASE("identical seeds reproduce the exact draw sequence") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.uniform() == b.uniform());
        CHECK(a.normal() == b.normal());
        CHECK(a.below(17) == b.below(17));
    }
}

TEST_CASE("uniform stays in [0,1) and covers the range") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("uniform(lo,hi) respects its bounds") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-3.0, 2.0);
        CHECK(u >= -3.0);
        CHECK(u < 2.0);
    }
}

TEST_CASE("normal draws have roughly standard moments") {
    Rng rng(11);
    const int n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    // 3 sigma of the sampling noise: sd(mean) = 1/sqrt(n), sd(var) ~ sqrt(2/n)
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("normal(mean, stddev) shifts and scales") {
    Rng a(5), b(5);
    for (int i = 0; i < 50; ++i) {
        const double z = a.normal();
        CHECK(b.normal(2.0, 0.5) == 2.0 + 0.5 * z);
    }
}

TEST_CASE("below stays under its bound and hits every residue") {
    Rng rng(3);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t v = rng.below(5);
        CHECK(v < 5);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("categorical never picks zero-weight entries and follows the masses") {
    Rng rng(13);
    const std::vector<double> w = {0.0, 2.0, 0.0, 1.0};
    int counts[4] = {0, 0, 0, 0};
    const int n = 30000;
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(w)];
    CHECK(counts[0] == 0);
    CHECK(counts[2] == 0);
    // index 1 expected at 2/3; allow 3 sigma binomial noise
    const double p = 2.0 / 3.0;
    const double sd = std::sqrt(p * (1 - p) * n);
    CHECK(std::abs(counts[1] - p * n) < 3.0 * sd);
}

TEST_CASE("shuffle permutes without loss and is seed-deterministic") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    std::vector<int> w = v;

    Rng a(99), b(99);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);  // same seed, same permutation

    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("state round-trips through save/restore") {
    Rng rng(42);
    for (int i = 0; i < 10; ++i) rng.uniform();
    const std::string snap = rng.state();

    std::vector<double> ahead;
    for (int i = 0; i < 20; ++i) ahead.push_back(rng.uniform());

    rng.restore(snap);
    for (int i = 0; i < 20; ++i) CHECK(rng.uniform() == ahead[i]);
}

TEST_CASE("mix_seed separates streams of the same base seed") {
    std::set<std::uint64_t> derived;
    for (std::uint64_t s = 0; s < 16; ++s) derived.insert(mix_seed(1, s));
    CHECK(derived.size() == 16);
    CHECK(mix_seed(1, 0) != mix_seed(2, 0));
    CHECK(mix_seed(1, 0) == mix_seed(1, 0));

    // Streams must not replay each other's draws.
    Rng a(mix_seed(7, 0)), b(mix_seed(7, 1));
    int equal = 0;
    for (int i = 0; i < 100; ++i)
        if (a.uniform() == b.uniform()) ++equal;
    CHECK(equal == 0);
}
