#include <cmath>
#include <vector>

#include "doctest.h"
#include "hopencls/confidence.hpp"
#include "hopencls/errors.hpp"
#include "hopencls/rng.hpp"

using namespace hopencls;

TEST_CASE("continuous updates blend toward the probability") {
    CHECK(ema_update(1.0, 0.4, 0.9, 0.95, UpdateMode::Continuous) ==
          doctest::Approx(0.9 * 1.0 + 0.1 * 0.4).epsilon(1e-15));
    CHECK(ema_update(0.0, 1.0, 0.5, 0.95, UpdateMode::Continuous) == 0.5);
}

TEST_CASE("discrete updates blend toward a threshold indicator, inclusive") {
    CHECK(ema_update(1.0, 0.96, 0.9, 0.95, UpdateMode::Discrete) == 0.9 * 1.0 + 0.1 * 1.0);
    CHECK(ema_update(1.0, 0.95, 0.9, 0.95, UpdateMode::Discrete) == 0.9 * 1.0 + 0.1 * 1.0);
    CHECK(ema_update(1.0, 0.94, 0.9, 0.95, UpdateMode::Discrete) ==
          doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("the default pairing tracks raw probability on one side, indicator on the other") {
    const auto [mode_c, mode_e] = default_modes();
    CHECK(mode_c == UpdateMode::Continuous);
    CHECK(mode_e == UpdateMode::Discrete);
}

TEST_CASE("repeated continuous updates follow the closed form a^k (1-p) + p") {
    for (double alpha : {0.5, 0.9, 0.99}) {
        for (double p : {0.0, 0.3, 0.7, 1.0}) {
            double w = 1.0;
            for (int k = 1; k <= 50; ++k) {
                w = ema_update(w, p, alpha, 0.95, UpdateMode::Continuous);
                const double closed = std::pow(alpha, k) * (1.0 - p) + p;
                CHECK(std::abs(w - closed) < 1e-12);
            }
        }
    }
}

TEST_CASE("weights start at 1 for every sample and head") {
    const ConfidenceState st(4, 3, 0.9, 0.95, UpdateMode::Continuous, UpdateMode::Discrete);
    CHECK(st.n_wild() == 4);
    CHECK(st.heads() == 3);
    for (double v : st.w_c().data) CHECK(v == 1.0);
    for (double v : st.w_e().data) CHECK(v == 1.0);
}

TEST_CASE("the two weight families are driven by the opposite network's confidence") {
    // alpha = 0.5 so one update moves halfway. p_c = 1.0, p_e = 0.0:
    // w_c consumes p_e (continuous toward 0.0), w_e consumes p_c (indicator
    // of 1.0 >= tau fires).
    ConfidenceState st(1, 1, 0.5, 0.95, UpdateMode::Continuous, UpdateMode::Discrete);
    const std::vector<double> p_c = {1.0};
    const std::vector<double> p_e = {0.0};
    st.update(0, p_c, p_e);
    CHECK(st.w_c()(0, 0) == 0.5 * 1.0 + 0.5 * 0.0);
    CHECK(st.w_e()(0, 0) == 0.5 * 1.0 + 0.5 * 1.0);
}

TEST_CASE("weights remain inside [0,1] under arbitrary update streams") {
    ConfidenceState st(2, 2, 0.9, 0.95, UpdateMode::Continuous, UpdateMode::Discrete);
    Rng rng(41);
    for (int it = 0; it < 500; ++it) {
        const std::vector<double> p_c = {rng.uniform(), rng.uniform()};
        const std::vector<double> p_e = {rng.uniform(), rng.uniform()};
        st.update(it % 2, p_c, p_e);
    }
    for (double v : st.w_c().data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    for (double v : st.w_e().data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("constructor and update validate their arguments") {
    CHECK_THROWS_AS(ConfidenceState(2, 2, 1.0, 0.95, UpdateMode::Continuous,
                                    UpdateMode::Discrete),
                    UsageError);  // alpha must be < 1
    CHECK_THROWS_AS(ConfidenceState(2, 2, -0.1, 0.95, UpdateMode::Continuous,
                                    UpdateMode::Discrete),
                    UsageError);
    CHECK_THROWS_AS(ConfidenceState(2, 2, 0.9, 0.0, UpdateMode::Continuous,
                                    UpdateMode::Discrete),
                    UsageError);  // tau in (0,1)
    CHECK_THROWS_AS(ConfidenceState(2, 2, 0.9, 1.0, UpdateMode::Continuous,
                                    UpdateMode::Discrete),
                    UsageError);

    ConfidenceState st(2, 2, 0.9, 0.95, UpdateMode::Continuous, UpdateMode::Discrete);
    const std::vector<double> p = {0.5, 0.5};
    CHECK_THROWS_AS(st.update(2, p, p), UsageError);  // sample index out of range
    const std::vector<double> short_p = {0.5};
    CHECK_THROWS_AS(st.update(0, short_p, p), UsageError);
    CHECK_THROWS_AS(st.update_head(0, 2, 0.5, 0.5), UsageError);  // head out of range
}

TEST_CASE("ema_update rejects out-of-range probabilities") {
    CHECK_THROWS_AS(ema_update(0.5, 1.5, 0.9, 0.95, UpdateMode::Continuous), UsageError);
    CHECK_THROWS_AS(ema_update(1.5, 0.5, 0.9, 0.95, UpdateMode::Continuous), UsageError);
}

TEST_CASE("restore replaces the weights and enforces matching shapes") {
    ConfidenceState st(2, 2, 0.9, 0.95, UpdateMode::Continuous, UpdateMode::Discrete);
    Tensor2 wc(2, 2, 0.25), we(2, 2, 0.75);
    st.restore(wc, we);
    CHECK(st.w_c()(1, 1) == 0.25);
    CHECK(st.w_e()(0, 0) == 0.75);
    CHECK_THROWS_AS(st.restore(Tensor2(3, 2, 0.5), we), ShapeError);
}
