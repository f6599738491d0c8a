#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "fd_harness.hpp"
#include "hopencls/errors.hpp"
#include "hopencls/heads.hpp"
#include "hopencls/losses.hpp"
#include "hopencls/network.hpp"
#include "hopencls/rng.hpp"

using namespace hopencls;

namespace {

Tensor2 random_batch(std::size_t n, std::size_t d, Rng& rng) {
    Tensor2 x(n, d);
    for (double& v : x.data) v = rng.normal();
    return x;
}

}  // namespace

TEST_CASE("forward produces normalized class rows and open sigmoid heads") {
    Rng rng(1);
    Network net(5, {8, 6}, 3, 3, rng);
    const Tensor2 x = random_batch(4, 5, rng);
    const ActivationCache cache = net.forward(x);

    REQUIRE(cache.valid);
    REQUIRE(cache.q_probs.rows == 4);
    REQUIRE(cache.q_probs.cols == 3);
    REQUIRE(cache.pu_probs.rows == 4);
    REQUIRE(cache.pu_probs.cols == 3);

    for (std::size_t i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            const double q = cache.q_probs(i, c);
            CHECK(q > 0.0);
            CHECK(q < 1.0);
            sum += q;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        for (std::size_t h = 0; h < 3; ++h) {
            CHECK(cache.pu_probs(i, h) > 0.0);
            CHECK(cache.pu_probs(i, h) < 1.0);
        }
    }
}

TEST_CASE("forward rejects wrong widths and non-finite inputs") {
    Rng rng(2);
    Network net(5, {4}, 2, 2, rng);
    CHECK_THROWS_AS(net.forward(Tensor2(3, 4, 0.0)), ShapeError);

    Tensor2 bad(2, 5, 0.0);
    bad(1, 3) = std::nan("");
    CHECK_THROWS_AS(net.forward(bad), InputError);
}

TEST_CASE("initialization is seed-deterministic with bounded weights, zero biases") {
    Rng a(7), b(7);
    Network na(6, {10, 4}, 3, 3, a);
    Network nb(6, {10, 4}, 3, 3, b);

    const auto pa = na.param_tensors();
    const auto pb = nb.param_tensors();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->same_shape(*pb[i]));
        for (std::size_t k = 0; k < pa[i]->size(); ++k)
            CHECK(pa[i]->data[k] == pb[i]->data[k]);
    }

    // Layer 0 weights: fan_in 6 -> |w| <= sqrt(6/6) = 1; its bias all zero.
    const double limit = std::sqrt(6.0 / 6.0);
    for (double w : pa[0]->data) {
        CHECK(w >= -limit);
        CHECK(w <= limit);
    }
    for (double b0 : pa[1]->data) CHECK(b0 == 0.0);
}

TEST_CASE("zero dimensions are rejected") {
    Rng rng(3);
    CHECK_THROWS_AS(Network(0, {4}, 2, 2, rng), UsageError);
    CHECK_THROWS_AS(Network(4, {0}, 2, 2, rng), UsageError);
    CHECK_THROWS_AS(Network(4, {4}, 0, 1, rng), UsageError);
    CHECK_THROWS_AS(Network(4, {4}, 2, 0, rng), UsageError);
}

TEST_CASE("backward validates its cache and gradient shapes") {
    Rng rng(4);
    Network net(4, {5}, 2, 2, rng);
    const Tensor2 x = random_batch(3, 4, rng);
    const ActivationCache cache = net.forward(x);

    CHECK_THROWS_AS(net.backward(ActivationCache{}, Tensor2(3, 2), Tensor2(3, 2)), UsageError);
    CHECK_THROWS_AS(net.backward(cache, Tensor2(2, 2), Tensor2(3, 2)), ShapeError);
    CHECK_THROWS_AS(net.backward(cache, Tensor2(3, 2), Tensor2(3, 1)), ShapeError);
}

TEST_CASE("zero_gradients mirrors the parameter layout") {
    Rng rng(5);
    Network net(4, {6, 3}, 2, 2, rng);
    Gradients g = net.zero_gradients();
    const auto gt = g.tensors();
    const auto pt = net.param_tensors();
    REQUIRE(gt.size() == pt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        CHECK(gt[i]->same_shape(*pt[i]));
        for (double v : gt[i]->data) CHECK(v == 0.0);
    }
}

TEST_CASE("Gradients add and scale elementwise") {
    Rng rng(6);
    Network net(3, {4}, 2, 2, rng);
    Gradients a = net.zero_gradients();
    Gradients b = net.zero_gradients();
    a.tensors()[0]->data[0] = 2.0;
    b.tensors()[0]->data[0] = 3.0;
    a.add(b);
    CHECK(a.tensors()[0]->data[0] == 5.0);
    a.scale(0.5);
    CHECK(a.tensors()[0]->data[0] == 2.5);
    CHECK(a.all_finite());
    a.tensors()[1]->data[0] = INFINITY;
    CHECK_FALSE(a.all_finite());
}

// --- finite-difference checks, one per loss family -------------------------

TEST_CASE("cross-entropy through the network matches finite differences") {
    Rng rng(10);
    Network net(5, {7, 6}, 3, 3, rng);
    const Tensor2 x = random_batch(4, 5, rng);
    const std::vector<int> labels = {1, 3, 2, 1};

    const ActivationCache cache = net.forward(x);
    Tensor2 dq(4, 3, 0.0), dpu(4, 3, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<double> row(cache.q_probs.row(i).begin(), cache.q_probs.row(i).end());
        std::vector<double> g(3);
        ce_loss(row, labels[i], g);
        for (std::size_t c = 0; c < 3; ++c) dq(i, c) = g[c] / 4.0;
    }
    const Gradients analytic = net.backward(cache, dq, dpu);

    const auto res = fdtest::check(net, {x}, analytic, [&](const auto& caches) {
        double j = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            std::vector<double> row(caches[0].q_probs.row(i).begin(),
                                    caches[0].q_probs.row(i).end());
            std::vector<double> g(3);
            j += ce_loss(row, labels[i], g);
        }
        return j / 4.0;
    });
    CHECK(res.max_rel < 1e-4);
    CHECK(res.skip_fraction() < 0.05);
    CHECK(res.checked > 0);
}

TEST_CASE("truncated-BCE heads through the network match finite differences") {
    Rng rng(11);
    Network net(4, {6}, 2, 2, rng);
    const Tensor2 x = random_batch(5, 4, rng);
    const int t = 3;
    // Alternate positive/negative targets across entries.
    auto target = [](std::size_t i, std::size_t h) { return static_cast<int>((i + h) % 2); };

    const ActivationCache cache = net.forward(x);
    Tensor2 dq(5, 2, 0.0), dpu(5, 2, 0.0);
    const double scale = 1.0 / static_cast<double>(dpu.size());
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t h = 0; h < 2; ++h)
            dpu(i, h) = tbce_loss(cache.pu_probs(i, h), target(i, h), t).dprob * scale;
    const Gradients analytic = net.backward(cache, dq, dpu);

    const auto res = fdtest::check(net, {x}, analytic, [&](const auto& caches) {
        double j = 0.0;
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t h = 0; h < 2; ++h)
                j += tbce_loss(caches[0].pu_probs(i, h), target(i, h), t).value;
        return j * scale;
    });
    CHECK(res.max_rel < 1e-4);
    CHECK(res.skip_fraction() < 0.05);
}

TEST_CASE("confidence-weighted BCE through the network matches finite differences") {
    Rng rng(12);
    Network net(4, {5}, 2, 2, rng);
    const Tensor2 x = random_batch(4, 4, rng);
    Tensor2 w(4, 2);
    for (double& v : w.data) v = rng.uniform();

    const ActivationCache cache = net.forward(x);
    Tensor2 dq(4, 2, 0.0), dpu(4, 2, 0.0);
    const double scale = 1.0 / static_cast<double>(dpu.size());
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t h = 0; h < 2; ++h)
            dpu(i, h) = wbce_loss(cache.pu_probs(i, h), 0, w(i, h)).dprob * scale;
    const Gradients analytic = net.backward(cache, dq, dpu);

    const auto res = fdtest::check(net, {x}, analytic, [&](const auto& caches) {
        double j = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t h = 0; h < 2; ++h)
                j += wbce_loss(caches[0].pu_probs(i, h), 0, w(i, h)).value;
        return j * scale;
    });
    CHECK(res.max_rel < 1e-4);
    CHECK(res.skip_fraction() < 0.05);
}

TEST_CASE("the multi-head PU risk matches finite differences over both batches") {
    Rng rng(13);
    Network net(4, {6}, 3, 3, rng);
    const Tensor2 xk = random_batch(6, 4, rng);
    const Tensor2 xw = random_batch(5, 4, rng);
    const std::vector<int> labels = {1, 2, 3, 1, 2, 3};
    const PuLossSpec spec{true, 2};

    const ActivationCache ck = net.forward(xk);
    const ActivationCache cw = net.forward(xw);
    const MultiPuResult mpu = multi_pu_risk(ck.pu_probs, labels, cw.pu_probs, spec);

    Gradients analytic = net.backward(ck, Tensor2(6, 3, 0.0), mpu.d_known);
    analytic.add(net.backward(cw, Tensor2(5, 3, 0.0), mpu.d_wild));

    const auto res = fdtest::check(net, {xk, xw}, analytic, [&](const auto& caches) {
        return multi_pu_risk(caches[0].pu_probs, labels, caches[1].pu_probs, spec).risk;
    });
    CHECK(res.max_rel < 1e-4);
    CHECK(res.skip_fraction() < 0.05);
}

TEST_CASE("the alignment term propagates into both networks per finite differences") {
    Rng rng(14);
    Network net_a(4, {5}, 2, 2, rng);
    Network net_b(4, {5}, 2, 2, rng);
    const Tensor2 x = random_batch(4, 4, rng);

    // Gradient w.r.t. net_a's parameters, net_b frozen.
    {
        const ActivationCache ca = net_a.forward(x);
        const ActivationCache cb = net_b.forward(x);
        Tensor2 dp(4, 2), dq(4, 2);
        kl_align(ca.pu_probs, cb.pu_probs, dp, dq);
        const Gradients analytic = net_a.backward(ca, Tensor2(4, 2, 0.0), dp);

        const auto res = fdtest::check(net_a, {x}, analytic, [&](const auto& caches) {
            Tensor2 t1(4, 2), t2(4, 2);
            return kl_align(caches[0].pu_probs, net_b.forward(x).pu_probs, t1, t2);
        });
        CHECK(res.max_rel < 1e-4);
        CHECK(res.skip_fraction() < 0.05);
    }
    // And the mirrored side.
    {
        const ActivationCache ca = net_a.forward(x);
        const ActivationCache cb = net_b.forward(x);
        Tensor2 dp(4, 2), dq(4, 2);
        kl_align(ca.pu_probs, cb.pu_probs, dp, dq);
        const Gradients analytic = net_b.backward(cb, Tensor2(4, 2, 0.0), dq);

        const auto res = fdtest::check(net_b, {x}, analytic, [&](const auto& caches) {
            Tensor2 t1(4, 2), t2(4, 2);
            return kl_align(net_a.forward(x).pu_probs, caches[0].pu_probs, t1, t2);
        });
        CHECK(res.max_rel < 1e-4);
        CHECK(res.skip_fraction() < 0.05);
    }
}

TEST_CASE("a pooled single rejection head keeps working end to end") {
    Rng rng(15);
    Network net(4, {5}, 3, 1, rng);
    const Tensor2 x = random_batch(3, 4, rng);
    const ActivationCache cache = net.forward(x);
    CHECK(cache.pu_probs.cols == 1);

    Tensor2 dq(3, 3, 0.0), dpu(3, 1, 0.1);
    const Gradients g = net.backward(cache, dq, dpu);
    CHECK(g.all_finite());
}

// --- optimizer ----------------------------------------------------------------

TEST_CASE("a zero learning rate leaves parameters untouched") {
    Rng rng(20);
    Network net(3, {4}, 2, 2, rng);
    const std::vector<double> before = net.param_tensors()[0]->data;

    Gradients g = net.zero_gradients();
    for (auto* t : g.tensors())
        for (double& v : t->data) v = 1.0;

    SgdOptimizer opt(0.9, 1e-4);
    opt.step(net, g, 0.0);
    CHECK(net.param_tensors()[0]->data == before);
}

TEST_CASE("two momentum steps with a constant gradient follow the unrolled recursion") {
    Rng rng(21);
    Network net(3, {4}, 2, 2, rng);
    const double lr = 0.1, m = 0.9, gval = 0.25;
    const std::vector<double> theta0 = net.param_tensors()[0]->data;

    Gradients g = net.zero_gradients();
    for (auto* t : g.tensors())
        for (double& v : t->data) v = gval;

    SgdOptimizer opt(m, 0.0);
    opt.step(net, g, lr);
    const std::vector<double>& theta1 = net.param_tensors()[0]->data;
    for (std::size_t i = 0; i < theta0.size(); ++i)
        CHECK(theta1[i] == theta0[i] - lr * gval);

    const std::vector<double> snap1 = theta1;
    opt.step(net, g, lr);
    // v2 = m*g + g = 1.9 g at m = 0.9: the second step moves 1.9*lr*g.
    const double v2 = m * gval + gval;
    CHECK(v2 == 1.9 * gval);
    for (std::size_t i = 0; i < theta0.size(); ++i)
        CHECK(net.param_tensors()[0]->data[i] == snap1[i] - lr * v2);
}

TEST_CASE("weight decay folds into the gradient before the velocity update") {
    Rng rng(22);
    Network net(3, {4}, 2, 2, rng);
    const double lr = 0.05, wd = 0.01, gval = 0.5;
    const std::vector<double> theta0 = net.param_tensors()[0]->data;

    Gradients g = net.zero_gradients();
    for (auto* t : g.tensors())
        for (double& v : t->data) v = gval;

    SgdOptimizer opt(0.0, wd);
    opt.step(net, g, lr);
    for (std::size_t i = 0; i < theta0.size(); ++i)
        CHECK(net.param_tensors()[0]->data[i] == theta0[i] - lr * (gval + wd * theta0[i]));
}

TEST_CASE("optimizer rejects bad inputs") {
    Rng rng(23);
    Network net(3, {4}, 2, 2, rng);
    Gradients g = net.zero_gradients();
    SgdOptimizer opt(0.9, 0.0);
    CHECK_THROWS_AS(opt.step(net, g, -1.0), UsageError);

    g.tensors()[0]->data[0] = std::nan("");
    CHECK_THROWS_AS(opt.step(net, g, 0.1), NumericError);

    CHECK_THROWS_AS(SgdOptimizer(1.0, 0.0), UsageError);   // momentum must be < 1
    CHECK_THROWS_AS(SgdOptimizer(0.9, -0.1), UsageError);  // decay must be >= 0
}

TEST_CASE("velocity buffers appear on the first step and persist") {
    Rng rng(24);
    Network net(3, {4}, 2, 2, rng);
    SgdOptimizer opt(0.9, 0.0);
    CHECK_FALSE(opt.has_velocity());

    Gradients g = net.zero_gradients();
    g.tensors()[0]->data[0] = 1.0;
    opt.step(net, g, 0.1);
    CHECK(opt.has_velocity());
    CHECK(opt.velocity().tensors()[0]->data[0] == 1.0);
}

// --- cosine schedule ---------------------------------------------------------------

TEST_CASE("cosine schedule starts at the base rate and halves mid-run") {
    CHECK(cosine_lr(0, 100, 3e-4) == 3e-4);
    CHECK(cosine_lr(50, 100, 3e-4) == doctest::Approx(1.5e-4).epsilon(1e-12));
    CHECK(cosine_lr(99, 100, 3e-4) > 0.0);
}

TEST_CASE("cosine schedule decreases monotonically") {
    double prev = cosine_lr(0, 130, 1.0);
    for (int e = 1; e < 130; ++e) {
        const double lr = cosine_lr(e, 130, 1.0);
        CHECK(lr < prev);
        prev = lr;
    }
}

TEST_CASE("cosine schedule validates its arguments") {
    CHECK_THROWS_AS(cosine_lr(0, 0, 1.0), UsageError);
    CHECK_THROWS_AS(cosine_lr(-1, 10, 1.0), UsageError);
    CHECK_THROWS_AS(cosine_lr(10, 10, 1.0), UsageError);
}
