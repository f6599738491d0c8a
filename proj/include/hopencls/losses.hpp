#pragma once

// Scalar losses with analytic input-gradients: cross-entropy over class
// probabilities, BCE, truncated (Taylor) BCE, their confidence-weighted
// variants, and the symmetrised Bernoulli KL used to align the two networks.
//
// Convention: every loss here is a function of *probabilities*, not logits.
// Chaining through softmax/sigmoid is the network's job (see network.hpp).

#include <cstddef>
#include <span>

#include "hopencls/tensor.hpp"

namespace hopencls {

// Probabilities are clamped into [kProbEps, 1-kProbEps] before they feed a
// log (or a reciprocal). The truncated-BCE negative branch is a polynomial
// and is deliberately left unclamped so that its exact bounds
// 0 <= L(f,0,t) <= H_t hold at the endpoints f=0 and f=1.
inline constexpr double kProbEps = 1e-7;

double clamp_prob(double p);

// Partial harmonic sum H_t = sum_{o=1..t} 1/o, the upper bound of the
// truncated negative-branch loss. Summed in ascending o so that it is
// bitwise-identical to the t-term loss evaluated at f=1. t < 1 is a usage
// error.
double harmonic(int t);

// Bundles the truncation order with its derived bound; beta scales the KL
// alignment term in the overall training risk.
struct LossConfig {
    int taylor_order;
    double beta;
    double n_t;  // harmonic(taylor_order), computed once

    explicit LossConfig(int taylor_order = 2, double beta = 1.0);
};

// A scalar loss value together with d(value)/d(prob).
struct LossGrad {
    double value = 0.0;
    double dprob = 0.0;
};

// -log q[label]. `label` is 1-based (class indices are 1..C everywhere in
// the public API; 0 is reserved for "unknown"). Writes the gradient w.r.t.
// q_probs into `grad` (same length, overwritten).
double ce_loss(std::span<const double> q_probs, int label, std::span<double> grad);

// loss = -y log f - (1-y) log(1-f); grad = (1-y)/(1-f) - y/f.
LossGrad bce_loss(double f, int y);

// Truncated BCE: the negative branch -log(1-f) is replaced by its order-t
// Taylor polynomial sum_{o=1..t} f^o/o, whose gradient 1+f+...+f^{t-1} stays
// below BCE's 1/(1-f) for every f in (0,1). The positive branch is plain
// -log f. The gradient is evaluated as the power sum (not the geometric
// quotient) so it is exact at f=1 and carries no division.
LossGrad tbce_loss(double f, int y, int t);

// BCE with the negative branch scaled by a constant confidence weight
// w in [0,1]; out-of-range weights are clamped with a warning. No gradient
// flows into the weight.
LossGrad wbce_loss(double f, int y, double w);

// Truncated BCE with the negative branch scaled by a constant weight.
LossGrad wtbce_loss(double f, int y, int t, double w);

// Symmetrised KL between Bernoulli(p) and Bernoulli(q):
//   0.5 * [KL(p||q) + KL(q||p)] = 0.5 (p-q) [log(p/q) - log((1-p)/(1-q))]
// with gradients for both arguments. Nonnegative, zero iff p == q.
struct KlGrad {
    double value = 0.0;
    double dp = 0.0;
    double dq = 0.0;
};

KlGrad kl_align(double p, double q);

// Mean symmetrised KL across two equal-shape probability matrices
// (rows = samples, cols = per-class rejection heads). Gradients are written
// into dp/dq (overwritten, same shape), already scaled by 1/(rows*cols).
double kl_align(const Tensor2& p, const Tensor2& q, Tensor2& dp, Tensor2& dq);

}  // namespace hopencls
