#include "hopencls/losses.hpp"

#include <cmath>
#include <iostream>
#include <string>

#include "hopencls/errors.hpp"

namespace hopencls {

namespace {

void require_binary(int y) {
    if (y != 0 && y != 1) throw UsageError("binary label must be 0 or 1, got " + std::to_string(y));
}

double clamp_weight(double w) {
    if (w >= 0.0 && w <= 1.0) return w;
    const double clamped = w < 0.0 ? 0.0 : 1.0;
    std::cerr << "warning: confidence weight " << w << " outside [0,1], clamped to " << clamped
              << "\n";
    return clamped;
}

// Negative-branch Taylor polynomial sum_{o=1..t} f^o/o and its derivative,
// the power sum 1 + f + ... + f^{t-1}. Unclamped on purpose: exact 0 at f=0
// and exactly harmonic(t) at f=1.
void taylor_branch(double f, int t, double& value, double& dvalue) {
    value = 0.0;
    dvalue = 0.0;
    double fpow = 1.0;  // f^{o-1}
    for (int o = 1; o <= t; ++o) {
        dvalue += fpow;
        fpow *= f;
        value += fpow / o;
    }
}

}  // namespace

double clamp_prob(double p) {
    if (p < kProbEps) return kProbEps;
    if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
    return p;
}

double harmonic(int t) {
    if (t < 1) throw UsageError("truncation order must be >= 1, got " + std::to_string(t));
    double s = 0.0;
    for (int o = 1; o <= t; ++o) s += 1.0 / o;
    return s;
}

LossConfig::LossConfig(int taylor_order_, double beta_)
    : taylor_order(taylor_order_), beta(beta_), n_t(harmonic(taylor_order_)) {
    if (beta < 0.0) throw UsageError("beta must be >= 0");
}

double ce_loss(std::span<const double> q_probs, int label, std::span<double> grad) {
    const std::size_t c = q_probs.size();
    if (label < 1 || static_cast<std::size_t>(label) > c)
        throw UsageError("class label " + std::to_string(label) + " out of range 1.." +
                         std::to_string(c));
    if (grad.size() != c) throw UsageError("ce_loss gradient span has wrong length");
    const std::size_t idx = static_cast<std::size_t>(label) - 1;
    const double q = clamp_prob(q_probs[idx]);
    for (std::size_t j = 0; j < c; ++j) grad[j] = 0.0;
    grad[idx] = -1.0 / q;
    return -std::log(q);
}

LossGrad bce_loss(double f, int y) {
    require_binary(y);
    if (y == 1) {
        const double fc = clamp_prob(f);
        return {-std::log(fc), -1.0 / fc};
    }
    const double gc = clamp_prob(1.0 - f);
    return {-std::log(gc), 1.0 / gc};
}

LossGrad tbce_loss(double f, int y, int t) {
    require_binary(y);
    if (t < 1) throw UsageError("truncation order must be >= 1, got " + std::to_string(t));
    if (y == 1) {
        const double fc = clamp_prob(f);
        return {-std::log(fc), -1.0 / fc};
    }
    LossGrad out;
    taylor_branch(f, t, out.value, out.dprob);
    return out;
}

LossGrad wbce_loss(double f, int y, double w) {
    LossGrad out = bce_loss(f, y);
    if (y == 0) {
        const double wc = clamp_weight(w);
        out.value *= wc;
        out.dprob *= wc;
    }
    return out;
}

LossGrad wtbce_loss(double f, int y, int t, double w) {
    LossGrad out = tbce_loss(f, y, t);
    if (y == 0) {
        const double wc = clamp_weight(w);
        out.value *= wc;
        out.dprob *= wc;
    }
    return out;
}

KlGrad kl_align(double p, double q) {
    const double pc = clamp_prob(p);
    const double qc = clamp_prob(q);
    // S = 0.5 (p-q) d where d = log(p/q) - log((1-p)/(1-q)).
    const double d = std::log(pc / qc) - std::log((1.0 - pc) / (1.0 - qc));
    KlGrad out;
    out.value = 0.5 * (pc - qc) * d;
    out.dp = 0.5 * (d + (pc - qc) * (1.0 / pc + 1.0 / (1.0 - pc)));
    out.dq = 0.5 * (-d + (pc - qc) * (-1.0 / qc - 1.0 / (1.0 - qc)));
    return out;
}

double kl_align(const Tensor2& p, const Tensor2& q, Tensor2& dp, Tensor2& dq) {
    if (!same_shape(p, q)) throw ShapeError("kl_align: probability matrices differ in shape");
    if (!same_shape(p, dp) || !same_shape(p, dq))
        throw ShapeError("kl_align: gradient matrices differ in shape");
    const std::size_t n = p.data.size();
    if (n == 0) throw UsageError("kl_align: empty input");
    const double scale = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const KlGrad g = kl_align(p.data[i], q.data[i]);
        total += g.value;
        dp.data[i] = scale * g.dp;
        dq.data[i] = scale * g.dq;
    }
    return total * scale;
}

}  // namespace hopencls
