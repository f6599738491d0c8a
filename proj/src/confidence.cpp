#include "hopencls/confidence.hpp"

#include <string>

#include "hopencls/errors.hpp"

namespace hopencls {

double ema_update(double w, double p, double alpha, double tau, UpdateMode mode) {
    if (w < 0.0 || w > 1.0 || p < 0.0 || p > 1.0)
        throw UsageError("ema_update: weight and probability must lie in [0,1]");
    const double target = mode == UpdateMode::Continuous ? p : (p >= tau ? 1.0 : 0.0);
    return alpha * w + (1.0 - alpha) * target;
}

std::pair<UpdateMode, UpdateMode> default_modes() {
    return {UpdateMode::Continuous, UpdateMode::Discrete};
}

ConfidenceState::ConfidenceState(std::size_t n_wild, std::size_t heads, double alpha, double tau,
                                 UpdateMode mode_c, UpdateMode mode_e)
    : w_c_(n_wild, heads, 1.0),
      w_e_(n_wild, heads, 1.0),
      alpha_(alpha),
      tau_(tau),
      mode_c_(mode_c),
      mode_e_(mode_e) {
    if (alpha < 0.0 || alpha >= 1.0) throw UsageError("alpha must be in [0,1)");
    if (tau <= 0.0 || tau >= 1.0) throw UsageError("tau must be in (0,1)");
}

void ConfidenceState::update(std::size_t sample_idx, std::span<const double> p_c,
                             std::span<const double> p_e) {
    if (p_c.size() != heads() || p_e.size() != heads())
        throw UsageError("confidence update needs one probability per head");
    for (std::size_t h = 0; h < heads(); ++h)
        update_head(sample_idx, h, p_c[h], p_e[h]);
}

void ConfidenceState::update_head(std::size_t sample_idx, std::size_t head, double p_c,
                                  double p_e) {
    if (sample_idx >= n_wild())
        throw UsageError("wild sample index " + std::to_string(sample_idx) + " out of range");
    if (head >= heads()) throw UsageError("head index out of range");
    if (p_c < 0.0 || p_c > 1.0 || p_e < 0.0 || p_e > 1.0)
        throw UsageError("confidence probabilities must lie in [0,1]");
    // Crossed on purpose: each network's weights listen to the other network.
    w_c_(sample_idx, head) = ema_update(w_c_(sample_idx, head), p_e, alpha_, tau_, mode_c_);
    w_e_(sample_idx, head) = ema_update(w_e_(sample_idx, head), p_c, alpha_, tau_, mode_e_);
}

void ConfidenceState::restore(const Tensor2& w_c, const Tensor2& w_e) {
    if (!w_c.same_shape(w_c_) || !w_e.same_shape(w_e_))
        throw ShapeError("confidence restore: shape mismatch");
    w_c_ = w_c;
    w_e_ = w_e;
}

}  // namespace hopencls
