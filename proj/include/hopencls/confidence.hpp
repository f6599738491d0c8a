#pragma once

// EMA confidence weights for the gradient-expansion losses. One weight pair
// (w_c for the truncated-BCE side, w_e for the BCE side) per wild sample and
// rejection head, all starting at 1. The coupling is deliberately crossed:
// w_c is driven by the *other* network's confidence p_e, and w_e by p_c, so
// the two networks teach each other which wild samples look unknown.

#include <cstddef>
#include <span>
#include <utility>

#include "hopencls/tensor.hpp"

namespace hopencls {

enum class UpdateMode { Continuous, Discrete };

// Continuous: w <- a*w + (1-a)*p. Discrete: w <- a*w + (1-a)*[p >= tau].
double ema_update(double w, double p, double alpha, double tau, UpdateMode mode);

// Default pairing: the truncated-BCE weight tracks the raw probability, the
// BCE weight tracks its thresholded version.
std::pair<UpdateMode, UpdateMode> default_modes();  // (mode_c, mode_e)

class ConfidenceState {
public:
    ConfidenceState() = default;
    ConfidenceState(std::size_t n_wild, std::size_t heads, double alpha, double tau,
                    UpdateMode mode_c, UpdateMode mode_e);

    std::size_t n_wild() const { return w_c_.rows; }
    std::size_t heads() const { return w_c_.cols; }
    double alpha() const { return alpha_; }
    double tau() const { return tau_; }
    UpdateMode mode_c() const { return mode_c_; }
    UpdateMode mode_e() const { return mode_e_; }

    const Tensor2& w_c() const { return w_c_; }
    const Tensor2& w_e() const { return w_e_; }

    // One EMA step for every head of one wild sample. Note the cross:
    // w_c consumes p_e and w_e consumes p_c.
    void update(std::size_t sample_idx, std::span<const double> p_c,
                std::span<const double> p_e);

    // Scalar variant for a single (sample, head) pair.
    void update_head(std::size_t sample_idx, std::size_t head, double p_c, double p_e);

    // Checkpoint restore; shapes must match the current state.
    void restore(const Tensor2& w_c, const Tensor2& w_e);

private:
    Tensor2 w_c_;  // n_wild x heads, in [0,1]
    Tensor2 w_e_;
    double alpha_ = 0.9;
    double tau_ = 0.95;
    UpdateMode mode_c_ = UpdateMode::Continuous;
    UpdateMode mode_e_ = UpdateMode::Discrete;
};

}  // namespace hopencls
