#pragma once

// A small feed-forward network with analytic reverse-mode gradients: a shared
// extractor (affine + LeakyReLU stack) feeding a softmax head over the C
// known classes and a bank of sigmoid rejection heads (one per class, packed
// as columns of a single affine layer). No autodiff graph — forward caches
// the activations, backward replays the chain rule by hand.

#include <cstddef>
#include <vector>

#include "hopencls/rng.hpp"
#include "hopencls/tensor.hpp"

namespace hopencls {

inline constexpr double kLeakySlope = 0.01;

// One affine layer. Weights are stored input-major (in x out) so a batch
// forward is a single row-major matmul: Y = X*W + b.
struct Affine {
    Tensor2 w;
    Tensor2 b;  // 1 x out, broadcast over rows

    Affine() = default;
    Affine(std::size_t in, std::size_t out) : w(in, out), b(1, out) {}
};

// Everything forward() must remember for backward(): the input batch, the
// extractor pre/post-activations, and both heads' clamped probabilities.
struct ActivationCache {
    Tensor2 input;
    std::vector<Tensor2> pre;   // per extractor layer, before LeakyReLU
    std::vector<Tensor2> post;  // per extractor layer, after LeakyReLU
    Tensor2 q_probs;            // n x C, softmax rows clamped into (0,1)
    Tensor2 pu_probs;           // n x H, per-head sigmoids clamped into (0,1)
    bool valid = false;
};

// Parameter-shaped gradient container. Tensor order matches
// Network::param_tensors() so optimizers can walk both in lockstep.
struct Gradients {
    std::vector<Affine> extractor;
    Affine q_head;
    Affine pu_heads;

    std::vector<Tensor2*> tensors();
    std::vector<const Tensor2*> tensors() const;
    void add(const Gradients& other);
    void scale(double s);
    bool all_finite() const;
};

class Network {
public:
    // He-style uniform init (limit sqrt(6/fan_in)), zero biases, drawn from
    // `rng` in a fixed layer order. `pu_head_count` is normally = classes;
    // the pooled-rejector ablation uses 1.
    Network(std::size_t d_in, const std::vector<std::size_t>& hidden, std::size_t classes,
            std::size_t pu_head_count, Rng& rng);

    std::size_t d_in() const { return d_in_; }
    std::size_t classes() const { return classes_; }
    std::size_t pu_head_count() const { return pu_heads_.w.cols; }

    // batch is n x d_in; fills the cache with q_probs (rows softmax-normalized
    // then clamped) and pu_probs (clamped sigmoids).
    ActivationCache forward(const Tensor2& batch) const;

    // dL_dq, dL_dpu are gradients w.r.t. the cached probabilities; the chain
    // through softmax/sigmoid (clamp treated as identity) happens here.
    // Extractor gradients accumulate contributions from both heads.
    Gradients backward(const ActivationCache& cache, const Tensor2& dL_dq,
                       const Tensor2& dL_dpu) const;

    Gradients zero_gradients() const;

    // Flat parameter views, fixed order: extractor layers (w, b each), then
    // q_head, then pu_heads. Used by the optimizer, checkpoints, and the
    // finite-difference harness.
    std::vector<Tensor2*> param_tensors();
    std::vector<const Tensor2*> param_tensors() const;

private:
    std::size_t d_in_ = 0;
    std::size_t classes_ = 0;
    std::vector<Affine> extractor_;
    Affine q_head_;
    Affine pu_heads_;  // feature_width x H, one sigmoid column per head
};

// Momentum SGD with L2 weight decay folded into the gradient:
//   g' = g + wd*theta;  v = m*v + g';  theta -= lr*v.
// Velocity buffers are created on the first step and persist across calls.
class SgdOptimizer {
public:
    SgdOptimizer(double momentum, double weight_decay);

    void step(Network& net, const Gradients& grads, double lr);

    double momentum() const { return momentum_; }
    double weight_decay() const { return weight_decay_; }
    // Checkpoint access to the velocity buffers (empty before the first step).
    Gradients& velocity() { return velocity_; }
    const Gradients& velocity() const { return velocity_; }
    bool has_velocity() const { return has_velocity_; }
    void set_velocity(Gradients v);

private:
    double momentum_;
    double weight_decay_;
    Gradients velocity_;
    bool has_velocity_ = false;
};

// base_lr * (1 + cos(pi * epoch / total_epochs)) / 2.
double cosine_lr(int epoch, int total_epochs, double base_lr);

}  // namespace hopencls
