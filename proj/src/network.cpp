#include "hopencls/network.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hopencls/errors.hpp"
#include "hopencls/losses.hpp"

namespace hopencls {

namespace {

// Y = X*W + b, b broadcast over rows.
Tensor2 affine_forward(const Tensor2& x, const Affine& layer) {
    Tensor2 y = matmul(x, layer.w);
    for (std::size_t i = 0; i < y.rows; ++i) {
        double* row = y.data.data() + i * y.cols;
        for (std::size_t j = 0; j < y.cols; ++j) row[j] += layer.b.data[j];
    }
    return y;
}

// Accumulates dW = X^T * dY, db = column sums of dY; returns dX = dY * W^T.
Tensor2 affine_backward(const Tensor2& x, const Affine& layer, const Tensor2& dy,
                        Affine& grad) {
    grad.w = matmul_tn(x, dy);
    grad.b = Tensor2(1, dy.cols);
    for (std::size_t i = 0; i < dy.rows; ++i) {
        const double* row = dy.data.data() + i * dy.cols;
        for (std::size_t j = 0; j < dy.cols; ++j) grad.b.data[j] += row[j];
    }
    return matmul_nt(dy, layer.w);
}

void init_affine(Affine& layer, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.w.rows));
    for (double& v : layer.w.data) v = rng.uniform(-limit, limit);
    layer.b.fill(0.0);
}

void for_each_tensor(std::vector<Affine>& extractor, Affine& q_head, Affine& pu_heads,
                     std::vector<Tensor2*>& out) {
    for (Affine& layer : extractor) {
        out.push_back(&layer.w);
        out.push_back(&layer.b);
    }
    out.push_back(&q_head.w);
    out.push_back(&q_head.b);
    out.push_back(&pu_heads.w);
    out.push_back(&pu_heads.b);
}

}  // namespace

std::vector<Tensor2*> Gradients::tensors() {
    std::vector<Tensor2*> out;
    for_each_tensor(extractor, q_head, pu_heads, out);
    return out;
}

std::vector<const Tensor2*> Gradients::tensors() const {
    std::vector<Tensor2*> mut;
    for_each_tensor(const_cast<std::vector<Affine>&>(extractor), const_cast<Affine&>(q_head),
                    const_cast<Affine&>(pu_heads), mut);
    return {mut.begin(), mut.end()};
}

void Gradients::add(const Gradients& other) {
    auto mine = tensors();
    auto theirs = other.tensors();
    if (mine.size() != theirs.size()) throw ShapeError("gradient structures differ");
    for (std::size_t k = 0; k < mine.size(); ++k) {
        if (!same_shape(*mine[k], *theirs[k])) throw ShapeError("gradient tensor shapes differ");
        for (std::size_t i = 0; i < mine[k]->data.size(); ++i)
            mine[k]->data[i] += theirs[k]->data[i];
    }
}

void Gradients::scale(double s) {
    for (Tensor2* t : tensors())
        for (double& v : t->data) v *= s;
}

bool Gradients::all_finite() const {
    for (const Tensor2* t : tensors())
        if (!t->all_finite()) return false;
    return true;
}

Network::Network(std::size_t d_in, const std::vector<std::size_t>& hidden, std::size_t classes,
                 std::size_t pu_head_count, Rng& rng)
    : d_in_(d_in), classes_(classes) {
    if (d_in == 0 || classes == 0 || pu_head_count == 0)
        throw UsageError("network dimensions must be positive");
    std::size_t width = d_in;
    for (std::size_t h : hidden) {
        if (h == 0) throw UsageError("hidden layer width must be positive");
        extractor_.emplace_back(width, h);
        width = h;
    }
    q_head_ = Affine(width, classes);
    pu_heads_ = Affine(width, pu_head_count);
    for (Affine& layer : extractor_) init_affine(layer, rng);
    init_affine(q_head_, rng);
    init_affine(pu_heads_, rng);
}

ActivationCache Network::forward(const Tensor2& batch) const {
    if (batch.cols != d_in_)
        throw ShapeError("forward: batch has " + std::to_string(batch.cols) +
                         " columns, network expects " + std::to_string(d_in_));
    if (!batch.all_finite()) throw InputError("forward: non-finite value in input batch");

    ActivationCache cache;
    cache.input = batch;
    const Tensor2* cur = &cache.input;
    for (const Affine& layer : extractor_) {
        Tensor2 pre = affine_forward(*cur, layer);
        Tensor2 post = pre;
        for (double& v : post.data)
            if (v < 0.0) v *= kLeakySlope;
        cache.pre.push_back(std::move(pre));
        cache.post.push_back(std::move(post));
        cur = &cache.post.back();
    }

    // Softmax per row (max-shifted), then clamp. C is small, so the clamp
    // perturbs row sums by at most C*kProbEps.
    Tensor2 q_logits = affine_forward(*cur, q_head_);
    cache.q_probs = Tensor2(q_logits.rows, q_logits.cols);
    for (std::size_t i = 0; i < q_logits.rows; ++i) {
        const double* z = q_logits.data.data() + i * q_logits.cols;
        double* q = cache.q_probs.data.data() + i * q_logits.cols;
        double zmax = z[0];
        for (std::size_t j = 1; j < q_logits.cols; ++j) zmax = std::max(zmax, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < q_logits.cols; ++j) {
            q[j] = std::exp(z[j] - zmax);
            sum += q[j];
        }
        for (std::size_t j = 0; j < q_logits.cols; ++j) q[j] = clamp_prob(q[j] / sum);
    }

    Tensor2 pu_logits = affine_forward(*cur, pu_heads_);
    cache.pu_probs = Tensor2(pu_logits.rows, pu_logits.cols);
    for (std::size_t i = 0; i < pu_logits.data.size(); ++i)
        cache.pu_probs.data[i] = clamp_prob(1.0 / (1.0 + std::exp(-pu_logits.data[i])));

    cache.valid = true;
    return cache;
}

Gradients Network::backward(const ActivationCache& cache, const Tensor2& dL_dq,
                            const Tensor2& dL_dpu) const {
    if (!cache.valid) throw UsageError("backward: cache not produced by forward");
    if (!same_shape(dL_dq, cache.q_probs) || !same_shape(dL_dpu, cache.pu_probs))
        throw ShapeError("backward: upstream gradient shapes do not match forward outputs");

    // Through softmax (clamp treated as identity):
    // dz_j = q_j * (dq_j - sum_k dq_k q_k).
    Tensor2 dq_logits(dL_dq.rows, dL_dq.cols);
    for (std::size_t i = 0; i < dL_dq.rows; ++i) {
        const double* q = cache.q_probs.data.data() + i * dL_dq.cols;
        const double* dq = dL_dq.data.data() + i * dL_dq.cols;
        double* dz = dq_logits.data.data() + i * dL_dq.cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < dL_dq.cols; ++j) dot += dq[j] * q[j];
        for (std::size_t j = 0; j < dL_dq.cols; ++j) dz[j] = q[j] * (dq[j] - dot);
    }

    // Through each sigmoid head: dz = df * f * (1 - f).
    Tensor2 dpu_logits(dL_dpu.rows, dL_dpu.cols);
    for (std::size_t i = 0; i < dL_dpu.data.size(); ++i) {
        const double f = cache.pu_probs.data[i];
        dpu_logits.data[i] = dL_dpu.data[i] * f * (1.0 - f);
    }

    Gradients grads;
    grads.extractor.resize(extractor_.size());
    const Tensor2& features = cache.post.empty() ? cache.input : cache.post.back();
    Tensor2 dfeat = affine_backward(features, q_head_, dq_logits, grads.q_head);
    Tensor2 dfeat_pu = affine_backward(features, pu_heads_, dpu_logits, grads.pu_heads);
    for (std::size_t i = 0; i < dfeat.data.size(); ++i) dfeat.data[i] += dfeat_pu.data[i];

    for (std::size_t l = extractor_.size(); l-- > 0;) {
        // Through LeakyReLU: slope 1 where pre > 0, else kLeakySlope.
        const Tensor2& pre = cache.pre[l];
        for (std::size_t i = 0; i < dfeat.data.size(); ++i)
            if (pre.data[i] <= 0.0) dfeat.data[i] *= kLeakySlope;
        const Tensor2& layer_in = l == 0 ? cache.input : cache.post[l - 1];
        dfeat = affine_backward(layer_in, extractor_[l], dfeat, grads.extractor[l]);
    }
    return grads;
}

Gradients Network::zero_gradients() const {
    Gradients g;
    for (const Affine& layer : extractor_) g.extractor.emplace_back(layer.w.rows, layer.w.cols);
    g.q_head = Affine(q_head_.w.rows, q_head_.w.cols);
    g.pu_heads = Affine(pu_heads_.w.rows, pu_heads_.w.cols);
    return g;
}

std::vector<Tensor2*> Network::param_tensors() {
    std::vector<Tensor2*> out;
    for_each_tensor(extractor_, q_head_, pu_heads_, out);
    return out;
}

std::vector<const Tensor2*> Network::param_tensors() const {
    std::vector<Tensor2*> mut;
    for_each_tensor(const_cast<std::vector<Affine>&>(extractor_), const_cast<Affine&>(q_head_),
                    const_cast<Affine&>(pu_heads_), mut);
    return {mut.begin(), mut.end()};
}

SgdOptimizer::SgdOptimizer(double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
    if (momentum < 0.0 || momentum >= 1.0) throw UsageError("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw UsageError("weight_decay must be >= 0");
}

void SgdOptimizer::step(Network& net, const Gradients& grads, double lr) {
    if (lr < 0.0) throw UsageError("learning rate must be >= 0");
    if (!grads.all_finite())
        throw NumericError("optimizer step received a non-finite gradient");
    auto params = net.param_tensors();
    auto gs = grads.tensors();
    if (params.size() != gs.size()) throw ShapeError("gradients do not match network layout");
    if (!has_velocity_) {
        velocity_ = Gradients{grads};
        for (Tensor2* t : velocity_.tensors()) t->fill(0.0);
        has_velocity_ = true;
    }
    auto vs = velocity_.tensors();
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor2& p = *params[k];
        const Tensor2& g = *gs[k];
        Tensor2& v = *vs[k];
        if (!same_shape(p, g) || !same_shape(p, v))
            throw ShapeError("gradient tensor shapes do not match parameters");
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double gi = g.data[i] + weight_decay_ * p.data[i];
            v.data[i] = momentum_ * v.data[i] + gi;
            p.data[i] -= lr * v.data[i];
        }
    }
}

void SgdOptimizer::set_velocity(Gradients v) {
    velocity_ = std::move(v);
    has_velocity_ = true;
}

double cosine_lr(int epoch, int total_epochs, double base_lr) {
    if (total_epochs <= 0) throw UsageError("total_epochs must be >= 1");
    if (epoch < 0 || epoch >= total_epochs)
        throw UsageError("epoch " + std::to_string(epoch) + " outside [0, " +
                         std::to_string(total_epochs) + ")");
    const double phase = std::numbers::pi * static_cast<double>(epoch) /
                         static_cast<double>(total_epochs);
    return base_lr * (1.0 + std::cos(phase)) / 2.0;
}

}  // namespace hopencls
