#include "hopencls/heads.hpp"

#include <algorithm>
#include <iostream>
#include <string>

#include "hopencls/errors.hpp"
#include "hopencls/losses.hpp"

namespace hopencls {

namespace {

LossGrad eval_loss(const PuLossSpec& spec, double f, int y, double w) {
    if (spec.taylor) return wtbce_loss(f, y, spec.taylor_order, w);
    return wbce_loss(f, y, w);
}

}  // namespace

MultiPuResult multi_pu_risk(const Tensor2& pu_known, std::span<const int> known_labels,
                            const Tensor2& pu_wild, const PuLossSpec& loss,
                            const Tensor2* wild_weights) {
    const std::size_t heads = pu_wild.cols;
    if (pu_known.cols != heads)
        throw ShapeError("multi_pu_risk: known and wild batches disagree on head count");
    if (known_labels.size() != pu_known.rows)
        throw ShapeError("multi_pu_risk: one label required per known row");
    if (pu_wild.rows == 0) throw UsageError("multi_pu_risk: empty wild batch");
    if (wild_weights && !same_shape(*wild_weights, pu_wild))
        throw ShapeError("multi_pu_risk: weight matrix must match the wild batch");

    // Positive counts per head; labels are 1-based head indices.
    std::vector<std::size_t> n_pos(heads, 0);
    for (int label : known_labels) {
        if (label < 1 || static_cast<std::size_t>(label) > heads)
            throw UsageError("multi_pu_risk: label " + std::to_string(label) +
                             " outside 1.." + std::to_string(heads));
        ++n_pos[static_cast<std::size_t>(label) - 1];
    }

    MultiPuResult out;
    out.d_known = Tensor2(pu_known.rows, heads);
    out.d_wild = Tensor2(pu_wild.rows, heads);

    // Positive terms: mean over each head's own-class samples of L(f,1),
    // halved. Weights never touch the positive branch.
    for (std::size_t i = 0; i < pu_known.rows; ++i) {
        const std::size_t h = static_cast<std::size_t>(known_labels[i]) - 1;
        const LossGrad lg = eval_loss(loss, pu_known(i, h), 1, 1.0);
        const double scale = 0.5 / static_cast<double>(n_pos[h]);
        out.risk += scale * lg.value;
        out.d_known(i, h) = scale * lg.dprob;
    }
    for (std::size_t h = 0; h < heads; ++h) {
        if (n_pos[h] == 0)
            std::cerr << "warning: no positives for head " << (h + 1)
                      << " in this batch; its positive term is skipped\n";
    }

    // Negative terms: mean over the shared wild batch of L(f,0), halved,
    // per head, with optional per-(sample, head) confidence weights.
    const double wild_scale = 0.5 / static_cast<double>(pu_wild.rows);
    for (std::size_t i = 0; i < pu_wild.rows; ++i) {
        for (std::size_t h = 0; h < heads; ++h) {
            const double w = wild_weights ? (*wild_weights)(i, h) : 1.0;
            const LossGrad lg = eval_loss(loss, pu_wild(i, h), 0, w);
            out.risk += wild_scale * lg.value;
            out.d_wild(i, h) = wild_scale * lg.dprob;
        }
    }
    return out;
}

bool or_aggregate(std::span<const double> per_head_probs, double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0)
        throw UsageError("decision threshold must lie in (0,1)");
    if (per_head_probs.empty()) throw UsageError("or_aggregate: no head probabilities");
    return std::any_of(per_head_probs.begin(), per_head_probs.end(),
                       [threshold](double f) { return f >= threshold; });
}

OpenSetPrediction fuse(std::span<const double> q_probs, bool is_known) {
    if (q_probs.empty()) throw UsageError("fuse: empty class distribution");
    std::size_t best = 0;
    for (std::size_t j = 1; j < q_probs.size(); ++j)
        if (q_probs[j] > q_probs[best]) best = j;  // strict: ties keep the lowest index
    OpenSetPrediction pred;
    pred.known_label = static_cast<int>(best) + 1;
    pred.is_known = is_known;
    pred.final_label = is_known ? pred.known_label : kUnknownLabel;
    pred.q_probs.assign(q_probs.begin(), q_probs.end());
    return pred;
}

std::vector<double> confidence_probs(ConfidenceMode mode, std::span<const double> q_probs,
                                     std::span<const double> pu_probs) {
    if (q_probs.empty() || pu_probs.empty())
        throw UsageError("confidence_probs: empty probability row");
    std::vector<double> p(pu_probs.size());
    const bool aligned = q_probs.size() == pu_probs.size();
    double q_max = 0.0;
    if (!aligned)
        q_max = *std::max_element(q_probs.begin(), q_probs.end());
    for (std::size_t c = 0; c < pu_probs.size(); ++c) {
        double mix = 1.0;
        if (mode == ConfidenceMode::MixPro) mix = aligned ? q_probs[c] : q_max;
        p[c] = 1.0 - mix * pu_probs[c];
        p[c] = std::clamp(p[c], 0.0, 1.0);
    }
    return p;
}

}  // namespace hopencls
