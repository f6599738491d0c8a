#pragma once

// Per-class rejection machinery: the multi-head positive-unlabeled risk, the
// OR-aggregated known/unknown decision, the fused open-set prediction, and
// the Pro/MixPro confidence probabilities that feed the weight EMA.

#include <cstddef>
#include <span>
#include <vector>

#include "hopencls/tensor.hpp"

namespace hopencls {

// Reserved output label for rejected samples. Known classes are 1..C.
inline constexpr int kUnknownLabel = 0;

struct OpenSetPrediction {
    int known_label = 0;                // argmax of q_probs, in 1..C
    bool is_known = false;              // OR over per-head decisions
    int final_label = kUnknownLabel;    // known_label if is_known, else 0
    std::vector<double> per_head_probs; // rejection-head sigmoids
    std::vector<double> q_probs;        // kept for score variants in eval
};

// Which scalar loss the PU risk applies to wild samples.
struct PuLossSpec {
    bool taylor = false;  // false: BCE family; true: truncated-BCE family
    int taylor_order = 2;
};

struct MultiPuResult {
    double risk = 0.0;
    Tensor2 d_known;  // d(risk)/d(pu_known), same shape
    Tensor2 d_wild;   // d(risk)/d(pu_wild)
};

// Sum over heads h of 0.5 * [ mean over knowns of head h's class of L(f,1)
//                           + mean over the wild batch of L(f,0) ].
// pu_known is n_k x H with known_labels giving each row's class (1-based;
// row i is a positive for head known_labels[i]). pu_wild is n_wild x H and
// feeds every head's negative term. wild_weights (n_wild x H, or null for
// unweighted) scales the negative branch per sample and head; weights are
// constants, no gradient flows into them. A head with no positives in the
// batch contributes only its wild term (warned once per call).
MultiPuResult multi_pu_risk(const Tensor2& pu_known, std::span<const int> known_labels,
                            const Tensor2& pu_wild, const PuLossSpec& loss,
                            const Tensor2* wild_weights = nullptr);

// True iff any head probability reaches the threshold (inclusive).
bool or_aggregate(std::span<const double> per_head_probs, double threshold);

// Known-class argmax (ties to the lowest index) gated by the rejection
// decision.
OpenSetPrediction fuse(std::span<const double> q_probs, bool is_known);

enum class ConfidenceMode { Pro, MixPro };

// Per-head probability that a wild sample is *not* that head's class:
// Pro: 1 - f_c; MixPro: 1 - q_c * f_c. When the head count differs from the
// class count (pooled-rejector ablation), MixPro mixes with max_c q_c.
std::vector<double> confidence_probs(ConfidenceMode mode, std::span<const double> q_probs,
                                     std::span<const double> pu_probs);

}  // namespace hopencls
