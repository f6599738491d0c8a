#pragma once

// Open-set metrics (confusion matrix, open/closed accuracy, unknown-class F1,
// ranking AUC with a pairwise oracle), the contamination-bound checker on
// exactly enumerable toy spaces, and the gradient-weight sweep that exposes
// the truncated-BCE vs BCE contrast.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hopencls/data.hpp"
#include "hopencls/heads.hpp"
#include "hopencls/tensor.hpp"

namespace hopencls {

struct MetricsReport {
    // All in [0,1]; the report writers emit them x100, table-style.
    double open_oa = 0.0;    // accuracy over all C+1 labels
    double closed_oa = 0.0;  // argmax accuracy on true-known samples, rejection ignored
    double f1_u = 0.0;       // F1 of the unknown class
    double auc_u = 0.0;      // unknownness-ranking AUC; NaN if only one class present
    std::vector<double> producer_acc;  // per true label 0..C (recall)
    std::vector<double> user_acc;      // per predicted label 0..C (precision)
    Tensor2 confusion;                 // (C+1)x(C+1); row = truth, col = prediction
};

// Score used to rank unknowns above knowns: 1 - max_c f_c, or the mixed
// variant 1 - max_c (q_c * f_c).
enum class UnknownScore { OneMinusMaxPu, OneMinusMaxMix };

MetricsReport compute_metrics(const std::vector<OpenSetPrediction>& preds,
                              std::span<const int> truths,
                              UnknownScore score = UnknownScore::OneMinusMaxPu);

// Ranking AUC of `scores` for positives (label 1) over negatives, ties at
// half weight. The rank-based implementation and the O(n^2) oracle produce
// bitwise-identical doubles: both numerators are exact half-integers and the
// divisor is shared. Throws InputError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> positives);
double auc_bruteforce(std::span<const double> scores, std::span<const int> positives);

// --- contamination bound (sandwich + excess risk) -----------------------

// A finite input space where both risks are exact sums: atom i has mass
// p_k[i] under the known distribution and p_u[i] under the unknown one;
// wild mass is pi*p_k + (1-pi)*p_u.
struct DiscreteToy {
    std::vector<double> p_k;
    std::vector<double> p_u;
    double pi = 0.5;

    void validate() const;
};

struct BoundReport {
    double pi = 0.0;
    double n_t = 0.0;          // harmonic bound of the negative-branch loss
    double r_u = 0.0;          // balanced risk using the true unknown part
    double r_pu = 0.0;         // its wild-data surrogate
    double observed_gap = 0.0; // |r_u - r_pu|
    double bound = 0.0;        // pi * n_t / 2
    double excess_u = 0.0;     // r_u(f_hat) - r_u(f_star), when minimizers were searched
    double excess_pu = 0.0;    // r_pu(f_star) - r_pu(f_hat)
    bool has_excess = false;
    bool holds = false;
};

// Exact risks of a per-atom probability table under the truncated loss:
//   r_u  = 0.5 * ( E_k[-log f] + E_u[poly_t(f)] )
//   r_pu = 0.5 * ( E_k[-log f] + E_wild[poly_t(f)] )
double risk_u_exact(const DiscreteToy& toy, std::span<const double> f, int t);
double risk_pu_exact(const DiscreteToy& toy, std::span<const double> f, int t);

// Sandwich check |r_u - r_pu| <= pi*n_t/2 (tolerance 1e-9) for one table.
BoundReport check_theorem_bound(const DiscreteToy& toy, std::span<const double> f, int t);

// Exhaustive global minimizers over tables quantized to `levels` values in
// [0,1]. Separable: both risks are sums over atoms, so each atom is
// minimized independently (ties to the lower level).
std::vector<double> minimize_risk_u(const DiscreteToy& toy, int t, int levels = 21);
std::vector<double> minimize_risk_pu(const DiscreteToy& toy, int t, int levels = 21);

// Sandwich at the surrogate's minimizer plus both excess-risk gaps:
//   0 <= r_u(f_hat) - r_u(f_star) <= pi*n_t  and
//   0 <= r_pu(f_star) - r_pu(f_hat) <= pi*n_t.
BoundReport check_theorem_minimizers(const DiscreteToy& toy, int t, int levels = 21);

// Monte-Carlo variant on a generator spec: the known-positive term uses
// common draws for both risks (it cancels in the gap), and the check allows
// 3 sigma of sampling noise on top of the bound. No excess search here.
BoundReport check_theorem_mc(const ContaminationSpec& spec,
                             const std::function<double(std::span<const double>)>& f, int t,
                             std::size_t n_mc, std::uint64_t seed);

// --- gradient-weight sweep ----------------------------------------------

// Wild-sample gradient weights of the two losses: truncated-BCE's power sum
// 1 + f + ... + f^{t-1} against BCE's 1/(1-f).
struct WeightRow {
    double f = 0.0;
    int t = 0;
    double tbce_weight = 0.0;
    double bce_weight = 0.0;
};

std::vector<WeightRow> gradient_weight_sweep(std::span<const int> t_values,
                                             std::span<const double> f_grid);

// --- report writers -------------------------------------------------------

void write_metrics_csv(const std::string& path, const MetricsReport& report);
void write_metrics_text(const std::string& path, const MetricsReport& report);
void write_confusion_csv(const std::string& path, const MetricsReport& report);
void write_bounds_csv(const std::string& path, const std::vector<BoundReport>& reports);
void write_weight_sweep_csv(const std::string& path, const std::vector<WeightRow>& rows);

}  // namespace hopencls
