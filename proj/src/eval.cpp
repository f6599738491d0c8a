#include "hopencls/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "hopencls/errors.hpp"
#include "hopencls/losses.hpp"
#include "hopencls/rng.hpp"

namespace hopencls {

namespace {

constexpr double kBoundTol = 1e-9;

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double unknownness(const OpenSetPrediction& pred, UnknownScore score) {
    double best = 0.0;
    const bool aligned = pred.q_probs.size() == pred.per_head_probs.size();
    double q_max = 0.0;
    if (!aligned && score == UnknownScore::OneMinusMaxMix)
        q_max = *std::max_element(pred.q_probs.begin(), pred.q_probs.end());
    for (std::size_t c = 0; c < pred.per_head_probs.size(); ++c) {
        double v = pred.per_head_probs[c];
        if (score == UnknownScore::OneMinusMaxMix) v *= aligned ? pred.q_probs[c] : q_max;
        best = std::max(best, v);
    }
    return 1.0 - best;
}

void check_auc_input(std::span<const double> scores, std::span<const int> positives,
                     std::size_t& n_pos, std::size_t& n_neg) {
    if (scores.size() != positives.size()) throw UsageError("auc: span lengths differ");
    if (scores.empty()) throw UsageError("auc: empty input");
    n_pos = 0;
    for (int p : positives) {
        if (p != 0 && p != 1) throw UsageError("auc: labels must be 0 or 1");
        n_pos += static_cast<std::size_t>(p);
    }
    n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw InputError("auc undefined: both classes must be present");
}

// The truncated loss pair the bound checker scores tables with.
double loss_pos(double f, int t) { return tbce_loss(f, 1, t).value; }
double loss_neg(double f, int t) { return tbce_loss(f, 0, t).value; }

std::vector<double> wild_masses(const DiscreteToy& toy) {
    std::vector<double> w(toy.p_k.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = toy.pi * toy.p_k[i] + (1.0 - toy.pi) * toy.p_u[i];
    return w;
}

std::vector<double> quant_levels(int levels) {
    if (levels < 2) throw UsageError("need at least 2 quantization levels");
    std::vector<double> q(levels);
    for (int l = 0; l < levels; ++l)
        q[l] = static_cast<double>(l) / static_cast<double>(levels - 1);
    return q;
}

// argmin over quantized f of a*loss_pos(f) + b*loss_neg(f), lowest level on
// ties. Separability over atoms makes the exhaustive search linear.
std::vector<double> minimize_table(std::span<const double> pos_mass,
                                   std::span<const double> neg_mass, int t, int levels) {
    const std::vector<double> q = quant_levels(levels);
    std::vector<double> f(pos_mass.size());
    for (std::size_t i = 0; i < pos_mass.size(); ++i) {
        double best_val = std::numeric_limits<double>::infinity();
        double best_f = q[0];
        for (double v : q) {
            const double val = pos_mass[i] * loss_pos(v, t) + neg_mass[i] * loss_neg(v, t);
            if (val < best_val) {
                best_val = val;
                best_f = v;
            }
        }
        f[i] = best_f;
    }
    return f;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

MetricsReport compute_metrics(const std::vector<OpenSetPrediction>& preds,
                              std::span<const int> truths, UnknownScore score) {
    if (preds.empty()) throw UsageError("compute_metrics: empty input");
    if (preds.size() != truths.size())
        throw UsageError("compute_metrics: predictions and truths differ in length");
    const std::size_t classes = preds.front().q_probs.size();
    const std::size_t k = classes + 1;  // labels 0..C

    MetricsReport report;
    report.confusion = Tensor2(k, k);
    std::size_t known_total = 0, known_correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int truth = truths[i];
        if (truth < 0 || static_cast<std::size_t>(truth) > classes)
            throw UsageError("compute_metrics: truth label out of range");
        const int pred = preds[i].final_label;
        report.confusion(static_cast<std::size_t>(truth), static_cast<std::size_t>(pred)) += 1.0;
        if (truth != 0) {
            ++known_total;
            if (preds[i].known_label == truth) ++known_correct;
        }
    }

    double trace = 0.0;
    for (std::size_t j = 0; j < k; ++j) trace += report.confusion(j, j);
    report.open_oa = trace / static_cast<double>(preds.size());
    report.closed_oa = ratio(static_cast<double>(known_correct), static_cast<double>(known_total));

    report.producer_acc.resize(k);
    report.user_acc.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        double row = 0.0, col = 0.0;
        for (std::size_t m = 0; m < k; ++m) {
            row += report.confusion(j, m);
            col += report.confusion(m, j);
        }
        report.producer_acc[j] = ratio(report.confusion(j, j), row);
        report.user_acc[j] = ratio(report.confusion(j, j), col);
    }

    const double precision_u = report.user_acc[0];
    const double recall_u = report.producer_acc[0];
    report.f1_u = precision_u + recall_u > 0.0
                      ? 2.0 * precision_u * recall_u / (precision_u + recall_u)
                      : 0.0;

    std::vector<double> scores(preds.size());
    std::vector<int> positives(preds.size());
    bool any_pos = false, any_neg = false;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        scores[i] = unknownness(preds[i], score);
        positives[i] = truths[i] == 0 ? 1 : 0;
        (positives[i] ? any_pos : any_neg) = true;
    }
    report.auc_u = any_pos && any_neg ? auc(scores, positives)
                                      : std::numeric_limits<double>::quiet_NaN();
    return report;
}

double auc(std::span<const double> scores, std::span<const int> positives) {
    std::size_t n_pos = 0, n_neg = 0;
    check_auc_input(scores, positives, n_pos, n_neg);

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average 1-based ranks within tie groups; the positives' rank sum minus
    // n_pos(n_pos+1)/2 counts wins with ties at half weight. Every quantity
    // here is an exact half-integer, so this equals the pairwise oracle
    // bitwise after the shared division.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t m = i; m <= j; ++m)
            if (positives[order[m]]) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    const double numerator = rank_sum_pos - np * (np + 1.0) / 2.0;
    return numerator / (np * static_cast<double>(n_neg));
}

double auc_bruteforce(std::span<const double> scores, std::span<const int> positives) {
    std::size_t n_pos = 0, n_neg = 0;
    check_auc_input(scores, positives, n_pos, n_neg);
    double wins = 0.0;
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (!positives[a]) continue;
        for (std::size_t b = 0; b < scores.size(); ++b) {
            if (positives[b]) continue;
            if (scores[a] > scores[b]) wins += 1.0;
            else if (scores[a] == scores[b]) wins += 0.5;
        }
    }
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

void DiscreteToy::validate() const {
    if (p_k.empty() || p_k.size() != p_u.size())
        throw ConfigError("toy space needs matching nonempty mass vectors");
    double sk = 0.0, su = 0.0;
    for (double v : p_k) {
        if (!(v >= 0.0)) throw ConfigError("negative known mass");
        sk += v;
    }
    for (double v : p_u) {
        if (!(v >= 0.0)) throw ConfigError("negative unknown mass");
        su += v;
    }
    if (std::abs(sk - 1.0) > 1e-9 || std::abs(su - 1.0) > 1e-9)
        throw ConfigError("toy masses must each sum to 1");
    if (!(pi >= 0.0 && pi <= 1.0)) throw ConfigError("pi must lie in [0,1]");
}

double risk_u_exact(const DiscreteToy& toy, std::span<const double> f, int t) {
    toy.validate();
    if (f.size() != toy.p_k.size()) throw UsageError("table size does not match atom count");
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        pos += toy.p_k[i] * loss_pos(f[i], t);
        neg += toy.p_u[i] * loss_neg(f[i], t);
    }
    return 0.5 * (pos + neg);
}

double risk_pu_exact(const DiscreteToy& toy, std::span<const double> f, int t) {
    toy.validate();
    if (f.size() != toy.p_k.size()) throw UsageError("table size does not match atom count");
    const std::vector<double> wild = wild_masses(toy);
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        pos += toy.p_k[i] * loss_pos(f[i], t);
        neg += wild[i] * loss_neg(f[i], t);
    }
    return 0.5 * (pos + neg);
}

BoundReport check_theorem_bound(const DiscreteToy& toy, std::span<const double> f, int t) {
    BoundReport report;
    report.pi = toy.pi;
    report.n_t = harmonic(t);
    report.r_u = risk_u_exact(toy, f, t);
    report.r_pu = risk_pu_exact(toy, f, t);
    report.observed_gap = std::abs(report.r_u - report.r_pu);
    report.bound = toy.pi * report.n_t / 2.0;
    report.holds = report.observed_gap <= report.bound + kBoundTol;
    return report;
}

std::vector<double> minimize_risk_u(const DiscreteToy& toy, int t, int levels) {
    toy.validate();
    return minimize_table(toy.p_k, toy.p_u, t, levels);
}

std::vector<double> minimize_risk_pu(const DiscreteToy& toy, int t, int levels) {
    toy.validate();
    const std::vector<double> wild = wild_masses(toy);
    return minimize_table(toy.p_k, wild, t, levels);
}

BoundReport check_theorem_minimizers(const DiscreteToy& toy, int t, int levels) {
    const std::vector<double> f_star = minimize_risk_u(toy, t, levels);
    const std::vector<double> f_hat = minimize_risk_pu(toy, t, levels);
    BoundReport report = check_theorem_bound(toy, f_hat, t);
    report.excess_u = risk_u_exact(toy, f_hat, t) - risk_u_exact(toy, f_star, t);
    report.excess_pu = risk_pu_exact(toy, f_star, t) - risk_pu_exact(toy, f_hat, t);
    report.has_excess = true;
    const double excess_bound = toy.pi * report.n_t;
    report.holds = report.holds && report.excess_u >= -kBoundTol &&
                   report.excess_u <= excess_bound + kBoundTol &&
                   report.excess_pu >= -kBoundTol && report.excess_pu <= excess_bound + kBoundTol;
    return report;
}

BoundReport check_theorem_mc(const ContaminationSpec& spec,
                             const std::function<double(std::span<const double>)>& f, int t,
                             std::size_t n_mc, std::uint64_t seed) {
    spec.validate();
    if (n_mc < 2) throw UsageError("need at least 2 Monte-Carlo draws");
    if (spec.unknown_mass <= 0.0)
        throw ConfigError("Monte-Carlo bound check needs unknown mass > 0 to sample P_u");

    Rng rng(mix_seed(seed, 77));
    const double n = static_cast<double>(n_mc);

    // Common positive term (cancels in the gap): mean -log f over P_k draws.
    double pos_mean = 0.0;
    {
        std::vector<double> weights = spec.class_priors;
        for (std::size_t i = 0; i < n_mc; ++i) {
            const std::size_t c = rng.categorical(weights);
            std::vector<double> x(spec.bands());
            for (std::size_t b = 0; b < x.size(); ++b)
                x[b] = spec.known_components[c].mean[b] +
                       spec.known_components[c].stddev * rng.normal();
            pos_mean += loss_pos(f(x), t) / n;
        }
    }

    // Negative terms: wild draws for r_pu, pure-unknown draws for r_u.
    auto draw_negative_mean = [&](AuxSource source, double& variance) {
        const std::vector<Sample> draws = sample_aux(
            spec, n_mc, mix_seed(seed, source == AuxSource::Wild ? 78 : 79), source);
        double mean = 0.0;
        for (const Sample& s : draws) mean += loss_neg(f(s.spectrum), t) / n;
        double var = 0.0;
        for (const Sample& s : draws) {
            const double d = loss_neg(f(s.spectrum), t) - mean;
            var += d * d;
        }
        variance = var / (n - 1.0);
        return mean;
    };

    double var_wild = 0.0, var_u = 0.0;
    const double wild_mean = draw_negative_mean(AuxSource::Wild, var_wild);
    const double u_mean = draw_negative_mean(AuxSource::PureUnknown, var_u);

    BoundReport report;
    report.pi = spec.pi();
    report.n_t = harmonic(t);
    report.r_u = 0.5 * (pos_mean + u_mean);
    report.r_pu = 0.5 * (pos_mean + wild_mean);
    report.observed_gap = std::abs(report.r_u - report.r_pu);
    report.bound = report.pi * report.n_t / 2.0;
    const double sigma_gap = 0.5 * std::sqrt(var_wild / n + var_u / n);
    report.holds = report.observed_gap <= report.bound + 3.0 * sigma_gap;
    return report;
}

std::vector<WeightRow> gradient_weight_sweep(std::span<const int> t_values,
                                             std::span<const double> f_grid) {
    std::vector<WeightRow> rows;
    rows.reserve(t_values.size() * f_grid.size());
    for (int t : t_values) {
        if (t < 1) throw UsageError("truncation order must be >= 1");
        for (double f : f_grid) {
            if (!(f > 0.0 && f < 1.0))
                throw UsageError("gradient-weight sweep needs f strictly inside (0,1)");
            WeightRow row;
            row.f = f;
            row.t = t;
            row.tbce_weight = tbce_loss(f, 0, t).dprob;
            row.bce_weight = bce_loss(f, 0).dprob;
            rows.push_back(row);
        }
    }
    return rows;
}

void write_metrics_csv(const std::string& path, const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "open_oa,closed_oa,f1_u,auc_u\n";
    out << format_double(report.open_oa * 100.0) << "," << format_double(report.closed_oa * 100.0)
        << "," << format_double(report.f1_u * 100.0) << ","
        << format_double(report.auc_u * 100.0) << "\n";
    if (!out) throw IoError("write to '" + path + "' failed");
}

void write_metrics_text(const std::string& path, const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "open OA:   " << report.open_oa * 100.0 << "\n"
        << "closed OA: " << report.closed_oa * 100.0 << "\n"
        << "F1 (unknown): " << report.f1_u * 100.0 << "\n"
        << "AUC (unknown): " << report.auc_u * 100.0 << "\n";
    out << "per-class producer/user accuracy (0 = unknown):\n";
    for (std::size_t j = 0; j < report.producer_acc.size(); ++j)
        out << "  class " << j << ": " << report.producer_acc[j] * 100.0 << " / "
            << report.user_acc[j] * 100.0 << "\n";
    if (!out) throw IoError("write to '" + path + "' failed");
}

void write_confusion_csv(const std::string& path, const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const std::size_t k = report.confusion.rows;
    out << "truth\\pred";
    for (std::size_t j = 0; j < k; ++j) out << "," << j;
    out << "\n";
    for (std::size_t i = 0; i < k; ++i) {
        out << i;
        for (std::size_t j = 0; j < k; ++j)
            out << "," << static_cast<long long>(report.confusion(i, j));
        out << "\n";
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

void write_bounds_csv(const std::string& path, const std::vector<BoundReport>& reports) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "pi,n_t,r_u,r_pu,observed_gap,bound,excess_u,excess_pu,has_excess,holds\n";
    for (const BoundReport& r : reports) {
        out << format_double(r.pi) << "," << format_double(r.n_t) << "," << format_double(r.r_u)
            << "," << format_double(r.r_pu) << "," << format_double(r.observed_gap) << ","
            << format_double(r.bound) << "," << format_double(r.excess_u) << ","
            << format_double(r.excess_pu) << "," << (r.has_excess ? 1 : 0) << ","
            << (r.holds ? 1 : 0) << "\n";
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

void write_weight_sweep_csv(const std::string& path, const std::vector<WeightRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "f,t,tbce_weight,bce_weight\n";
    for (const WeightRow& r : rows)
        out << format_double(r.f) << "," << r.t << "," << format_double(r.tbce_weight) << ","
            << format_double(r.bce_weight) << "\n";
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace hopencls
