#include "hopencls/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hopencls/errors.hpp"
#include "hopencls/losses.hpp"

namespace hopencls {

namespace {

// Independent seed streams: network inits must not share draws with batching.
constexpr std::uint64_t kStreamNetC = 10;
constexpr std::uint64_t kStreamNetE = 11;
constexpr std::uint64_t kStreamBatches = 12;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::size_t infer_classes(const std::vector<Sample>& labeled) {
    if (labeled.empty()) throw UsageError("trainer needs a non-empty labeled set");
    int c = 0;
    for (const Sample& s : labeled) {
        if (s.true_label < 1)
            throw UsageError("labeled samples must carry class labels >= 1");
        c = std::max(c, s.true_label);
    }
    return static_cast<std::size_t>(c);
}

Network make_net(std::size_t d, const std::vector<std::size_t>& hidden, std::size_t classes,
                 std::size_t heads, std::uint64_t seed, std::uint64_t stream) {
    Rng rng(mix_seed(seed, stream));
    return Network(d, hidden, classes, heads, rng);
}

Tensor2 pack_labeled(const std::vector<Sample>& labeled) {
    const std::size_t d = labeled.front().spectrum.size();
    Tensor2 x(labeled.size(), d);
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        if (labeled[i].spectrum.size() != d)
            throw ShapeError("labeled samples disagree on band count");
        for (std::size_t j = 0; j < d; ++j) x(i, j) = labeled[i].spectrum[j];
    }
    return x;
}

Tensor2 pack_wild(const WildView& wild) {
    const std::size_t d = wild.bands();
    Tensor2 x(wild.size(), d);
    for (std::size_t i = 0; i < wild.size(); ++i) {
        const auto row = wild.spectrum(i);
        for (std::size_t j = 0; j < d; ++j) x(i, j) = row[j];
    }
    return x;
}

const TrainConfig& validated(const TrainConfig& cfg) {
    cfg.validate();
    return cfg;
}

}  // namespace

Weighting weighting_from_string(const std::string& s) {
    if (s == "none") return Weighting::None;
    if (s == "pro") return Weighting::Pro;
    if (s == "mixpro") return Weighting::MixPro;
    throw ConfigError("unknown weighting '" + s + "' (expected none|pro|mixpro)");
}

std::string to_string(Weighting w) {
    switch (w) {
        case Weighting::None: return "none";
        case Weighting::Pro: return "pro";
        case Weighting::MixPro: return "mixpro";
    }
    return "mixpro";
}

UpdateMode update_mode_from_string(const std::string& s) {
    if (s == "continuous") return UpdateMode::Continuous;
    if (s == "discrete") return UpdateMode::Discrete;
    throw ConfigError("unknown update mode '" + s + "' (expected continuous|discrete)");
}

std::string to_string(UpdateMode m) {
    return m == UpdateMode::Continuous ? "continuous" : "discrete";
}

DeployNet deploy_from_string(const std::string& s) {
    if (s == "net-c") return DeployNet::NetC;
    if (s == "net-e") return DeployNet::NetE;
    if (s == "average") return DeployNet::Average;
    throw ConfigError("unknown deploy target '" + s + "' (expected net-c|net-e|average)");
}

std::string to_string(DeployNet d) {
    switch (d) {
        case DeployNet::NetC: return "net-c";
        case DeployNet::NetE: return "net-e";
        case DeployNet::Average: return "average";
    }
    return "net-c";
}

RejectLoss reject_loss_from_string(const std::string& s) {
    if (s == "bce") return RejectLoss::Bce;
    if (s == "tbce") return RejectLoss::Tbce;
    throw ConfigError("unknown rejection loss '" + s + "' (expected bce|tbce)");
}

std::string to_string(RejectLoss l) { return l == RejectLoss::Bce ? "bce" : "tbce"; }

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(base_lr >= 0.0)) throw ConfigError("base_lr must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    if (taylor_order < 1) throw ConfigError("taylor_order must be >= 1");
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must be in (0,1)");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in [0,1)");
    if (labeled_batch < 1 || wild_batch < 1) throw ConfigError("batch sizes must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0,1)");
    for (std::size_t h : hidden)
        if (h == 0) throw ConfigError("hidden widths must be >= 1");
}

std::string TrainConfig::canonical() const {
    std::ostringstream os;
    os << "epochs=" << epochs << ";base_lr=" << fmt(base_lr) << ";momentum=" << fmt(momentum)
       << ";weight_decay=" << fmt(weight_decay) << ";beta=" << fmt(beta)
       << ";taylor_order=" << taylor_order << ";tau=" << fmt(tau) << ";alpha=" << fmt(alpha)
       << ";labeled_batch=" << labeled_batch << ";wild_batch=" << wild_batch << ";seed=" << seed
       << ";single_network=" << (single_network ? 1 : 0)
       << ";weighting=" << to_string(weighting) << ";mode_c=" << to_string(mode_c)
       << ";mode_e=" << to_string(mode_e) << ";hidden=";
    for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "x" : "") << hidden[i];
    os << ";threshold=" << fmt(threshold) << ";deploy=" << to_string(deploy)
       << ";multi_pu=" << (multi_pu ? 1 : 0)
       << ";contraction_loss=" << to_string(contraction_loss);
    return os.str();
}

std::uint64_t TrainConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a 64
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "epoch,lr,r_k_c,r_mpu_c,r_k_e,r_mpu_e,r_kl,r_all\n";
    for (const EpochRecord& r : history)
        out << r.epoch << "," << fmt(r.lr) << "," << fmt(r.r_k_c) << "," << fmt(r.r_mpu_c) << ","
            << fmt(r.r_k_e) << "," << fmt(r.r_mpu_e) << "," << fmt(r.r_kl) << ","
            << fmt(r.r_all) << "\n";
    if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<OpenSetPrediction> predict(const Network& net_c, const Network& net_e,
                                       const Tensor2& batch, double threshold,
                                       DeployNet which) {
    Tensor2 q, pu;
    if (which == DeployNet::NetC) {
        ActivationCache a = net_c.forward(batch);
        q = std::move(a.q_probs);
        pu = std::move(a.pu_probs);
    } else if (which == DeployNet::NetE) {
        ActivationCache a = net_e.forward(batch);
        q = std::move(a.q_probs);
        pu = std::move(a.pu_probs);
    } else {
        ActivationCache a = net_c.forward(batch);
        ActivationCache b = net_e.forward(batch);
        if (!a.q_probs.same_shape(b.q_probs) || !a.pu_probs.same_shape(b.pu_probs))
            throw ShapeError("averaged prediction needs networks with matching heads");
        q = std::move(a.q_probs);
        pu = std::move(a.pu_probs);
        for (std::size_t i = 0; i < q.data.size(); ++i)
            q.data[i] = (q.data[i] + b.q_probs.data[i]) / 2.0;
        for (std::size_t i = 0; i < pu.data.size(); ++i)
            pu.data[i] = (pu.data[i] + b.pu_probs.data[i]) / 2.0;
    }

    std::vector<OpenSetPrediction> preds;
    preds.reserve(batch.rows);
    for (std::size_t i = 0; i < batch.rows; ++i) {
        const auto pu_row = pu.row(i);
        OpenSetPrediction p = fuse(q.row(i), or_aggregate(pu_row, threshold));
        p.per_head_probs.assign(pu_row.begin(), pu_row.end());
        preds.push_back(std::move(p));
    }
    return preds;
}

Trainer::Trainer(const TrainConfig& cfg, const std::vector<Sample>& labeled,
                 const WildView& wild)
    : cfg_(validated(cfg)),
      classes_(infer_classes(labeled)),
      heads_(cfg.multi_pu ? classes_ : 1),
      bands_(labeled.front().spectrum.size()),
      labeled_x_(pack_labeled(labeled)),
      wild_x_(pack_wild(wild)),
      net_c_(make_net(bands_, cfg.hidden, classes_, heads_, cfg.seed, kStreamNetC)),
      net_e_(cfg.single_network
                 ? std::optional<Network>()
                 : std::optional<Network>(
                       make_net(bands_, cfg.hidden, classes_, heads_, cfg.seed, kStreamNetE))),
      opt_c_(cfg.momentum, cfg.weight_decay),
      opt_e_(cfg.momentum, cfg.weight_decay),
      confidence_(wild.size(), heads_, cfg.alpha, cfg.tau, cfg.mode_c, cfg.mode_e),
      rng_(mix_seed(cfg.seed, kStreamBatches)) {
    if (wild_x_.cols != bands_)
        throw ShapeError("labeled and wild data disagree on band count");

    labels_.reserve(labeled.size());
    pu_labels_.reserve(labeled.size());
    class_indices_.assign(classes_, {});
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        const int label = labeled[i].true_label;
        labels_.push_back(label);
        // Pooled mode folds every known class into a single rejection head.
        pu_labels_.push_back(cfg_.multi_pu ? label : 1);
        class_indices_[static_cast<std::size_t>(label) - 1].push_back(i);
    }
    for (std::size_t c = 0; c < classes_; ++c)
        if (class_indices_[c].empty())
            throw UsageError("class " + std::to_string(c + 1) + " has no labeled samples");
    pools_.assign(classes_, {});
    cursors_.assign(classes_, 0);
}

std::size_t Trainer::draw_from_class(std::size_t c) {
    auto& pool = pools_[c];
    auto& cur = cursors_[c];
    if (cur >= pool.size()) {
        rng_.shuffle(pool);
        cur = 0;
    }
    return pool[cur++];
}

Tensor2 Trainer::gather_wild(const std::vector<std::size_t>& idx) const {
    Tensor2 x(idx.size(), bands_);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < bands_; ++j) x(i, j) = wild_x_(idx[i], j);
    return x;
}

Tensor2 Trainer::gather_weights(const Tensor2& w, const std::vector<std::size_t>& idx) const {
    Tensor2 out(idx.size(), w.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t h = 0; h < w.cols; ++h) out(i, h) = w(idx[i], h);
    return out;
}

void Trainer::train_step(const std::vector<std::size_t>& wild_idx, double lr, int step,
                         double& r_k_c, double& r_mpu_c, double& r_k_e, double& r_mpu_e,
                         double& r_kl) {
    const std::size_t bl = static_cast<std::size_t>(cfg_.labeled_batch);
    Tensor2 xl(bl, bands_);
    std::vector<int> batch_pu_labels(bl);
    std::vector<int> batch_labels(bl);
    // Stratified labeled batch: classes round-robin so every head sees
    // positives in every step.
    for (std::size_t b = 0; b < bl; ++b) {
        const std::size_t idx = draw_from_class(b % classes_);
        for (std::size_t j = 0; j < bands_; ++j) xl(b, j) = labeled_x_(idx, j);
        batch_labels[b] = labels_[idx];
        batch_pu_labels[b] = pu_labels_[idx];
    }
    Tensor2 xw = gather_wild(wild_idx);

    const bool weighted = cfg_.weighting != Weighting::None;
    const bool dual = !cfg_.single_network;

    auto cross_entropy = [&](const ActivationCache& cache, Tensor2& dq) {
        dq = Tensor2(bl, classes_);
        std::vector<double> grad_row(classes_);
        double sum = 0.0;
        const double scale = 1.0 / static_cast<double>(bl);
        for (std::size_t i = 0; i < bl; ++i) {
            sum += ce_loss(cache.q_probs.row(i), batch_labels[i], grad_row);
            for (std::size_t j = 0; j < classes_; ++j) dq(i, j) = scale * grad_row[j];
        }
        return sum * scale;
    };

    // --- contraction branch ---
    ActivationCache cl = net_c_.forward(xl);
    ActivationCache cw = net_c_.forward(xw);
    Tensor2 dq_cl;
    const double step_k_c = cross_entropy(cl, dq_cl);

    Tensor2 wc_batch;
    const Tensor2* wc_ptr = nullptr;
    if (weighted) {
        wc_batch = gather_weights(confidence_.w_c(), wild_idx);
        wc_ptr = &wc_batch;
    }
    const PuLossSpec spec_c{cfg_.contraction_loss == RejectLoss::Tbce, cfg_.taylor_order};
    MultiPuResult mpu_c =
        multi_pu_risk(cl.pu_probs, batch_pu_labels, cw.pu_probs, spec_c, wc_ptr);

    Tensor2 dpu_cl = std::move(mpu_c.d_known);
    Tensor2 dpu_cw = std::move(mpu_c.d_wild);
    double step_mpu_c = mpu_c.risk;
    double step_k_e = 0.0, step_mpu_e = 0.0, step_kl = 0.0;

    const PuLossSpec spec_e{false, cfg_.taylor_order};
    Tensor2 we_batch;
    const Tensor2* we_ptr = nullptr;
    if (weighted) {
        we_batch = gather_weights(confidence_.w_e(), wild_idx);
        we_ptr = &we_batch;
    }

    if (dual) {
        // --- expansion branch on its own network, plus the alignment term ---
        ActivationCache el = net_e_->forward(xl);
        ActivationCache ew = net_e_->forward(xw);
        Tensor2 dq_el;
        step_k_e = cross_entropy(el, dq_el);
        MultiPuResult mpu_e =
            multi_pu_risk(el.pu_probs, batch_pu_labels, ew.pu_probs, spec_e, we_ptr);
        step_mpu_e = mpu_e.risk;

        Tensor2 dkl_c(cw.pu_probs.rows, cw.pu_probs.cols);
        Tensor2 dkl_e(ew.pu_probs.rows, ew.pu_probs.cols);
        step_kl = kl_align(cw.pu_probs, ew.pu_probs, dkl_c, dkl_e);
        for (std::size_t i = 0; i < dpu_cw.data.size(); ++i)
            dpu_cw.data[i] += cfg_.beta * dkl_c.data[i];
        Tensor2 dpu_ew = std::move(mpu_e.d_wild);
        for (std::size_t i = 0; i < dpu_ew.data.size(); ++i)
            dpu_ew.data[i] += cfg_.beta * dkl_e.data[i];

        Gradients ge = net_e_->backward(el, dq_el, mpu_e.d_known);
        ge.add(net_e_->backward(ew, Tensor2(ew.q_probs.rows, ew.q_probs.cols), dpu_ew));
        const double step_risk = (step_k_c + step_mpu_c) + (step_k_e + step_mpu_e) +
                                 cfg_.beta * step_kl;
        if (!std::isfinite(step_risk) || !ge.all_finite())
            throw NumericError("non-finite risk/gradient (expansion) at epoch " +
                               std::to_string(epoch_ + 1) + ", step " + std::to_string(step));
        opt_e_.step(*net_e_, ge, lr);
    } else if (weighted) {
        // Single-network mode: the weighted-BCE branch rides on the same
        // parameters. (With weighting off this branch would duplicate the
        // contraction risk, so it is dropped — that is the plain baseline.)
        MultiPuResult mpu_e =
            multi_pu_risk(cl.pu_probs, batch_pu_labels, cw.pu_probs, spec_e, we_ptr);
        step_mpu_e = mpu_e.risk;
        for (std::size_t i = 0; i < dpu_cl.data.size(); ++i)
            dpu_cl.data[i] += mpu_e.d_known.data[i];
        for (std::size_t i = 0; i < dpu_cw.data.size(); ++i)
            dpu_cw.data[i] += mpu_e.d_wild.data[i];
    }

    Gradients gc = net_c_.backward(cl, dq_cl, dpu_cl);
    gc.add(net_c_.backward(cw, Tensor2(cw.q_probs.rows, cw.q_probs.cols), dpu_cw));
    const double step_risk = (step_k_c + step_mpu_c) + (step_k_e + step_mpu_e) +
                             cfg_.beta * step_kl;
    if (!std::isfinite(step_risk) || !gc.all_finite())
        throw NumericError("non-finite risk/gradient at epoch " + std::to_string(epoch_ + 1) +
                           ", step " + std::to_string(step));
    opt_c_.step(net_c_, gc, lr);

    r_k_c += step_k_c;
    r_mpu_c += step_mpu_c;
    r_k_e += step_k_e;
    r_mpu_e += step_mpu_e;
    r_kl += step_kl;
}

void Trainer::update_confidence() {
    if (cfg_.weighting == Weighting::None) return;
    const ConfidenceMode mode =
        cfg_.weighting == Weighting::Pro ? ConfidenceMode::Pro : ConfidenceMode::MixPro;
    const ActivationCache cc = net_c_.forward(wild_x_);
    std::optional<ActivationCache> ee;
    if (!cfg_.single_network) ee = net_e_->forward(wild_x_);
    const ActivationCache& ec = ee ? *ee : cc;
    for (std::size_t i = 0; i < wild_x_.rows; ++i) {
        const std::vector<double> p_c = confidence_probs(mode, cc.q_probs.row(i),
                                                         cc.pu_probs.row(i));
        const std::vector<double> p_e = confidence_probs(mode, ec.q_probs.row(i),
                                                         ec.pu_probs.row(i));
        confidence_.update(i, p_c, p_e);
    }
}

void Trainer::run_epoch() {
    if (epoch_ >= cfg_.epochs)
        throw UsageError("all " + std::to_string(cfg_.epochs) + " configured epochs already run");
    const double lr = cosine_lr(epoch_, cfg_.epochs, cfg_.base_lr);

    // Fresh per-epoch shuffles; all stochastic state lives in rng_, so an
    // epoch-boundary checkpoint restores batching exactly.
    for (std::size_t c = 0; c < classes_; ++c) {
        pools_[c] = class_indices_[c];
        rng_.shuffle(pools_[c]);
        cursors_[c] = 0;
    }
    std::vector<std::size_t> wild_order(wild_x_.rows);
    std::iota(wild_order.begin(), wild_order.end(), 0);
    rng_.shuffle(wild_order);

    const std::size_t wb = static_cast<std::size_t>(cfg_.wild_batch);
    const std::size_t steps = (wild_order.size() + wb - 1) / wb;
    double r_k_c = 0, r_mpu_c = 0, r_k_e = 0, r_mpu_e = 0, r_kl = 0;
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t lo = s * wb;
        const std::size_t hi = std::min(wild_order.size(), lo + wb);
        const std::vector<std::size_t> widx(wild_order.begin() + lo, wild_order.begin() + hi);
        train_step(widx, lr, static_cast<int>(s), r_k_c, r_mpu_c, r_k_e, r_mpu_e, r_kl);
    }

    update_confidence();

    const double inv = 1.0 / static_cast<double>(steps);
    EpochRecord rec;
    rec.epoch = epoch_ + 1;
    rec.lr = lr;
    rec.r_k_c = r_k_c * inv;
    rec.r_mpu_c = r_mpu_c * inv;
    rec.r_k_e = r_k_e * inv;
    rec.r_mpu_e = r_mpu_e * inv;
    rec.r_kl = r_kl * inv;
    // The decomposition identity tests recompute r_all from the logged
    // components with exactly this expression.
    rec.r_all = (rec.r_k_c + rec.r_mpu_c) + (rec.r_k_e + rec.r_mpu_e) + cfg_.beta * rec.r_kl;
    history_.push_back(rec);
    ++epoch_;
}

void Trainer::run() {
    while (epoch_ < cfg_.epochs) run_epoch();
}

std::vector<OpenSetPrediction> Trainer::predict(const Tensor2& batch) const {
    return predict(batch, cfg_.deploy);
}

std::vector<OpenSetPrediction> Trainer::predict(const Tensor2& batch, DeployNet which) const {
    if (cfg_.single_network && which != DeployNet::NetC) which = DeployNet::NetC;
    return hopencls::predict(net_c_, cfg_.single_network ? net_c_ : *net_e_, batch,
                             cfg_.threshold, which);
}

}  // namespace hopencls
