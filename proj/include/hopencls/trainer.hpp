#pragma once

// Cooperative training of the two networks. The contraction network's
// rejection heads train under the truncated (bounded-gradient) loss, the
// expansion network's under confidence-weighted BCE, their class heads under
// plain cross-entropy, and the rejection outputs are pulled together by a
// symmetrised KL term on wild batches:
//   R_all = R_c + R_e + beta * R_kl.
// Per-sample confidence weights update once per epoch from a full pass over
// the wild set, each network's weights driven by the other's confidence.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hopencls/confidence.hpp"
#include "hopencls/data.hpp"
#include "hopencls/heads.hpp"
#include "hopencls/network.hpp"
#include "hopencls/tensor.hpp"

namespace hopencls {

// Which confidence probability feeds the weight EMA; None freezes every
// weight at 1 and, in single-network mode, drops the duplicate weighted
// branch entirely (that combination is the plain-PU baseline).
enum class Weighting { None, Pro, MixPro };

// Network whose outputs produce final predictions.
enum class DeployNet { NetC, NetE, Average };

// Loss family of the contraction-side rejection risk (the baseline ablation
// swaps the truncated loss for plain BCE).
enum class RejectLoss { Bce, Tbce };

Weighting weighting_from_string(const std::string& s);
std::string to_string(Weighting w);
UpdateMode update_mode_from_string(const std::string& s);
std::string to_string(UpdateMode m);
DeployNet deploy_from_string(const std::string& s);
std::string to_string(DeployNet d);
RejectLoss reject_loss_from_string(const std::string& s);
std::string to_string(RejectLoss l);

struct TrainConfig {
    int epochs = 130;
    double base_lr = 3e-4;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double beta = 1.0;       // KL coefficient
    int taylor_order = 2;    // truncation order of the contraction loss
    double tau = 0.95;       // discrete-update threshold
    double alpha = 0.9;      // EMA smoothing
    int labeled_batch = 64;
    int wild_batch = 64;
    std::uint64_t seed = 1;
    bool single_network = false;   // one parameter set carrying both branches
    Weighting weighting = Weighting::MixPro;
    UpdateMode mode_c = UpdateMode::Continuous;
    UpdateMode mode_e = UpdateMode::Discrete;
    std::vector<std::size_t> hidden = {64, 64};
    double threshold = 0.5;        // rejection-head decision cutoff, inclusive
    DeployNet deploy = DeployNet::NetC;
    bool multi_pu = true;          // per-class heads; false = one pooled head
    RejectLoss contraction_loss = RejectLoss::Tbce;

    void validate() const;
    // Canonical key=value serialization (stable field order, full-precision
    // doubles); the checkpoint stores its FNV-1a hash to refuse resuming
    // under a different configuration.
    std::string canonical() const;
    std::uint64_t hash() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double lr = 0.0;
    double r_k_c = 0.0;    // cross-entropy, contraction network
    double r_mpu_c = 0.0;  // rejection risk, contraction network
    double r_k_e = 0.0;    // cross-entropy, expansion network (0 in single mode)
    double r_mpu_e = 0.0;  // rejection risk, expansion network
    double r_kl = 0.0;     // alignment term (0 in single mode)
    double r_all = 0.0;    // (r_k_c + r_mpu_c) + (r_k_e + r_mpu_e) + beta * r_kl
};

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

// Inference shared by the trainer and the CLI: per row, OR-aggregate the
// rejection heads at `threshold`, then argmax the class head.
std::vector<OpenSetPrediction> predict(const Network& net_c, const Network& net_e,
                                       const Tensor2& batch, double threshold,
                                       DeployNet which);

class Trainer {
public:
    // Labeled samples carry labels 1..C (C inferred from the data); wild data
    // arrives through the label-free view.
    Trainer(const TrainConfig& cfg, const std::vector<Sample>& labeled, const WildView& wild);

    void run_epoch();
    void run();  // remaining epochs up to cfg.epochs

    int epochs_done() const { return epoch_; }
    std::size_t classes() const { return classes_; }
    const TrainConfig& config() const { return cfg_; }
    const Network& contraction_net() const { return net_c_; }
    const Network& expansion_net() const { return cfg_.single_network ? net_c_ : *net_e_; }
    const ConfidenceState& confidence() const { return confidence_; }
    const std::vector<EpochRecord>& history() const { return history_; }

    std::vector<OpenSetPrediction> predict(const Tensor2& batch) const;
    std::vector<OpenSetPrediction> predict(const Tensor2& batch, DeployNet which) const;

    // Bit-exact state round-trip: parameters, optimizer velocities,
    // confidence weights, RNG stream, and the epoch counter. Loading
    // validates a checksum and the config hash before touching any state.
    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

private:
    void train_step(const std::vector<std::size_t>& wild_idx, double lr, int step,
                    double& r_k_c, double& r_mpu_c, double& r_k_e, double& r_mpu_e,
                    double& r_kl);
    void update_confidence();
    std::size_t draw_from_class(std::size_t c);
    Tensor2 gather_wild(const std::vector<std::size_t>& idx) const;
    Tensor2 gather_weights(const Tensor2& w, const std::vector<std::size_t>& idx) const;

    TrainConfig cfg_;
    std::size_t classes_ = 0;
    std::size_t heads_ = 0;
    std::size_t bands_ = 0;

    Tensor2 labeled_x_;             // n_k x d
    std::vector<int> labels_;       // 1..C
    std::vector<int> pu_labels_;    // head index per labeled row (1..H)
    Tensor2 wild_x_;                // n_wild x d

    Network net_c_;
    std::optional<Network> net_e_;  // absent in single-network mode
    SgdOptimizer opt_c_;
    SgdOptimizer opt_e_;
    ConfidenceState confidence_;
    Rng rng_;  // batch shuffling stream; init streams are separate

    std::vector<std::vector<std::size_t>> class_indices_;  // labeled rows per class
    std::vector<std::vector<std::size_t>> pools_;  // per-epoch shuffled copies
    std::vector<std::size_t> cursors_;

    int epoch_ = 0;
    std::vector<EpochRecord> history_;
};

}  // namespace hopencls
