#pragma once

// Dataset construction: a Gaussian contamination-mixture generator (wild data
// = prior-weighted blend of known classes and unknown classes), the
// labeled/wild/test split protocol, CSV ingestion for real pixel tables, and
// small key=value manifest files.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hopencls {

struct Sample {
    enum class Role { LabeledKnown, Wild, Test };

    std::vector<double> spectrum;
    Role role = Role::Test;
    // 1..C for known classes, 0 for unknown. For Wild samples this is ground
    // truth kept for evaluation/audit only — training code sees wild data
    // through WildView, which has no label accessor.
    int true_label = 0;
};

// Spherical Gaussian in spectrum space.
struct GaussianComponent {
    std::vector<double> mean;
    double stddev = 1.0;
};

// P_wild = sum_c pi_c * P_c + (1 - pi) * P_u, with P_u an equal-weight
// mixture over the unknown components.
struct ContaminationSpec {
    std::vector<double> class_priors;             // pi_c, one per known class
    double unknown_mass = 0.0;                    // 1 - pi
    std::vector<GaussianComponent> known_components;
    std::vector<GaussianComponent> unknown_components;

    std::size_t classes() const { return class_priors.size(); }
    std::size_t bands() const;
    double pi() const;  // sum of class_priors

    // ConfigError unless priors are nonnegative, masses sum to 1 (1e-12),
    // and all components agree on the band count.
    void validate() const;
};

// The benchmark layout used throughout the tests: known class c peaks at
// coordinate c with height `sep`; each unknown class sits halfway between two
// adjacent knowns (height sep/2 at two adjacent coordinates), giving heavy
// known/unknown overlap while the knowns stay mutually separable. Equal
// known priors summing to `pi`.
ContaminationSpec synthetic_default(std::size_t classes = 3, std::size_t unknown_classes = 2,
                                    std::size_t bands = 20, double sep = 2.5,
                                    double sigma = 1.0, double pi = 0.6);

// n independent draws from the wild mixture; hidden true labels recorded.
std::vector<Sample> sample_wild(const ContaminationSpec& spec, std::size_t n,
                                std::uint64_t seed);

struct Split {
    std::vector<Sample> labeled;  // per_class draws from each known component
    std::vector<Sample> wild;
    std::vector<Sample> test;     // drawn from the same wild mixture, labels kept
};

// Three disjoint draw streams derived from one seed.
Split make_split(const ContaminationSpec& spec, std::size_t per_class_labeled,
                 std::size_t n_wild, std::size_t n_test, std::uint64_t seed);

// Source for the auxiliary/wild training set: the wild mixture itself, only
// its unknown part, or only its known part (rejection-sampled on the hidden
// labels). ConfigError when the requested part has zero mass.
enum class AuxSource { Wild, PureUnknown, WildMinusUnknown };

std::vector<Sample> sample_aux(const ContaminationSpec& spec, std::size_t n,
                               std::uint64_t seed, AuxSource source);

AuxSource aux_source_from_string(const std::string& s);
std::string to_string(AuxSource source);

// Training-facing view of wild data: spectra only. Keeping labels
// unreachable here is what lets the trainer take wild data without ever
// seeing ground truth.
class WildView {
public:
    explicit WildView(const std::vector<Sample>& wild);

    std::size_t size() const { return samples_->size(); }
    std::size_t bands() const;
    std::span<const double> spectrum(std::size_t i) const;

private:
    const std::vector<Sample>* samples_;
};

// --- CSV + manifest I/O ------------------------------------------------

struct CsvSchema {
    std::size_t band_count = 0;
    int unknown_label_code = 0;  // label value in the file meaning "unknown"
    bool normalize = false;      // per-band min-max over this file
};

// One pixel per row: band_count numeric fields then one integer label.
// An optional non-numeric header row is skipped. Malformed rows raise
// ParseError naming the line.
std::vector<Sample> load_csv(const std::string& path, const CsvSchema& schema,
                             Sample::Role role);

// mask_labels writes 0 in the label column for every row (used for the
// training-facing wild file; true labels go to a separate audit file).
void write_csv(const std::string& path, const std::vector<Sample>& samples,
               bool mask_labels = false);

// Per-band min/max, for normalization driven by training statistics.
struct BandStats {
    std::vector<double> min;
    std::vector<double> max;
};

BandStats compute_band_stats(const std::vector<const std::vector<Sample>*>& sets);
// (x - min) / (max - min); constant bands map to 0.
void apply_band_stats(std::vector<Sample>& samples, const BandStats& stats);

// Flat "key=value" files ('#' starts a comment); used for dataset manifests,
// run manifests, and CLI config files.
void write_kv_file(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& entries);
std::map<std::string, std::string> read_kv_file(const std::string& path);

}  // namespace hopencls
