#include "hopencls/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hopencls/errors.hpp"
#include "hopencls/rng.hpp"

namespace hopencls {

namespace {

// Sub-stream tags so the labeled/wild/test/aux draws never share a sequence.
constexpr std::uint64_t kStreamLabeled = 1;
constexpr std::uint64_t kStreamWild = 2;
constexpr std::uint64_t kStreamTest = 3;
constexpr std::uint64_t kStreamAux = 4;

std::vector<double> draw_spectrum(const GaussianComponent& comp, Rng& rng) {
    std::vector<double> x(comp.mean.size());
    for (std::size_t b = 0; b < x.size(); ++b) x[b] = comp.mean[b] + comp.stddev * rng.normal();
    return x;
}

// One draw from the wild mixture; returns the sample with its hidden label.
Sample draw_wild(const ContaminationSpec& spec, const std::vector<double>& weights, Rng& rng) {
    const std::size_t c = spec.classes();
    const std::size_t idx = rng.categorical(weights);
    Sample s;
    s.role = Sample::Role::Wild;
    if (idx < c) {
        s.true_label = static_cast<int>(idx) + 1;
        s.spectrum = draw_spectrum(spec.known_components[idx], rng);
    } else {
        s.true_label = 0;
        s.spectrum = draw_spectrum(spec.unknown_components[idx - c], rng);
    }
    return s;
}

// Mixture weights: class priors, then the unknown mass split evenly over the
// unknown components.
std::vector<double> mixture_weights(const ContaminationSpec& spec) {
    std::vector<double> w = spec.class_priors;
    const std::size_t ku = spec.unknown_components.size();
    for (std::size_t u = 0; u < ku; ++u)
        w.push_back(spec.unknown_mass / static_cast<double>(ku));
    return w;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::size_t ContaminationSpec::bands() const {
    if (!known_components.empty()) return known_components.front().mean.size();
    if (!unknown_components.empty()) return unknown_components.front().mean.size();
    return 0;
}

double ContaminationSpec::pi() const {
    double s = 0.0;
    for (double p : class_priors) s += p;
    return s;
}

void ContaminationSpec::validate() const {
    if (class_priors.size() != known_components.size())
        throw ConfigError("one prior per known component required");
    for (double p : class_priors)
        if (!(p >= 0.0)) throw ConfigError("class priors must be >= 0");
    if (!(unknown_mass >= 0.0)) throw ConfigError("unknown mass must be >= 0");
    if (std::abs(pi() + unknown_mass - 1.0) > 1e-12)
        throw ConfigError("class priors and unknown mass must sum to 1");
    if (unknown_mass > 0.0 && unknown_components.empty())
        throw ConfigError("unknown mass is positive but no unknown components given");
    const std::size_t d = bands();
    if (d == 0) throw ConfigError("contamination spec has no components");
    for (const auto& comp : known_components)
        if (comp.mean.size() != d || !(comp.stddev > 0.0))
            throw ConfigError("known components must share the band count and have stddev > 0");
    for (const auto& comp : unknown_components)
        if (comp.mean.size() != d || !(comp.stddev > 0.0))
            throw ConfigError("unknown components must share the band count and have stddev > 0");
}

ContaminationSpec synthetic_default(std::size_t classes, std::size_t unknown_classes,
                                    std::size_t bands, double sep, double sigma, double pi) {
    if (classes == 0 || bands < classes + 1)
        throw ConfigError("need at least one class and bands >= classes + 1");
    ContaminationSpec spec;
    spec.class_priors.assign(classes, pi / static_cast<double>(classes));
    spec.unknown_mass = 1.0 - pi;
    for (std::size_t c = 0; c < classes; ++c) {
        GaussianComponent comp;
        comp.mean.assign(bands, 0.0);
        comp.mean[c] = sep;
        comp.stddev = sigma;
        spec.known_components.push_back(std::move(comp));
    }
    for (std::size_t u = 0; u < unknown_classes; ++u) {
        // Halfway between knowns u and u+1 (wrapping), i.e. maximally
        // entangled with two known classes at once.
        GaussianComponent comp;
        comp.mean.assign(bands, 0.0);
        comp.mean[u % classes] = sep / 2.0;
        comp.mean[(u + 1) % classes] = sep / 2.0;
        comp.stddev = sigma;
        spec.unknown_components.push_back(std::move(comp));
    }
    spec.validate();
    return spec;
}

std::vector<Sample> sample_wild(const ContaminationSpec& spec, std::size_t n,
                                std::uint64_t seed) {
    spec.validate();
    if (n == 0) throw UsageError("sample_wild: n must be >= 1");
    Rng rng(mix_seed(seed, kStreamWild));
    const std::vector<double> weights = mixture_weights(spec);
    std::vector<Sample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(draw_wild(spec, weights, rng));
    return out;
}

Split make_split(const ContaminationSpec& spec, std::size_t per_class_labeled,
                 std::size_t n_wild, std::size_t n_test, std::uint64_t seed) {
    spec.validate();
    if (per_class_labeled == 0 || n_wild == 0 || n_test == 0)
        throw UsageError("make_split: all counts must be >= 1");
    Split split;

    Rng rng_k(mix_seed(seed, kStreamLabeled));
    for (std::size_t c = 0; c < spec.classes(); ++c) {
        for (std::size_t i = 0; i < per_class_labeled; ++i) {
            Sample s;
            s.role = Sample::Role::LabeledKnown;
            s.true_label = static_cast<int>(c) + 1;
            s.spectrum = draw_spectrum(spec.known_components[c], rng_k);
            split.labeled.push_back(std::move(s));
        }
    }

    split.wild = sample_wild(spec, n_wild, seed);

    Rng rng_t(mix_seed(seed, kStreamTest));
    const std::vector<double> weights = mixture_weights(spec);
    split.test.reserve(n_test);
    for (std::size_t i = 0; i < n_test; ++i) {
        Sample s = draw_wild(spec, weights, rng_t);
        s.role = Sample::Role::Test;
        split.test.push_back(std::move(s));
    }
    return split;
}

std::vector<Sample> sample_aux(const ContaminationSpec& spec, std::size_t n,
                               std::uint64_t seed, AuxSource source) {
    spec.validate();
    if (n == 0) throw UsageError("sample_aux: n must be >= 1");
    if (source == AuxSource::PureUnknown && spec.unknown_mass <= 0.0)
        throw ConfigError("pure-unknown auxiliary data requested but unknown mass is 0");
    if (source == AuxSource::WildMinusUnknown && spec.pi() <= 0.0)
        throw ConfigError("known-only auxiliary data requested but known mass is 0");

    Rng rng(mix_seed(seed, kStreamAux));
    const std::vector<double> weights = mixture_weights(spec);
    std::vector<Sample> out;
    out.reserve(n);
    // Rejection sampling on the hidden label keeps the within-part
    // distribution identical to the wild mixture's conditional.
    while (out.size() < n) {
        Sample s = draw_wild(spec, weights, rng);
        if (source == AuxSource::PureUnknown && s.true_label != 0) continue;
        if (source == AuxSource::WildMinusUnknown && s.true_label == 0) continue;
        out.push_back(std::move(s));
    }
    return out;
}

AuxSource aux_source_from_string(const std::string& s) {
    if (s == "wild") return AuxSource::Wild;
    if (s == "pure_unknown") return AuxSource::PureUnknown;
    if (s == "wild_minus_unknown") return AuxSource::WildMinusUnknown;
    throw ConfigError("unknown aux source '" + s +
                      "' (expected wild|pure_unknown|wild_minus_unknown)");
}

std::string to_string(AuxSource source) {
    switch (source) {
        case AuxSource::Wild: return "wild";
        case AuxSource::PureUnknown: return "pure_unknown";
        case AuxSource::WildMinusUnknown: return "wild_minus_unknown";
    }
    return "wild";
}

WildView::WildView(const std::vector<Sample>& wild) : samples_(&wild) {
    if (wild.empty()) throw UsageError("WildView over an empty wild set");
}

std::size_t WildView::bands() const { return samples_->front().spectrum.size(); }

std::span<const double> WildView::spectrum(std::size_t i) const {
    if (i >= samples_->size()) throw UsageError("wild sample index out of range");
    return (*samples_)[i].spectrum;
}

std::vector<Sample> load_csv(const std::string& path, const CsvSchema& schema,
                             Sample::Role role) {
    if (schema.band_count == 0) throw UsageError("CSV schema needs band_count >= 1");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    std::vector<Sample> out;
    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.push_back("");

        // A non-numeric first field on the first content line is a header.
        if (first_content_line) {
            first_content_line = false;
            char* end = nullptr;
            std::strtod(fields[0].c_str(), &end);
            if (end == fields[0].c_str()) continue;
        }

        if (fields.size() != schema.band_count + 1)
            throw ParseError("line " + std::to_string(line_no) + " of '" + path + "': expected " +
                             std::to_string(schema.band_count + 1) + " fields, got " +
                             std::to_string(fields.size()));

        Sample s;
        s.role = role;
        s.spectrum.resize(schema.band_count);
        for (std::size_t b = 0; b < schema.band_count; ++b) {
            char* end = nullptr;
            s.spectrum[b] = std::strtod(fields[b].c_str(), &end);
            if (end == fields[b].c_str() || *end != '\0')
                throw ParseError("line " + std::to_string(line_no) + " of '" + path +
                                 "': band column " + std::to_string(b + 1) + " is not numeric");
        }
        char* end = nullptr;
        const long label = std::strtol(fields[schema.band_count].c_str(), &end, 10);
        if (end == fields[schema.band_count].c_str() || *end != '\0')
            throw ParseError("line " + std::to_string(line_no) + " of '" + path +
                             "': label column is not an integer");
        s.true_label = label == schema.unknown_label_code ? 0 : static_cast<int>(label);
        if (s.true_label < 0)
            throw ParseError("line " + std::to_string(line_no) + " of '" + path +
                             "': negative class label");
        out.push_back(std::move(s));
    }
    if (schema.normalize) {
        const BandStats stats = compute_band_stats({&out});
        apply_band_stats(out, stats);
    }
    return out;
}

void write_csv(const std::string& path, const std::vector<Sample>& samples, bool mask_labels) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    if (samples.empty()) throw UsageError("refusing to write an empty sample set");
    const std::size_t bands = samples.front().spectrum.size();
    for (std::size_t b = 0; b < bands; ++b) out << "band_" << b << ",";
    out << "label\n";
    for (const Sample& s : samples) {
        if (s.spectrum.size() != bands) throw UsageError("inconsistent band count in samples");
        for (double v : s.spectrum) out << format_double(v) << ",";
        out << (mask_labels ? 0 : s.true_label) << "\n";
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

BandStats compute_band_stats(const std::vector<const std::vector<Sample>*>& sets) {
    BandStats stats;
    bool first = true;
    for (const auto* set : sets) {
        for (const Sample& s : *set) {
            if (first) {
                stats.min = s.spectrum;
                stats.max = s.spectrum;
                first = false;
                continue;
            }
            if (s.spectrum.size() != stats.min.size())
                throw UsageError("inconsistent band count across samples");
            for (std::size_t b = 0; b < s.spectrum.size(); ++b) {
                stats.min[b] = std::min(stats.min[b], s.spectrum[b]);
                stats.max[b] = std::max(stats.max[b], s.spectrum[b]);
            }
        }
    }
    if (first) throw UsageError("no samples to compute band statistics from");
    return stats;
}

void apply_band_stats(std::vector<Sample>& samples, const BandStats& stats) {
    for (Sample& s : samples) {
        if (s.spectrum.size() != stats.min.size())
            throw UsageError("band statistics do not match sample width");
        for (std::size_t b = 0; b < s.spectrum.size(); ++b) {
            const double range = stats.max[b] - stats.min[b];
            s.spectrum[b] = range > 0.0 ? (s.spectrum[b] - stats.min[b]) / range : 0.0;
        }
    }
}

void write_kv_file(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const auto& [key, value] : entries) out << key << "=" << value << "\n";
    if (!out) throw IoError("write to '" + path + "' failed");
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        const auto a = s.find_first_not_of(ws);
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(ws);
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(line_no) + " of '" + path +
                             "': expected key=value");
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

}  // namespace hopencls
