// Command-line front end: dataset generation, training, evaluation,
// contamination-bound checking, and one-axis ablation sweeps. Every
// subcommand writes a manifest with the fully resolved configuration so a
// run can be reproduced from its output directory alone.
//
// Exit codes: 0 success, 1 usage, 2 configuration, 3 I/O, 4 numerics.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hopencls/data.hpp"
#include "hopencls/errors.hpp"
#include "hopencls/eval.hpp"
#include "hopencls/rng.hpp"
#include "hopencls/trainer.hpp"

namespace fs = std::filesystem;
using namespace hopencls;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_hidden(const std::vector<std::size_t>& h) {
    std::string s;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(h[i]);
    }
    return s;
}

std::vector<std::size_t> parse_hidden(const std::string& s) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t next = s.find('x', pos);
        const std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
        try {
            const long v = std::stol(tok);
            if (v <= 0) throw std::invalid_argument("nonpositive");
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError("bad hidden layer spec '" + s + "' (want e.g. 64x64)");
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (out.empty()) throw ConfigError("hidden layer spec is empty");
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

// Band count of a CSV dataset: fields per row minus the label column.
std::size_t peek_band_count(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t fields = 1 + static_cast<std::size_t>(
                                           std::count(line.begin(), line.end(), ','));
        if (fields < 2) throw ParseError("'" + path + "': too few columns");
        return fields - 1;
    }
    throw ParseError("'" + path + "': no rows");
}

struct Dataset {
    std::vector<Sample> labeled;
    std::vector<Sample> wild;
    std::vector<Sample> test;  // may be empty
    std::size_t bands = 0;
};

Dataset load_dataset(const std::string& dir, bool normalize) {
    const std::string labeled_path = dir + "/labeled.csv";
    const std::string wild_path = dir + "/wild.csv";
    const std::string test_path = dir + "/test.csv";
    if (!fs::exists(labeled_path) || !fs::exists(wild_path))
        throw ConfigError("dataset directory '" + dir + "' needs labeled.csv and wild.csv");

    Dataset ds;
    ds.bands = peek_band_count(labeled_path);
    CsvSchema schema;
    schema.band_count = ds.bands;
    ds.labeled = load_csv(labeled_path, schema, Sample::Role::LabeledKnown);
    ds.wild = load_csv(wild_path, schema, Sample::Role::Wild);
    if (fs::exists(test_path)) ds.test = load_csv(test_path, schema, Sample::Role::Test);

    if (normalize) {
        // Statistics from the training-side files only; test reuses them.
        const BandStats stats = compute_band_stats({&ds.labeled, &ds.wild});
        apply_band_stats(ds.labeled, stats);
        apply_band_stats(ds.wild, stats);
        apply_band_stats(ds.test, stats);
    }
    return ds;
}

Tensor2 pack_spectra(const std::vector<Sample>& samples) {
    if (samples.empty()) throw UsageError("empty sample set");
    Tensor2 x(samples.size(), samples[0].spectrum.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        std::copy(samples[i].spectrum.begin(), samples[i].spectrum.end(), x.row(i).begin());
    return x;
}

std::vector<int> truths_of(const std::vector<Sample>& samples) {
    std::vector<int> t;
    t.reserve(samples.size());
    for (const Sample& s : samples) t.push_back(s.true_label);
    return t;
}

// --- TrainConfig <-> flags/config file -----------------------------------

// One CLI option per TrainConfig field (kebab-case), each also settable from
// a key=value config file; explicit flags beat the file.
struct TrainOptions {
    TrainConfig cfg;
    std::string weighting = to_string(TrainConfig{}.weighting);
    std::string mode_c = to_string(TrainConfig{}.mode_c);
    std::string mode_e = to_string(TrainConfig{}.mode_e);
    std::string deploy = to_string(TrainConfig{}.deploy);
    std::string contraction_loss = to_string(TrainConfig{}.contraction_loss);
    std::string hidden = fmt_hidden(TrainConfig{}.hidden);

    std::map<std::string, CLI::Option*> opts;

    void add_flags(CLI::App* app) {
        opts["epochs"] = app->add_option("--epochs", cfg.epochs, "training epochs");
        opts["base_lr"] = app->add_option("--base-lr", cfg.base_lr, "peak learning rate");
        opts["momentum"] = app->add_option("--momentum", cfg.momentum, "SGD momentum");
        opts["weight_decay"] =
            app->add_option("--weight-decay", cfg.weight_decay, "L2 coefficient");
        opts["beta"] = app->add_option("--beta", cfg.beta, "alignment-term coefficient");
        opts["taylor_order"] =
            app->add_option("--taylor-order", cfg.taylor_order, "truncation order t");
        opts["tau"] = app->add_option("--tau", cfg.tau, "discrete-update threshold");
        opts["alpha"] = app->add_option("--alpha", cfg.alpha, "confidence EMA smoothing");
        opts["labeled_batch"] =
            app->add_option("--labeled-batch", cfg.labeled_batch, "labeled batch size");
        opts["wild_batch"] = app->add_option("--wild-batch", cfg.wild_batch, "wild batch size");
        opts["seed"] = app->add_option("--seed", cfg.seed, "base RNG seed");
        opts["single_network"] = app->add_flag("--single-network", cfg.single_network,
                                               "one parameter set for both loss branches");
        opts["weighting"] =
            app->add_option("--weighting", weighting, "confidence weighting: none|pro|mixpro");
        opts["mode_c"] =
            app->add_option("--mode-c", mode_c, "w_c update: continuous|discrete");
        opts["mode_e"] =
            app->add_option("--mode-e", mode_e, "w_e update: continuous|discrete");
        opts["hidden"] = app->add_option("--hidden", hidden, "extractor widths, e.g. 64x64");
        opts["threshold"] =
            app->add_option("--threshold", cfg.threshold, "rejection decision cutoff");
        opts["deploy"] =
            app->add_option("--deploy", deploy, "prediction source: net-c|net-e|average");
        opts["multi_pu"] = app->add_option("--multi-pu", cfg.multi_pu,
                                           "per-class rejection heads (0 = one pooled head)");
        opts["contraction_loss"] = app->add_option("--contraction-loss", contraction_loss,
                                                   "contraction-side loss: bce|tbce");
    }

    // Applies `file` entries to every option the command line left untouched.
    void apply_config_file(const std::string& path) {
        const auto kv = read_kv_file(path);
        for (const auto& [key, value] : kv) {
            auto it = opts.find(key);
            if (it == opts.end()) throw ConfigError("unknown config key '" + key + "'");
            if (it->second->count() > 0) continue;  // explicit flag wins
            try {
                if (key == "epochs") cfg.epochs = std::stoi(value);
                else if (key == "base_lr") cfg.base_lr = std::stod(value);
                else if (key == "momentum") cfg.momentum = std::stod(value);
                else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
                else if (key == "beta") cfg.beta = std::stod(value);
                else if (key == "taylor_order") cfg.taylor_order = std::stoi(value);
                else if (key == "tau") cfg.tau = std::stod(value);
                else if (key == "alpha") cfg.alpha = std::stod(value);
                else if (key == "labeled_batch") cfg.labeled_batch = std::stoi(value);
                else if (key == "wild_batch") cfg.wild_batch = std::stoi(value);
                else if (key == "seed") cfg.seed = std::stoull(value);
                else if (key == "single_network") cfg.single_network = (value == "1" || value == "true");
                else if (key == "weighting") weighting = value;
                else if (key == "mode_c") mode_c = value;
                else if (key == "mode_e") mode_e = value;
                else if (key == "hidden") hidden = value;
                else if (key == "threshold") cfg.threshold = std::stod(value);
                else if (key == "deploy") deploy = value;
                else if (key == "multi_pu") cfg.multi_pu = (value == "1" || value == "true");
                else if (key == "contraction_loss") contraction_loss = value;
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception&) {
                throw ConfigError("bad value '" + value + "' for config key '" + key + "'");
            }
        }
    }

    TrainConfig resolve() {
        cfg.weighting = weighting_from_string(weighting);
        cfg.mode_c = update_mode_from_string(mode_c);
        cfg.mode_e = update_mode_from_string(mode_e);
        cfg.deploy = deploy_from_string(deploy);
        cfg.contraction_loss = reject_loss_from_string(contraction_loss);
        cfg.hidden = parse_hidden(hidden);
        cfg.validate();
        return cfg;
    }
};

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg) {
    return {
        {"epochs", std::to_string(cfg.epochs)},
        {"base_lr", fmt_double(cfg.base_lr)},
        {"momentum", fmt_double(cfg.momentum)},
        {"weight_decay", fmt_double(cfg.weight_decay)},
        {"beta", fmt_double(cfg.beta)},
        {"taylor_order", std::to_string(cfg.taylor_order)},
        {"tau", fmt_double(cfg.tau)},
        {"alpha", fmt_double(cfg.alpha)},
        {"labeled_batch", std::to_string(cfg.labeled_batch)},
        {"wild_batch", std::to_string(cfg.wild_batch)},
        {"seed", std::to_string(cfg.seed)},
        {"single_network", cfg.single_network ? "1" : "0"},
        {"weighting", to_string(cfg.weighting)},
        {"mode_c", to_string(cfg.mode_c)},
        {"mode_e", to_string(cfg.mode_e)},
        {"hidden", fmt_hidden(cfg.hidden)},
        {"threshold", fmt_double(cfg.threshold)},
        {"deploy", to_string(cfg.deploy)},
        {"multi_pu", cfg.multi_pu ? "1" : "0"},
        {"contraction_loss", to_string(cfg.contraction_loss)},
    };
}

// --- mean / standard error over seeds -------------------------------------

struct SummaryStat {
    double mean = 0.0;
    double stderr_ = 0.0;
};

SummaryStat summarize(const std::vector<double>& xs) {
    SummaryStat s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1)) /
                    std::sqrt(static_cast<double>(xs.size()));
    }
    return s;
}

void write_summary_csv(const std::string& path,
                       const std::vector<std::pair<std::string, SummaryStat>>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "metric,mean,stderr\n";
    for (const auto& [name, s] : rows)
        out << name << ',' << fmt_double(s.mean * 100.0) << ',' << fmt_double(s.stderr_ * 100.0)
            << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

// --- gen -------------------------------------------------------------------

struct GenArgs {
    std::string out_dir;
    std::size_t classes = 3;
    std::size_t unknown_classes = 2;
    std::size_t bands = 20;
    double sep = 2.5;
    double sigma = 1.0;
    double pi = 0.6;
    std::size_t per_class = 100;
    std::size_t n_wild = 4000;
    std::size_t n_test = 5000;
    std::uint64_t seed = 1;
};

int cmd_gen(const GenArgs& a) {
    const ContaminationSpec spec =
        synthetic_default(a.classes, a.unknown_classes, a.bands, a.sep, a.sigma, a.pi);
    const Split split = make_split(spec, a.per_class, a.n_wild, a.n_test, a.seed);

    ensure_dir(a.out_dir);
    write_csv(a.out_dir + "/labeled.csv", split.labeled);
    write_csv(a.out_dir + "/wild.csv", split.wild, /*mask_labels=*/true);
    write_csv(a.out_dir + "/wild_audit.csv", split.wild);  // hidden truth, audit only
    write_csv(a.out_dir + "/test.csv", split.test);
    write_kv_file(a.out_dir + "/manifest.txt",
                  {{"subcommand", "gen"},
                   {"classes", std::to_string(a.classes)},
                   {"unknown_classes", std::to_string(a.unknown_classes)},
                   {"bands", std::to_string(a.bands)},
                   {"sep", fmt_double(a.sep)},
                   {"sigma", fmt_double(a.sigma)},
                   {"pi", fmt_double(a.pi)},
                   {"per_class", std::to_string(a.per_class)},
                   {"n_wild", std::to_string(a.n_wild)},
                   {"n_test", std::to_string(a.n_test)},
                   {"seed", std::to_string(a.seed)},
                   {"format_version", "1"}});
    std::cout << "wrote labeled/wild/test CSVs to " << a.out_dir << "\n";
    return 0;
}

// --- train -------------------------------------------------------------------

struct SeedOutcome {
    std::uint64_t seed;
    MetricsReport report;
};

int cmd_train(TrainOptions& topt, const std::string& config_file, const std::string& data_dir,
              const std::string& out_dir, int n_seeds, bool normalize) {
    if (!config_file.empty()) topt.apply_config_file(config_file);
    TrainConfig cfg = topt.resolve();
    if (n_seeds < 1) throw ConfigError("--seeds must be >= 1");

    const Dataset ds = load_dataset(data_dir, normalize);
    ensure_dir(out_dir);

    std::vector<SeedOutcome> outcomes;
    for (int k = 0; k < n_seeds; ++k) {
        TrainConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(k);
        const std::string tag = "_seed" + std::to_string(run_cfg.seed);

        Trainer trainer(run_cfg, ds.labeled, WildView(ds.wild));
        trainer.run();
        trainer.save_checkpoint(out_dir + "/checkpoint" + tag + ".bin");
        write_history_csv(out_dir + "/history" + tag + ".csv", trainer.history());

        if (!ds.test.empty()) {
            const auto preds = trainer.predict(pack_spectra(ds.test));
            const auto truths = truths_of(ds.test);
            const MetricsReport report = compute_metrics(preds, truths);
            write_metrics_csv(out_dir + "/metrics" + tag + ".csv", report);
            write_confusion_csv(out_dir + "/confusion" + tag + ".csv", report);
            outcomes.push_back({run_cfg.seed, report});
        }
    }

    if (!outcomes.empty()) {
        std::vector<double> open_oa, closed_oa, f1_u, auc_u;
        for (const auto& o : outcomes) {
            open_oa.push_back(o.report.open_oa);
            closed_oa.push_back(o.report.closed_oa);
            f1_u.push_back(o.report.f1_u);
            auc_u.push_back(o.report.auc_u);
        }
        write_summary_csv(out_dir + "/metrics_summary.csv", {{"open_oa", summarize(open_oa)},
                                                             {"closed_oa", summarize(closed_oa)},
                                                             {"f1_u", summarize(f1_u)},
                                                             {"auc_u", summarize(auc_u)}});
    }

    // config.txt feeds straight back into --config; manifest.txt adds the
    // run context on top.
    write_kv_file(out_dir + "/config.txt", config_entries(cfg));
    auto manifest = config_entries(cfg);
    manifest.emplace_back("subcommand", "train");
    manifest.emplace_back("data_dir", data_dir);
    manifest.emplace_back("seeds", std::to_string(n_seeds));
    manifest.emplace_back("normalize", normalize ? "1" : "0");
    manifest.emplace_back("config_hash", std::to_string(cfg.hash()));
    manifest.emplace_back("format_version", "1");
    write_kv_file(out_dir + "/manifest.txt", manifest);

    std::cout << "trained " << n_seeds << " seed(s); outputs in " << out_dir << "\n";
    return 0;
}

// --- eval -------------------------------------------------------------------

int cmd_eval(TrainOptions& topt, const std::string& config_file, const std::string& checkpoint,
             const std::string& data_dir, const std::string& out_dir, bool normalize,
             const std::string& score_name) {
    if (!config_file.empty()) topt.apply_config_file(config_file);
    const TrainConfig cfg = topt.resolve();

    UnknownScore score;
    if (score_name == "pu") score = UnknownScore::OneMinusMaxPu;
    else if (score_name == "mix") score = UnknownScore::OneMinusMaxMix;
    else throw ConfigError("unknown --score '" + score_name + "' (want pu|mix)");

    const Dataset ds = load_dataset(data_dir, normalize);
    if (ds.test.empty()) throw ConfigError("dataset '" + data_dir + "' has no test.csv");

    Trainer trainer(cfg, ds.labeled, WildView(ds.wild));
    trainer.load_checkpoint(checkpoint);

    const auto preds = trainer.predict(pack_spectra(ds.test));
    const auto truths = truths_of(ds.test);
    const MetricsReport report = compute_metrics(preds, truths, score);

    ensure_dir(out_dir);
    write_metrics_csv(out_dir + "/metrics.csv", report);
    write_metrics_text(out_dir + "/metrics.txt", report);
    write_confusion_csv(out_dir + "/confusion.csv", report);

    auto manifest = config_entries(cfg);
    manifest.emplace_back("subcommand", "eval");
    manifest.emplace_back("checkpoint", checkpoint);
    manifest.emplace_back("data_dir", data_dir);
    manifest.emplace_back("score", score_name);
    manifest.emplace_back("format_version", "1");
    write_kv_file(out_dir + "/manifest.txt", manifest);

    std::cout << "open_oa=" << report.open_oa * 100.0 << " closed_oa=" << report.closed_oa * 100.0
              << " f1_u=" << report.f1_u * 100.0 << " auc_u=" << report.auc_u * 100.0 << "\n";
    return 0;
}

// --- check-bounds -------------------------------------------------------------

struct BoundArgs {
    std::string out_dir;
    std::string data_dir;  // real-data mode is rejected: pi is unknown there
    int trials = 1000;
    int levels = 21;
    int max_atoms = 12;
    int t_max = 6;
    std::uint64_t seed = 1;
    std::size_t mc_draws = 0;
};

int cmd_check_bounds(const BoundArgs& a) {
    if (!a.data_dir.empty())
        throw ConfigError(
            "bound checking needs a generator with a known class-prior mass; "
            "real datasets (unknown pi) are unsupported");
    if (a.trials < 1) throw ConfigError("--trials must be >= 1");
    if (a.max_atoms < 2 || a.max_atoms > 12) throw ConfigError("--max-atoms must be in [2,12]");
    if (a.t_max < 1) throw ConfigError("--t-max must be >= 1");

    Rng rng(a.seed);
    std::vector<BoundReport> reports;
    reports.reserve(static_cast<std::size_t>(a.trials));
    std::size_t violations = 0;

    for (int trial = 0; trial < a.trials; ++trial) {
        const int atoms = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(a.max_atoms - 1)));
        DiscreteToy toy;
        toy.p_k.resize(atoms);
        toy.p_u.resize(atoms);
        double sk = 0.0, su = 0.0;
        for (int i = 0; i < atoms; ++i) {
            toy.p_k[i] = rng.uniform();
            toy.p_u[i] = rng.uniform();
            sk += toy.p_k[i];
            su += toy.p_u[i];
        }
        for (int i = 0; i < atoms; ++i) {
            toy.p_k[i] /= sk;
            toy.p_u[i] /= su;
        }
        toy.pi = rng.uniform();
        const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(a.t_max)));

        // Random table for the sandwich, then the exhaustive minimizer pair
        // for the excess-risk inequalities.
        std::vector<double> f(atoms);
        for (double& v : f) v = rng.uniform();
        BoundReport r1 = check_theorem_bound(toy, f, t);
        BoundReport r2 = check_theorem_minimizers(toy, t, a.levels);
        if (!r1.holds) ++violations;
        if (!r2.holds) ++violations;
        reports.push_back(r1);
        reports.push_back(r2);
    }

    ensure_dir(a.out_dir);
    write_bounds_csv(a.out_dir + "/bounds.csv", reports);

    const std::vector<int> t_values = [&] {
        std::vector<int> ts;
        for (int t = 1; t <= a.t_max; ++t) ts.push_back(t);
        return ts;
    }();
    std::vector<double> f_grid;
    for (int i = 1; i < 100; ++i) f_grid.push_back(i / 100.0);
    write_weight_sweep_csv(a.out_dir + "/weight_sweep.csv",
                           gradient_weight_sweep(t_values, f_grid));

    if (a.mc_draws > 0) {
        // Smooth classifier over the default generator: a seeded random
        // projection through a sigmoid.
        const ContaminationSpec spec = synthetic_default();
        Rng wrng(mix_seed(a.seed, 99));
        std::vector<double> proj(spec.bands());
        for (double& v : proj) v = wrng.normal();
        auto f = [&proj](std::span<const double> x) {
            double z = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) z += proj[i] * x[i];
            return 1.0 / (1.0 + std::exp(-z / std::sqrt(static_cast<double>(proj.size()))));
        };
        const BoundReport mc = check_theorem_mc(spec, f, 2, a.mc_draws, a.seed);
        write_bounds_csv(a.out_dir + "/bounds_mc.csv", {mc});
        if (!mc.holds) ++violations;
    }

    write_kv_file(a.out_dir + "/manifest.txt",
                  {{"subcommand", "check-bounds"},
                   {"trials", std::to_string(a.trials)},
                   {"levels", std::to_string(a.levels)},
                   {"max_atoms", std::to_string(a.max_atoms)},
                   {"t_max", std::to_string(a.t_max)},
                   {"seed", std::to_string(a.seed)},
                   {"mc_draws", std::to_string(a.mc_draws)},
                   {"violations", std::to_string(violations)},
                   {"format_version", "1"}});

    std::cout << reports.size() << " bound checks, " << violations << " violation(s)\n";
    return violations == 0 ? 0 : kExitNumeric;
}

// --- sweep -------------------------------------------------------------------

struct SweepArgs {
    std::string axis;
    std::vector<std::string> values;
    std::string out_dir;
    int seeds = 5;
    // Synthetic data parameters (each sweep run generates its own split).
    std::size_t classes = 3, unknown_classes = 2, bands = 20;
    double sep = 2.5, sigma = 1.0, pi = 0.6;
    std::size_t per_class = 100, n_wild = 2000, n_test = 2000;
    std::uint64_t data_seed = 1;
};

std::vector<std::string> default_axis_values(const std::string& axis) {
    if (axis == "t") return {"1", "2", "3", "4", "5", "6"};
    if (axis == "beta") return {"0", "0.5", "1", "2"};
    if (axis == "tau") return {"0.5", "0.8", "0.9", "0.95", "0.99"};
    if (axis == "updating") return {"continuous", "discrete", "default"};
    if (axis == "weighting") return {"none", "pro", "mixpro"};
    if (axis == "aux_source") return {"wild", "pure_unknown", "wild_minus_unknown"};
    throw ConfigError("unknown sweep axis '" + axis + "'");
}

void apply_axis(TrainConfig& cfg, AuxSource& aux, const std::string& axis,
                const std::string& value) {
    // stoi/stod accept trailing garbage ("1,2" parses as 1); insist the whole
    // token was consumed.
    const auto whole_int = [&](const std::string& s) {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw ConfigError("bad value '" + s + "' for sweep axis");
        return v;
    };
    const auto whole_double = [&](const std::string& s) {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw ConfigError("bad value '" + s + "' for sweep axis");
        return v;
    };
    try {
        if (axis == "t") cfg.taylor_order = whole_int(value);
        else if (axis == "beta") cfg.beta = whole_double(value);
        else if (axis == "tau") cfg.tau = whole_double(value);
        else if (axis == "updating") {
            // Both EMA streams share the named rule; "default" restores the
            // crossed pairing (continuous w_c, thresholded w_e).
            if (value == "continuous") cfg.mode_c = cfg.mode_e = UpdateMode::Continuous;
            else if (value == "discrete") cfg.mode_c = cfg.mode_e = UpdateMode::Discrete;
            else if (value == "default") {
                const auto [mc, me] = default_modes();
                cfg.mode_c = mc;
                cfg.mode_e = me;
            } else throw ConfigError("updating axis wants continuous|discrete|default");
        } else if (axis == "weighting") cfg.weighting = weighting_from_string(value);
        else if (axis == "aux_source") aux = aux_source_from_string(value);
        else throw ConfigError("unknown sweep axis '" + axis + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad value '" + value + "' for sweep axis '" + axis + "'");
    }
}

int cmd_sweep(TrainOptions& topt, const std::string& config_file, SweepArgs& a) {
    if (!config_file.empty()) topt.apply_config_file(config_file);
    const TrainConfig base_cfg = topt.resolve();
    if (a.seeds < 1) throw ConfigError("--seeds must be >= 1");
    if (a.values.empty()) a.values = default_axis_values(a.axis);

    const ContaminationSpec spec =
        synthetic_default(a.classes, a.unknown_classes, a.bands, a.sep, a.sigma, a.pi);

    ensure_dir(a.out_dir);
    const std::string sweep_path = a.out_dir + "/sweep.csv";
    std::ofstream out(sweep_path);
    if (!out) throw IoError("cannot open '" + sweep_path + "' for writing");
    out << "axis,value,seeds,f1_u_mean,f1_u_stderr,open_oa_mean,open_oa_stderr,"
           "closed_oa_mean,closed_oa_stderr,auc_u_mean,auc_u_stderr\n";

    for (const std::string& value : a.values) {
        TrainConfig cfg = base_cfg;
        AuxSource aux = AuxSource::Wild;
        apply_axis(cfg, aux, a.axis, value);
        cfg.validate();

        std::vector<double> f1_u, open_oa, closed_oa, auc_u;
        for (int k = 0; k < a.seeds; ++k) {
            const std::uint64_t seed = base_cfg.seed + static_cast<std::uint64_t>(k);
            Split split = make_split(spec, a.per_class, a.n_wild, a.n_test,
                                     a.data_seed + static_cast<std::uint64_t>(k));
            if (aux != AuxSource::Wild)
                split.wild = sample_aux(spec, a.n_wild,
                                        mix_seed(a.data_seed + static_cast<std::uint64_t>(k), 21),
                                        aux);
            TrainConfig run_cfg = cfg;
            run_cfg.seed = seed;
            Trainer trainer(run_cfg, split.labeled, WildView(split.wild));
            trainer.run();
            const auto preds = trainer.predict(pack_spectra(split.test));
            const auto truths = truths_of(split.test);
            const MetricsReport rep = compute_metrics(preds, truths);
            f1_u.push_back(rep.f1_u);
            open_oa.push_back(rep.open_oa);
            closed_oa.push_back(rep.closed_oa);
            auc_u.push_back(rep.auc_u);
        }
        const SummaryStat sf = summarize(f1_u), so = summarize(open_oa), sc = summarize(closed_oa),
                          sa = summarize(auc_u);
        out << a.axis << ',' << value << ',' << a.seeds;
        for (const SummaryStat& s : {sf, so, sc, sa})
            out << ',' << fmt_double(s.mean * 100.0) << ',' << fmt_double(s.stderr_ * 100.0);
        out << '\n';
    }
    if (!out) throw IoError("write to '" + sweep_path + "' failed");
    out.close();

    auto manifest = config_entries(base_cfg);
    manifest.emplace_back("subcommand", "sweep");
    manifest.emplace_back("axis", a.axis);
    {
        std::string joined;
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            if (i) joined += ';';
            joined += a.values[i];
        }
        manifest.emplace_back("values", joined);
    }
    manifest.emplace_back("sweep_seeds", std::to_string(a.seeds));
    manifest.emplace_back("data_seed", std::to_string(a.data_seed));
    manifest.emplace_back("per_class", std::to_string(a.per_class));
    manifest.emplace_back("n_wild", std::to_string(a.n_wild));
    manifest.emplace_back("n_test", std::to_string(a.n_test));
    manifest.emplace_back("sep", fmt_double(a.sep));
    manifest.emplace_back("sigma", fmt_double(a.sigma));
    manifest.emplace_back("pi", fmt_double(a.pi));
    manifest.emplace_back("format_version", "1");
    write_kv_file(a.out_dir + "/manifest.txt", manifest);

    std::cout << "sweep over " << a.axis << " (" << a.values.size() << " values) -> "
              << sweep_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-set classifier with PU rejection heads trained on wild data"};
    app.require_subcommand(1);

    // gen
    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
    gen_cmd->add_option("--out-dir", gen.out_dir, "output directory")->required();
    gen_cmd->add_option("--classes", gen.classes, "known classes");
    gen_cmd->add_option("--unknown-classes", gen.unknown_classes, "unknown classes");
    gen_cmd->add_option("--bands", gen.bands, "spectrum length");
    gen_cmd->add_option("--sep", gen.sep, "known-class peak height");
    gen_cmd->add_option("--sigma", gen.sigma, "component spread");
    gen_cmd->add_option("--pi", gen.pi, "known-class mass inside wild data");
    gen_cmd->add_option("--per-class", gen.per_class, "labeled samples per class");
    gen_cmd->add_option("--n-wild", gen.n_wild, "wild samples");
    gen_cmd->add_option("--n-test", gen.n_test, "test samples");
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");

    // train
    TrainOptions train_opt;
    std::string train_config, train_data, train_out;
    int train_seeds = 1;
    bool train_norm = false;
    CLI::App* train_cmd = app.add_subcommand("train", "train on a dataset directory");
    train_cmd->add_option("--data-dir", train_data, "directory with labeled.csv/wild.csv")
        ->required();
    train_cmd->add_option("--out-dir", train_out, "output directory")->required();
    train_cmd->add_option("--config", train_config, "key=value config file");
    train_cmd->add_option("--seeds", train_seeds, "consecutive seeds starting at --seed");
    train_cmd->add_flag("--normalize", train_norm, "min-max normalize from train-side stats");
    train_opt.add_flags(train_cmd);

    // eval
    TrainOptions eval_opt;
    std::string eval_config, eval_ckpt, eval_data, eval_out, eval_score = "pu";
    bool eval_norm = false;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on test.csv");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--data-dir", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--out-dir", eval_out, "output directory")->required();
    eval_cmd->add_option("--config", eval_config, "config file the checkpoint was trained under");
    eval_cmd->add_option("--score", eval_score, "unknownness score: pu|mix");
    eval_cmd->add_flag("--normalize", eval_norm, "min-max normalize from train-side stats");
    eval_opt.add_flags(eval_cmd);

    // check-bounds
    BoundArgs bounds;
    CLI::App* bounds_cmd =
        app.add_subcommand("check-bounds", "verify the contamination risk bounds");
    bounds_cmd->add_option("--out-dir", bounds.out_dir, "output directory")->required();
    bounds_cmd->add_option("--data-dir", bounds.data_dir, "(rejected: pi unknown on real data)");
    bounds_cmd->add_option("--trials", bounds.trials, "random discrete trials");
    bounds_cmd->add_option("--levels", bounds.levels, "probability quantization levels");
    bounds_cmd->add_option("--max-atoms", bounds.max_atoms, "max atoms per toy space");
    bounds_cmd->add_option("--t-max", bounds.t_max, "max truncation order");
    bounds_cmd->add_option("--seed", bounds.seed, "RNG seed");
    bounds_cmd->add_option("--mc-draws", bounds.mc_draws, "Monte-Carlo draws (0 = skip)");

    // sweep
    TrainOptions sweep_opt;
    std::string sweep_config;
    SweepArgs sweep;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "one-axis ablation sweep");
    sweep_cmd->add_option("--axis", sweep.axis, "t|beta|tau|updating|weighting|aux_source")
        ->required();
    sweep_cmd->add_option("--values", sweep.values, "axis values (defaults per axis)")
        ->delimiter(',');
    sweep_cmd->add_option("--out-dir", sweep.out_dir, "output directory")->required();
    sweep_cmd->add_option("--config", sweep_config, "key=value config file");
    sweep_cmd->add_option("--sweep-seeds", sweep.seeds, "seeds per value");
    sweep_cmd->add_option("--classes", sweep.classes, "known classes");
    sweep_cmd->add_option("--unknown-classes", sweep.unknown_classes, "unknown classes");
    sweep_cmd->add_option("--bands", sweep.bands, "spectrum length");
    sweep_cmd->add_option("--sep", sweep.sep, "known-class peak height");
    sweep_cmd->add_option("--sigma", sweep.sigma, "component spread");
    sweep_cmd->add_option("--pi", sweep.pi, "known-class mass inside wild data");
    sweep_cmd->add_option("--per-class", sweep.per_class, "labeled samples per class");
    sweep_cmd->add_option("--n-wild", sweep.n_wild, "wild samples");
    sweep_cmd->add_option("--n-test", sweep.n_test, "test samples");
    sweep_cmd->add_option("--data-seed", sweep.data_seed, "dataset RNG seed");
    sweep_opt.add_flags(sweep_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen(gen);
        if (train_cmd->parsed())
            return cmd_train(train_opt, train_config, train_data, train_out, train_seeds,
                             train_norm);
        if (eval_cmd->parsed())
            return cmd_eval(eval_opt, eval_config, eval_ckpt, eval_data, eval_out, eval_norm,
                            eval_score);
        if (bounds_cmd->parsed()) return cmd_check_bounds(bounds);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_opt, sweep_config, sweep);
        std::cerr << "error: no subcommand\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitIo;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
