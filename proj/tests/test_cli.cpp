// End-to-end checks of the command-line tool: every subcommand runs against
// real files in a scratch directory, and failures are asserted through exit
// codes rather than internals.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const std::string kCli = HOPENCLS_CLI_PATH;

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "hopencls_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

int run_cli_capture(const std::string& args, const fs::path& log) {
    const std::string cmd = kCli + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::size_t line_count(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

// A dataset small enough that train finishes in well under a second.
void gen_small(const fs::path& dir, int seed = 5, const std::string& extra = "") {
    const int code = run_cli("gen --out-dir " + dir.string() +
                             " --classes 3 --unknown-classes 2 --bands 8 --per-class 5"
                             " --n-wild 40 --n-test 30 --seed " +
                             std::to_string(seed) + " " + extra);
    REQUIRE(code == 0);
}

const std::string kSmallTrainFlags =
    " --epochs 2 --base-lr 0.05 --hidden 8 --labeled-batch 6 --wild-batch 16 --seed 1";

}  // namespace

TEST_CASE("gen writes a complete dataset and is seed-deterministic") {
    const fs::path d1 = scratch("gen1");
    const fs::path d2 = scratch("gen2");
    const fs::path d3 = scratch("gen3");
    gen_small(d1, 5);
    gen_small(d2, 5);
    gen_small(d3, 6);

    for (const char* name : {"labeled.csv", "wild.csv", "wild_audit.csv", "test.csv",
                             "manifest.txt"}) {
        CAPTURE(name);
        CHECK(fs::exists(d1 / name));
        CHECK(slurp(d1 / name) == slurp(d2 / name));
    }
    CHECK(slurp(d1 / "labeled.csv") != slurp(d3 / "labeled.csv"));

    // The training-facing wild file is label-masked; the audit file is not.
    std::ifstream wild(d1 / "wild.csv");
    std::string line;
    REQUIRE(std::getline(wild, line));  // header
    while (std::getline(wild, line)) {
        CHECK(line.substr(line.rfind(',') + 1) == "0");
    }
}

TEST_CASE("gen with no known mass produces an all-unknown audit file") {
    const fs::path dir = scratch("gen_pi0");
    gen_small(dir, 7, "--pi 0.0");
    std::ifstream audit(dir / "wild_audit.csv");
    std::string line;
    REQUIRE(std::getline(audit, line));  // header
    std::size_t rows = 0;
    while (std::getline(audit, line)) {
        ++rows;
        CHECK(line.substr(line.rfind(',') + 1) == "0");
    }
    CHECK(rows == 40);
}

TEST_CASE("train produces checkpoints, history, metrics, and a manifest") {
    const fs::path data = scratch("train_data");
    const fs::path out = scratch("train_out");
    gen_small(data);

    const int code = run_cli("train --data-dir " + data.string() + " --out-dir " +
                             out.string() + kSmallTrainFlags);
    CHECK(code == 0);
    for (const char* name :
         {"checkpoint_seed1.bin", "history_seed1.csv", "metrics_seed1.csv",
          "confusion_seed1.csv", "metrics_summary.csv", "config.txt", "manifest.txt"}) {
        CAPTURE(name);
        CHECK(fs::exists(out / name));
    }
    CHECK(line_count(out / "history_seed1.csv") == 3);  // header + 2 epochs
}

TEST_CASE("training twice from the same seed gives byte-identical metrics") {
    const fs::path data = scratch("repeat_data");
    const fs::path out1 = scratch("repeat_out1");
    const fs::path out2 = scratch("repeat_out2");
    gen_small(data);

    const std::string args = "train --data-dir " + data.string() + kSmallTrainFlags;
    REQUIRE(run_cli(args + " --out-dir " + out1.string()) == 0);
    REQUIRE(run_cli(args + " --out-dir " + out2.string()) == 0);

    CHECK(slurp(out1 / "metrics_seed1.csv") == slurp(out2 / "metrics_seed1.csv"));
    CHECK(slurp(out1 / "history_seed1.csv") == slurp(out2 / "history_seed1.csv"));
    CHECK(slurp(out1 / "checkpoint_seed1.bin") == slurp(out2 / "checkpoint_seed1.bin"));
}

TEST_CASE("eval reproduces the metrics train computed for the same checkpoint") {
    const fs::path data = scratch("eval_data");
    const fs::path out = scratch("eval_train_out");
    const fs::path eval_out = scratch("eval_out");
    gen_small(data);
    REQUIRE(run_cli("train --data-dir " + data.string() + " --out-dir " + out.string() +
                    kSmallTrainFlags) == 0);

    const fs::path log = eval_out / "eval.log";
    fs::create_directories(eval_out);
    const int code = run_cli_capture(
        "eval --checkpoint " + (out / "checkpoint_seed1.bin").string() + " --data-dir " +
            data.string() + " --out-dir " + eval_out.string() + " --config " +
            (out / "config.txt").string(),
        log);
    CHECK(code == 0);
    CHECK(slurp(log).find("open_oa=") != std::string::npos);

    // Same checkpoint, same data, same score: identical bytes.
    CHECK(slurp(eval_out / "metrics.csv") == slurp(out / "metrics_seed1.csv"));
    CHECK(slurp(eval_out / "confusion.csv") == slurp(out / "confusion_seed1.csv"));
}

TEST_CASE("eval fails cleanly on missing test data or a mismatched config") {
    const fs::path data = scratch("evalfail_data");
    const fs::path out = scratch("evalfail_out");
    gen_small(data);
    REQUIRE(run_cli("train --data-dir " + data.string() + " --out-dir " + out.string() +
                    kSmallTrainFlags) == 0);
    const std::string ckpt = (out / "checkpoint_seed1.bin").string();
    const std::string config = (out / "config.txt").string();

    // Dataset directory without test.csv.
    const fs::path no_test = scratch("evalfail_notest");
    fs::copy_file(data / "labeled.csv", no_test / "labeled.csv");
    fs::copy_file(data / "wild.csv", no_test / "wild.csv");
    CHECK(run_cli("eval --checkpoint " + ckpt + " --data-dir " + no_test.string() +
                  " --out-dir " + scratch("evalfail_o1").string() + " --config " + config) == 2);

    // An empty test.csv is as useless as a missing one.
    std::ofstream(no_test / "test.csv").close();
    CHECK(run_cli("eval --checkpoint " + ckpt + " --data-dir " + no_test.string() +
                  " --out-dir " + scratch("evalfail_o2").string() + " --config " + config) == 2);

    // A config override that contradicts the checkpoint's hash.
    CHECK(run_cli("eval --checkpoint " + ckpt + " --data-dir " + data.string() +
                  " --out-dir " + scratch("evalfail_o3").string() + " --config " + config +
                  " --tau 0.5") == 2);

    // A checkpoint path that does not exist.
    CHECK(run_cli("eval --checkpoint " + (out / "nope.bin").string() + " --data-dir " +
                  data.string() + " --out-dir " + scratch("evalfail_o4").string() +
                  " --config " + config) == 3);
}

TEST_CASE("check-bounds passes and writes one report per check") {
    const fs::path out = scratch("bounds_out");
    const int code =
        run_cli("check-bounds --out-dir " + out.string() + " --trials 50 --seed 3");
    CHECK(code == 0);
    CHECK(line_count(out / "bounds.csv") == 101);  // header + 2 rows per trial
    CHECK(fs::exists(out / "weight_sweep.csv"));
    CHECK(slurp(out / "manifest.txt").find("violations=0") != std::string::npos);

    // Real datasets carry no ground-truth contamination prior.
    CHECK(run_cli("check-bounds --out-dir " + scratch("bounds_out2").string() +
                  " --data-dir " + out.string()) == 2);
}

TEST_CASE("a two-value sweep writes one summary row per value") {
    const fs::path out = scratch("sweep_out");
    const int code = run_cli(
        "sweep --axis t --values 1,2 --out-dir " + out.string() +
        " --sweep-seeds 1 --classes 3 --unknown-classes 2 --bands 8 --per-class 5"
        " --n-wild 40 --n-test 30" +
        kSmallTrainFlags);
    CHECK(code == 0);
    REQUIRE(fs::exists(out / "sweep.csv"));
    CHECK(line_count(out / "sweep.csv") == 3);

    std::ifstream in(out / "sweep.csv");
    std::string header, row;
    REQUIRE(std::getline(in, header));
    CHECK(header ==
          "axis,value,seeds,f1_u_mean,f1_u_stderr,open_oa_mean,open_oa_stderr,"
          "closed_oa_mean,closed_oa_stderr,auc_u_mean,auc_u_stderr");
    REQUIRE(std::getline(in, row));
    CHECK(row.substr(0, 2) == "t,");
}

TEST_CASE("usage and configuration mistakes map to distinct exit codes") {
    CHECK(run_cli("sweep --axis nonsense --out-dir " +
                  scratch("badaxis").string()) == 2);
    CHECK(run_cli("train --no-such-flag") == 1);
    CHECK(run_cli("definitely-not-a-subcommand") == 1);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("gen --help") == 0);

    const fs::path data = scratch("badcfg_data");
    gen_small(data);
    CHECK(run_cli("train --data-dir " + data.string() + " --out-dir " +
                  scratch("badcfg_out").string() + " --config /nonexistent/config.txt") == 3);

    // Training on a directory without the required files is a config error.
    CHECK(run_cli("train --data-dir " + scratch("empty_data").string() + " --out-dir " +
                  scratch("empty_out").string()) == 2);
}
