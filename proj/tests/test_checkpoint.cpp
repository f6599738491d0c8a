#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "hopencls/data.hpp"
#include "hopencls/errors.hpp"
#include "hopencls/trainer.hpp"

using namespace hopencls;

namespace {

TrainConfig resume_config() {
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.base_lr = 0.05;
    cfg.labeled_batch = 6;
    cfg.wild_batch = 8;
    cfg.hidden = {8};
    cfg.seed = 11;
    return cfg;
}

Split resume_split() {
    const ContaminationSpec spec = synthetic_default(3, 2, 8, 2.5, 1.0, 0.6);
    return make_split(spec, 4, 8, 10, 5);
}

Tensor2 pack(const std::vector<Sample>& samples) {
    Tensor2 x(samples.size(), samples.front().spectrum.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t j = 0; j < x.cols; ++j) x(i, j) = samples[i].spectrum[j];
    return x;
}

std::vector<std::vector<double>> snapshot(const Network& net) {
    std::vector<std::vector<double>> out;
    for (const Tensor2* t : net.param_tensors()) out.push_back(t->data);
    return out;
}

std::string temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "hopencls_checkpoint_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("a checkpoint restores parameters, confidence, and progress bitwise") {
    const Split split = resume_split();
    const WildView wild(split.wild);
    const TrainConfig cfg = resume_config();

    Trainer a(cfg, split.labeled, wild);
    a.run_epoch();
    a.run_epoch();
    const std::string path = temp_path("state.bin");
    a.save_checkpoint(path);

    Trainer b(cfg, split.labeled, wild);
    b.load_checkpoint(path);

    CHECK(b.epochs_done() == 2);
    REQUIRE(b.history().size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(b.history()[i].r_all == a.history()[i].r_all);
        CHECK(b.history()[i].lr == a.history()[i].lr);
    }
    CHECK(snapshot(b.contraction_net()) == snapshot(a.contraction_net()));
    CHECK(snapshot(b.expansion_net()) == snapshot(a.expansion_net()));
    CHECK(b.confidence().w_c().data == a.confidence().w_c().data);
    CHECK(b.confidence().w_e().data == a.confidence().w_e().data);
}

TEST_CASE("resumed training is indistinguishable from an uninterrupted run") {
    const Split split = resume_split();
    const WildView wild(split.wild);
    const TrainConfig cfg = resume_config();

    Trainer straight(cfg, split.labeled, wild);
    straight.run();  // all 4 epochs in one go

    Trainer first_half(cfg, split.labeled, wild);
    first_half.run_epoch();
    first_half.run_epoch();
    const std::string path = temp_path("resume.bin");
    first_half.save_checkpoint(path);

    Trainer second_half(cfg, split.labeled, wild);
    second_half.load_checkpoint(path);
    second_half.run();  // epochs 3 and 4

    REQUIRE(second_half.history().size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(second_half.history()[i].r_all == straight.history()[i].r_all);
        CHECK(second_half.history()[i].r_kl == straight.history()[i].r_kl);
    }
    CHECK(snapshot(second_half.contraction_net()) == snapshot(straight.contraction_net()));
    CHECK(snapshot(second_half.expansion_net()) == snapshot(straight.expansion_net()));

    const Tensor2 x = pack(split.test);
    const auto p1 = straight.predict(x);
    const auto p2 = second_half.predict(x);
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].final_label == p2[i].final_label);
        CHECK(p1[i].per_head_probs == p2[i].per_head_probs);
        CHECK(p1[i].q_probs == p2[i].q_probs);
    }
}

TEST_CASE("a single-network checkpoint round-trips") {
    const Split split = resume_split();
    const WildView wild(split.wild);
    TrainConfig cfg = resume_config();
    cfg.single_network = true;
    cfg.epochs = 2;

    Trainer a(cfg, split.labeled, wild);
    a.run_epoch();
    const std::string path = temp_path("single.bin");
    a.save_checkpoint(path);

    Trainer b(cfg, split.labeled, wild);
    b.load_checkpoint(path);
    CHECK(b.epochs_done() == 1);
    CHECK(snapshot(b.contraction_net()) == snapshot(a.contraction_net()));
}

TEST_CASE("corrupted checkpoints are refused without touching trainer state") {
    const Split split = resume_split();
    const WildView wild(split.wild);
    const TrainConfig cfg = resume_config();

    Trainer a(cfg, split.labeled, wild);
    a.run_epoch();
    const std::string path = temp_path("intact.bin");
    a.save_checkpoint(path);
    const std::vector<char> bytes = slurp(path);

    Trainer victim(cfg, split.labeled, wild);
    victim.run_epoch();
    const auto before = snapshot(victim.contraction_net());
    const int epochs_before = victim.epochs_done();

    SUBCASE("flipped payload byte") {
        std::vector<char> bad = bytes;
        bad[bad.size() / 2] ^= 0x40;
        const std::string bad_path = temp_path("flipped.bin");
        spit(bad_path, bad);
        CHECK_THROWS_AS(victim.load_checkpoint(bad_path), IoError);
    }
    SUBCASE("flipped checksum byte") {
        std::vector<char> bad = bytes;
        bad.back() ^= 0x01;
        const std::string bad_path = temp_path("badsum.bin");
        spit(bad_path, bad);
        CHECK_THROWS_AS(victim.load_checkpoint(bad_path), IoError);
    }
    SUBCASE("truncated file") {
        std::vector<char> bad(bytes.begin(), bytes.begin() + bytes.size() / 2);
        const std::string bad_path = temp_path("short.bin");
        spit(bad_path, bad);
        CHECK_THROWS_AS(victim.load_checkpoint(bad_path), IoError);
    }
    SUBCASE("wrong magic") {
        std::vector<char> bad = bytes;
        bad[0] ^= 0x7f;
        const std::string bad_path = temp_path("magic.bin");
        spit(bad_path, bad);
        CHECK_THROWS_AS(victim.load_checkpoint(bad_path), IoError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(victim.load_checkpoint(temp_path("nonexistent.bin")), IoError);
    }

    // Whatever failed above, the trainer must still be exactly where it was.
    CHECK(snapshot(victim.contraction_net()) == before);
    CHECK(victim.epochs_done() == epochs_before);
    CHECK_NOTHROW(victim.run_epoch());
}

TEST_CASE("a checkpoint from a different configuration is refused") {
    const Split split = resume_split();
    const WildView wild(split.wild);
    const TrainConfig cfg = resume_config();

    Trainer a(cfg, split.labeled, wild);
    a.run_epoch();
    const std::string path = temp_path("taumismatch.bin");
    a.save_checkpoint(path);

    TrainConfig other = cfg;
    other.tau = 0.9;
    Trainer b(other, split.labeled, wild);
    CHECK_THROWS_AS(b.load_checkpoint(path), ConfigError);

    TrainConfig reseeded = cfg;
    reseeded.seed = cfg.seed + 1;
    Trainer c(reseeded, split.labeled, wild);
    CHECK_THROWS_AS(c.load_checkpoint(path), ConfigError);
}
