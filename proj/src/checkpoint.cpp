// Binary checkpoint container for Trainer: a magic tag, a checksummed
// payload holding the config hash, epoch counter, RNG stream, every
// parameter and velocity tensor, the confidence weights, and the epoch
// history. Loading parses into temporaries and validates everything before
// committing, so a corrupt or mismatched file never leaves partial state.

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "hopencls/errors.hpp"
#include "hopencls/trainer.hpp"

namespace hopencls {

namespace {

constexpr char kMagic[8] = {'H', 'O', 'C', 'K', 'P', 'T', '0', '1'};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u8(std::string& buf, std::uint8_t v) { buf.push_back(static_cast<char>(v)); }

void put_double(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(buf, bits);
}

void put_string(std::string& buf, const std::string& s) {
    put_u64(buf, s.size());
    buf.append(s);
}

void put_tensor(std::string& buf, const Tensor2& t) {
    put_u64(buf, t.rows);
    put_u64(buf, t.cols);
    for (double v : t.data) put_double(buf, v);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw IoError("checkpoint truncated");
    }
    std::uint64_t get_u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    std::uint8_t get_u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    double get_double() {
        const std::uint64_t bits = get_u64();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string get_string() {
        const std::uint64_t n = get_u64();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    Tensor2 get_tensor() {
        const std::uint64_t rows = get_u64();
        const std::uint64_t cols = get_u64();
        if (rows > (1u << 24) || cols > (1u << 24)) throw IoError("implausible tensor shape");
        Tensor2 t(rows, cols);
        for (double& v : t.data) v = get_double();
        return t;
    }
};

void put_params(std::string& buf, const Network& net) {
    const auto params = net.param_tensors();
    put_u64(buf, params.size());
    for (const Tensor2* t : params) put_tensor(buf, *t);
}

std::vector<Tensor2> get_tensor_list(Reader& r) {
    const std::uint64_t n = r.get_u64();
    if (n > 4096) throw IoError("implausible tensor count");
    std::vector<Tensor2> out;
    out.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(r.get_tensor());
    return out;
}

void put_velocity(std::string& buf, const SgdOptimizer& opt) {
    put_u8(buf, opt.has_velocity() ? 1 : 0);
    if (!opt.has_velocity()) return;
    const auto ts = opt.velocity().tensors();
    put_u64(buf, ts.size());
    for (const Tensor2* t : ts) put_tensor(buf, *t);
}

// Copy a flat tensor list into network parameters (or a Gradients layout),
// insisting on identical shapes.
void apply_tensors(const std::vector<Tensor2>& src, std::vector<Tensor2*> dst,
                   const char* what) {
    if (src.size() != dst.size())
        throw IoError(std::string("checkpoint ") + what + ": tensor count mismatch");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (!src[i].same_shape(*dst[i]))
            throw IoError(std::string("checkpoint ") + what + ": tensor shape mismatch");
        *dst[i] = src[i];
    }
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
    std::string payload;
    put_u64(payload, cfg_.hash());
    put_u64(payload, static_cast<std::uint64_t>(epoch_));
    put_string(payload, rng_.state());
    put_params(payload, net_c_);
    put_u8(payload, net_e_ ? 1 : 0);
    if (net_e_) put_params(payload, *net_e_);
    put_velocity(payload, opt_c_);
    put_velocity(payload, opt_e_);
    put_tensor(payload, confidence_.w_c());
    put_tensor(payload, confidence_.w_e());
    put_u64(payload, history_.size());
    for (const EpochRecord& r : history_) {
        put_u64(payload, static_cast<std::uint64_t>(r.epoch));
        put_double(payload, r.lr);
        put_double(payload, r.r_k_c);
        put_double(payload, r.r_mpu_c);
        put_double(payload, r.r_k_e);
        put_double(payload, r.r_mpu_e);
        put_double(payload, r.r_kl);
        put_double(payload, r.r_all);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof kMagic);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    std::string tail;
    put_u64(tail, fnv1a(payload));
    out.write(tail.data(), static_cast<std::streamsize>(tail.size()));
    if (!out) throw IoError("write to '" + path + "' failed");
}

void Trainer::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (file.size() < sizeof kMagic + 8) throw IoError("checkpoint too small");
    if (std::memcmp(file.data(), kMagic, sizeof kMagic) != 0)
        throw IoError("not a checkpoint file (bad magic)");

    const std::string payload = file.substr(sizeof kMagic, file.size() - sizeof kMagic - 8);
    std::string stored_tail = file.substr(file.size() - 8);
    std::string expect_tail;
    put_u64(expect_tail, fnv1a(payload));
    if (stored_tail != expect_tail) throw IoError("checkpoint checksum mismatch");

    Reader r{payload};
    const std::uint64_t config_hash = r.get_u64();
    if (config_hash != cfg_.hash())
        throw ConfigError("checkpoint was written under a different configuration");
    const std::uint64_t epoch = r.get_u64();
    if (epoch > static_cast<std::uint64_t>(cfg_.epochs))
        throw IoError("checkpoint epoch exceeds configured epochs");
    const std::string rng_state = r.get_string();

    const std::vector<Tensor2> params_c = get_tensor_list(r);
    const bool has_e = r.get_u8() != 0;
    if (has_e != static_cast<bool>(net_e_))
        throw IoError("checkpoint network count does not match configuration");
    std::vector<Tensor2> params_e;
    if (has_e) params_e = get_tensor_list(r);

    auto read_velocity = [&r](const Network& net) -> std::vector<Tensor2> {
        if (r.get_u8() == 0) return {};
        std::vector<Tensor2> ts = get_tensor_list(r);
        if (ts.size() != net.param_tensors().size())
            throw IoError("checkpoint velocity: tensor count mismatch");
        return ts;
    };
    const std::vector<Tensor2> vel_c = read_velocity(net_c_);
    const std::vector<Tensor2> vel_e = net_e_ ? read_velocity(*net_e_) : (r.get_u8(), std::vector<Tensor2>{});

    Tensor2 w_c = r.get_tensor();
    Tensor2 w_e = r.get_tensor();

    const std::uint64_t n_history = r.get_u64();
    if (n_history > static_cast<std::uint64_t>(cfg_.epochs))
        throw IoError("checkpoint history longer than configured epochs");
    std::vector<EpochRecord> history;
    history.reserve(n_history);
    for (std::uint64_t i = 0; i < n_history; ++i) {
        EpochRecord rec;
        rec.epoch = static_cast<int>(r.get_u64());
        rec.lr = r.get_double();
        rec.r_k_c = r.get_double();
        rec.r_mpu_c = r.get_double();
        rec.r_k_e = r.get_double();
        rec.r_mpu_e = r.get_double();
        rec.r_kl = r.get_double();
        rec.r_all = r.get_double();
        history.push_back(rec);
    }
    if (r.pos != payload.size()) throw IoError("checkpoint has trailing bytes");

    // Everything parsed and validated — commit.
    apply_tensors(params_c, net_c_.param_tensors(), "parameters");
    if (net_e_) apply_tensors(params_e, net_e_->param_tensors(), "parameters");
    auto commit_velocity = [](SgdOptimizer& opt, Network& net, const std::vector<Tensor2>& ts) {
        if (ts.empty()) return;
        Gradients vel = net.zero_gradients();
        apply_tensors(ts, vel.tensors(), "velocity");
        opt.set_velocity(std::move(vel));
    };
    commit_velocity(opt_c_, net_c_, vel_c);
    if (net_e_) commit_velocity(opt_e_, *net_e_, vel_e);
    confidence_.restore(w_c, w_e);
    rng_.restore(rng_state);
    epoch_ = static_cast<int>(epoch);
    history_ = std::move(history);
}

}  // namespace hopencls
