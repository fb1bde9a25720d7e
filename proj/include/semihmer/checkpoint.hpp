#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "semihmer/common.hpp"
#include "semihmer/model.hpp"
#include "semihmer/optimizer.hpp"

namespace semihmer {

namespace ckpt_detail {

constexpr char kMagic[8] = {'S', 'H', 'M', 'R', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

inline void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double v) {
    // doubles round-trip as raw bytes: bit-exact by construction
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline void put_str(std::string& out, const std::string& s) {
    put_u64(out, s.size());
    out += s;
}

inline void put_tensor(std::string& out, const Tensor& t) {
    put_u32(out, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) put_u32(out, static_cast<uint32_t>(t.dim(i)));
    for (long long i = 0; i < t.numel(); ++i) put_f64(out, t[static_cast<size_t>(i)]);
}

class Reader {
public:
    Reader(const std::string& data, const std::string& origin) : d_(data), origin_(origin) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(d_[p_ + i])) << (8 * i);
        p_ += 4;
        return v;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(d_[p_ + i])) << (8 * i);
        p_ += 8;
        return v;
    }

    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string str() {
        uint64_t n = u64();
        need(n);
        std::string s = d_.substr(p_, n);
        p_ += n;
        return s;
    }

    Tensor tensor() {
        uint32_t nd = u32();
        if (nd > 4) fail(origin_ + ": tensor rank " + std::to_string(nd) + " out of range");
        std::vector<int> dims;
        for (uint32_t i = 0; i < nd; ++i) dims.push_back(static_cast<int>(u32()));
        Tensor t(dims);
        for (long long i = 0; i < t.numel(); ++i) t[static_cast<size_t>(i)] = f64();
        return t;
    }

    void expect_magic() {
        need(8);
        if (std::memcmp(d_.data() + p_, kMagic, 8) != 0) fail(origin_ + ": not a checkpoint file");
        p_ += 8;
    }

    bool done() const { return p_ == d_.size(); }

private:
    void need(uint64_t n) {
        if (p_ + n > d_.size()) fail(origin_ + ": truncated checkpoint");
    }
    const std::string& d_;
    std::string origin_;
    size_t p_ = 0;
};

}  // namespace ckpt_detail

// Single-file snapshot: config text, epoch counter, every parameter tensor
// and both optimizer accumulators, all in ParamSet insertion order.
inline void save_checkpoint(const std::string& path, const Model& model, const Adadelta& opt,
                            int epoch, const std::string& config_text) {
    using namespace ckpt_detail;
    std::string out;
    out.append(kMagic, 8);
    put_u32(out, kVersion);
    put_str(out, config_text);
    put_u64(out, static_cast<uint64_t>(epoch));
    put_u32(out, static_cast<uint32_t>(model.params.size()));
    model.params.for_each([&](const Param& p) {
        put_str(out, p.name);
        put_tensor(out, p.value);
    });
    for (const Tensor& t : opt.acc_grad()) put_tensor(out, t);
    for (const Tensor& t : opt.acc_update()) put_tensor(out, t);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail("cannot write checkpoint '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) fail("short write to checkpoint '" + path + "'");
}

struct CheckpointInfo {
    int epoch = 0;
    std::string config_text;
};

// Restores weights and optimizer accumulators in place. The model must have
// been built with the same architecture the checkpoint was saved from.
inline CheckpointInfo load_checkpoint(const std::string& path, Model& model, Adadelta& opt) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("cannot open checkpoint '" + path + "'");
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    using namespace ckpt_detail;
    Reader r(data, path);
    r.expect_magic();
    uint32_t version = r.u32();
    if (version != kVersion)
        fail(path + ": checkpoint version " + std::to_string(version) + ", expected " +
             std::to_string(kVersion));
    CheckpointInfo info;
    info.config_text = r.str();
    info.epoch = static_cast<int>(r.u64());
    uint32_t n = r.u32();
    if (static_cast<int>(n) != model.params.size())
        fail(path + ": checkpoint holds " + std::to_string(n) + " parameters, model has " +
             std::to_string(model.params.size()));
    model.params.for_each([&](Param& p) {
        std::string name = r.str();
        if (name != p.name) fail(path + ": parameter order mismatch at '" + name + "'");
        Tensor t = r.tensor();
        if (!t.same_shape(p.value)) fail(path + ": shape mismatch for '" + name + "'");
        p.value = std::move(t);
    });
    auto read_accs = [&](std::vector<Tensor>& accs) {
        for (Tensor& slot : accs) {
            Tensor t = r.tensor();
            if (!t.same_shape(slot)) fail(path + ": optimizer state shape mismatch");
            slot = std::move(t);
        }
    };
    read_accs(opt.acc_grad());
    read_accs(opt.acc_update());
    if (!r.done()) fail(path + ": trailing bytes after checkpoint payload");
    return info;
}

// Reads just the header, for commands that need the config before they can
// build the model.
inline CheckpointInfo peek_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("cannot open checkpoint '" + path + "'");
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    using namespace ckpt_detail;
    Reader r(data, path);
    r.expect_magic();
    uint32_t version = r.u32();
    if (version != kVersion)
        fail(path + ": checkpoint version " + std::to_string(version) + ", expected " +
             std::to_string(kVersion));
    CheckpointInfo info;
    info.config_text = r.str();
    info.epoch = static_cast<int>(r.u64());
    return info;
}

}  // namespace semihmer
