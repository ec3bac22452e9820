#include "iplan/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace iplan::num {

namespace {
constexpr const char* kMagic = "iplan-params";
constexpr int kVersion = 1;
}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open checkpoint for writing: " + path);
    out << kMagic << ' ' << kVersion << '\n';
    for (const auto& [k, v] : ckpt.meta) out << "meta " << k << ' ' << v << '\n';
    char buf[64];
    for (const auto& [name, t] : ckpt.tensors) {
        out << "tensor " << name << ' ' << t.rank();
        for (int d : t.shape()) out << ' ' << d;
        out << '\n';
        for (int64_t i = 0; i < t.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%a", t[i]);
            out << buf << (i + 1 == t.size() ? '\n' : ' ');
        }
        if (t.size() == 0) out << '\n';
    }
    if (!out) throw Error("write failure on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint: " + path);
    std::string magic;
    int version = -1;
    in >> magic >> version;
    if (magic != kMagic)
        throw CheckpointVersionError("not a parameter checkpoint: " + path);
    if (version != kVersion)
        throw CheckpointVersionError("unsupported checkpoint version " +
                                     std::to_string(version));
    Checkpoint ckpt;
    std::string tag;
    while (in >> tag) {
        if (tag == "meta") {
            std::string k, v;
            in >> k >> v;
            ckpt.meta[k] = v;
        } else if (tag == "tensor") {
            std::string name;
            int rank = 0;
            in >> name >> rank;
            if (rank < 0 || rank > 8) throw Error("corrupt tensor rank in " + path);
            std::vector<int> shape(static_cast<size_t>(rank));
            int64_t n = 1;
            for (int& d : shape) {
                in >> d;
                n *= d;
            }
            std::vector<double> data(static_cast<size_t>(n));
            for (auto& x : data) {
                std::string tok;
                if (!(in >> tok)) throw Error("truncated tensor data in " + path);
                x = std::strtod(tok.c_str(), nullptr);
            }
            ckpt.tensors.emplace_back(name, Tensor(std::move(shape), std::move(data)));
        } else {
            throw Error("unexpected token '" + tag + "' in checkpoint " + path);
        }
    }
    return ckpt;
}

}  // namespace iplan::num
