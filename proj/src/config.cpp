#include "iplan/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "iplan/rng.hpp"

namespace iplan {

namespace {

enum class FieldKind { Str, U64, I64, Int, Double };

struct Field {
    const char* name;
    FieldKind kind;
    size_t offset;
    bool canonical = true;  // output locations don't affect run semantics
};

#define IPLAN_FIELD(kind, member) {#member, FieldKind::kind, offsetof(RunConfig, member), true}
#define IPLAN_FIELD_LOCAL(kind, member) \
    {#member, FieldKind::kind, offsetof(RunConfig, member), false}

const Field kFields[] = {
    IPLAN_FIELD(Str, env),
    IPLAN_FIELD(Str, scenario),
    IPLAN_FIELD(Str, algo),
    IPLAN_FIELD(U64, seed),
    IPLAN_FIELD(I64, total_steps),
    IPLAN_FIELD_LOCAL(Str, out_dir),
    IPLAN_FIELD(Int, horizon),
    IPLAN_FIELD(Double, nav_dt),
    IPLAN_FIELD(Double, nav_damping),
    IPLAN_FIELD(Int, hw_lanes),
    IPLAN_FIELD(Double, hw_lane_width),
    IPLAN_FIELD(Int, hw_n_controlled),
    IPLAN_FIELD(Int, hw_n_behavior),
    IPLAN_FIELD(Double, hw_density),
    IPLAN_FIELD(Int, hw_substeps),
    IPLAN_FIELD(Double, hw_vehicle_length),
    IPLAN_FIELD(Double, hw_vehicle_width),
    IPLAN_FIELD(Double, hw_speed_delta),
    IPLAN_FIELD(Double, hw_ego_max_speed),
    IPLAN_FIELD(Double, hw_ego_max_accel),
    IPLAN_FIELD(Double, hw_ego_init_speed),
    IPLAN_FIELD(Double, hw_mobil_threshold),
    IPLAN_FIELD(Double, hw_spawn_spacing),
    IPLAN_FIELD(Int, t_h),
    IPLAN_FIELD(Int, t_p),
    IPLAN_FIELD(Double, eta),
    IPLAN_FIELD(Str, beta_update),
    IPLAN_FIELD(Int, hard_interval),
    IPLAN_FIELD(Double, lr_behavior),
    IPLAN_FIELD(Double, lr_instant),
    IPLAN_FIELD(Double, dropout),
    IPLAN_FIELD(Int, beta_dim),
    IPLAN_FIELD(Int, behavior_enc_hidden),
    IPLAN_FIELD(Int, behavior_dec_hidden),
    IPLAN_FIELD(Int, gat_hidden),
    IPLAN_FIELD(Int, zeta_dim),
    IPLAN_FIELD(Int, instant_dec_hidden),
    IPLAN_FIELD(Double, lr_ppo),
    IPLAN_FIELD(Int, rollout_size),
    IPLAN_FIELD(Double, gamma),
    IPLAN_FIELD(Double, gae_lambda),
    IPLAN_FIELD(Double, clip_eps),
    IPLAN_FIELD(Double, entropy_coef),
    IPLAN_FIELD(Double, value_coef),
    IPLAN_FIELD(Int, ppo_epochs),
    IPLAN_FIELD(Int, minibatch),
    IPLAN_FIELD(Double, grad_clip),
    IPLAN_FIELD(Int, ppo_hidden),
    IPLAN_FIELD(Int, experiences_k),
    IPLAN_FIELD(Int, episode_store),
    IPLAN_FIELD(I64, eval_every),
    IPLAN_FIELD(Int, eval_episodes),
    IPLAN_FIELD(Int, log_train_episodes),
    IPLAN_FIELD(Int, log_latents),
};

#undef IPLAN_FIELD
#undef IPLAN_FIELD_LOCAL

void* field_ptr(RunConfig& cfg, const Field& f) {
    return reinterpret_cast<char*>(&cfg) + f.offset;
}
const void* field_ptr(const RunConfig& cfg, const Field& f) {
    return reinterpret_cast<const char*>(&cfg) + f.offset;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::map<std::string, std::string> parse_keyvalues(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        kv[key] = val;
    }
    return kv;
}

void RunConfig::validate() const {
    if (env != "navigation" && env != "highway")
        throw ConfigError("unknown env: " + env);
    if (env == "navigation" && scenario != "easy" && scenario != "hard")
        throw ConfigError("unknown navigation scenario: " + scenario);
    if (env == "highway" && scenario != "mild" && scenario != "chaotic" &&
        scenario != "chaotic-vh")
        throw ConfigError("unknown highway scenario: " + scenario);
    if (algo != "iplan" && algo != "iplan-bm" && algo != "iplan-gat" && algo != "ippo")
        throw ConfigError("unknown algo: " + algo);
    if (beta_update != "soft" && beta_update != "hard")
        throw ConfigError("beta_update must be soft or hard");
    if (eta < 0.0 || eta > 1.0) throw ConfigError("eta must be in [0,1]");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (t_h_resolved() < 1 || t_p_resolved() < 1)
        throw ConfigError("t_h and t_p must be >= 1");
    if (hard_interval <= 0) throw ConfigError("hard_interval must be positive");
    if (clip_eps <= 0.0 || clip_eps >= 1.0) throw ConfigError("clip_eps must be in (0,1)");
    if (rollout_size <= 0 || minibatch <= 0 || ppo_epochs <= 0)
        throw ConfigError("ppo sizes must be positive");
    if (experiences_k <= 0 || episode_store <= 0)
        throw ConfigError("trainer sizes must be positive");
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    for (const Field& f : kFields) {
        if (!f.canonical) continue;
        os << f.name << " = ";
        switch (f.kind) {
            case FieldKind::Str:
                os << *static_cast<const std::string*>(field_ptr(*this, f));
                break;
            case FieldKind::U64:
                os << *static_cast<const uint64_t*>(field_ptr(*this, f));
                break;
            case FieldKind::I64:
                os << *static_cast<const int64_t*>(field_ptr(*this, f));
                break;
            case FieldKind::Int:
                os << *static_cast<const int*>(field_ptr(*this, f));
                break;
            case FieldKind::Double:
                os << format_double(*static_cast<const double*>(field_ptr(*this, f)));
                break;
        }
        os << '\n';
    }
    return os.str();
}

uint64_t RunConfig::hash() const { return hash_str(serialize()); }

RunConfig RunConfig::from_keyvalues(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    for (const auto& [key, val] : kv) {
        const Field* field = nullptr;
        for (const Field& f : kFields)
            if (key == f.name) {
                field = &f;
                break;
            }
        if (!field) throw ConfigError("unknown config key: " + key);
        try {
            switch (field->kind) {
                case FieldKind::Str:
                    *static_cast<std::string*>(field_ptr(cfg, *field)) = val;
                    break;
                case FieldKind::U64:
                    *static_cast<uint64_t*>(field_ptr(cfg, *field)) = std::stoull(val);
                    break;
                case FieldKind::I64:
                    *static_cast<int64_t*>(field_ptr(cfg, *field)) = std::stoll(val);
                    break;
                case FieldKind::Int:
                    *static_cast<int*>(field_ptr(cfg, *field)) = std::stoi(val);
                    break;
                case FieldKind::Double:
                    *static_cast<double*>(field_ptr(cfg, *field)) = std::stod(val);
                    break;
            }
        } catch (const std::exception&) {
            throw ConfigError("bad value for config key " + key + ": " + val);
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_keyvalues(parse_keyvalues(ss.str()));
}

std::string encode_text(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (c == '%' || c == ' ' || c == '\n' || c == '\r' || c == '\t') {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 0xF];
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

std::string decode_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            auto hexval = [](char c) -> int {
                if (c >= '0' && c <= '9') return c - '0';
                if (c >= 'A' && c <= 'F') return c - 'A' + 10;
                if (c >= 'a' && c <= 'f') return c - 'a' + 10;
                return -1;
            };
            int hi = hexval(s[i + 1]), lo = hexval(s[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out += static_cast<char>(hi * 16 + lo);
                i += 2;
                continue;
            }
        }
        out += s[i];
    }
    return out;
}

}  // namespace iplan
