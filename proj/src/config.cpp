#include "cossl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cossl {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Shortest representation that parses back to the same double.
std::string fmt_double(double v) {
    char buf[40];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

std::string fmt_int_list(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

double parse_double(const std::string& s, const std::string& field) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("invalid number for " + field + ": '" + s + "'");
    return v;
}

long parse_long(const std::string& s, const std::string& field) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigError("invalid integer for " + field + ": '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& field) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigError("invalid integer for " + field + ": '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s, const std::string& field) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("invalid boolean for " + field + ": '" + s + "' (use true/false)");
}

std::vector<int> parse_int_list(const std::string& s, const std::string& field) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(static_cast<int>(parse_long(trim(item), field)));
    if (out.empty()) throw ConfigError(field + " must not be empty");
    return out;
}

struct Entry {
    std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

using Section = std::map<std::string, Entry>;
using Registry = std::map<std::string, Section>;

Entry make_int(std::function<int&(TrainConfig&)> ref) {
    return Entry{
        [ref](TrainConfig& c, const std::string& v, const std::string& f) {
            ref(c) = static_cast<int>(parse_long(v, f));
        },
        [ref](const TrainConfig& c) { return std::to_string(ref(const_cast<TrainConfig&>(c))); }};
}

Entry make_long(std::function<long&(TrainConfig&)> ref) {
    return Entry{[ref](TrainConfig& c, const std::string& v, const std::string& f) { ref(c) = parse_long(v, f); },
                 [ref](const TrainConfig& c) { return std::to_string(ref(const_cast<TrainConfig&>(c))); }};
}

Entry make_u64(std::function<std::uint64_t&(TrainConfig&)> ref) {
    return Entry{[ref](TrainConfig& c, const std::string& v, const std::string& f) { ref(c) = parse_u64(v, f); },
                 [ref](const TrainConfig& c) { return std::to_string(ref(const_cast<TrainConfig&>(c))); }};
}

Entry make_double(std::function<double&(TrainConfig&)> ref) {
    return Entry{[ref](TrainConfig& c, const std::string& v, const std::string& f) { ref(c) = parse_double(v, f); },
                 [ref](const TrainConfig& c) { return fmt_double(ref(const_cast<TrainConfig&>(c))); }};
}

Entry make_bool(std::function<bool&(TrainConfig&)> ref) {
    return Entry{[ref](TrainConfig& c, const std::string& v, const std::string& f) { ref(c) = parse_bool(v, f); },
                 [ref](const TrainConfig& c) { return fmt_bool(ref(const_cast<TrainConfig&>(c))); }};
}

Entry make_int_list(std::function<std::vector<int>&(TrainConfig&)> ref) {
    return Entry{[ref](TrainConfig& c, const std::string& v, const std::string& f) { ref(c) = parse_int_list(v, f); },
                 [ref](const TrainConfig& c) { return fmt_int_list(ref(const_cast<TrainConfig&>(c))); }};
}

const Registry& registry() {
    static const Registry reg = [] {
        Registry r;
        Section& data = r["data"];
        data["k"] = make_int([](TrainConfig& c) -> int& { return c.data.k; });
        data["d"] = make_int([](TrainConfig& c) -> int& { return c.data.d; });
        data["separation"] = make_double([](TrainConfig& c) -> double& { return c.data.separation; });
        data["noise_sigma"] = make_double([](TrainConfig& c) -> double& { return c.data.noise_sigma; });
        data["pool_per_class"] = make_int([](TrainConfig& c) -> int& { return c.data.pool_per_class; });
        data["n1"] = make_int([](TrainConfig& c) -> int& { return c.data.n1; });
        data["m1"] = make_int([](TrainConfig& c) -> int& { return c.data.m1; });
        data["gamma_l"] = make_double([](TrainConfig& c) -> double& { return c.data.gamma_l; });
        data["gamma_u"] = make_double([](TrainConfig& c) -> double& { return c.data.gamma_u; });

        Section& model = r["model"];
        model["hidden"] = make_int_list([](TrainConfig& c) -> std::vector<int>& { return c.model.hidden; });
        model["feature_dim"] = make_int([](TrainConfig& c) -> int& { return c.model.feature_dim; });
        model["activation"] = Entry{
            [](TrainConfig& c, const std::string& v, const std::string& f) {
                if (v == "tanh") c.model.activation = Activation::Tanh;
                else if (v == "relu") c.model.activation = Activation::Relu;
                else throw ConfigError(f + " must be tanh or relu, got '" + v + "'");
            },
            [](const TrainConfig& c) {
                return std::string(c.model.activation == Activation::Tanh ? "tanh" : "relu");
            }};

        Section& ssl = r["ssl"];
        ssl["tau"] = make_double([](TrainConfig& c) -> double& { return c.ssl.tau; });
        ssl["weak_sigma"] = make_double([](TrainConfig& c) -> double& { return c.ssl.augment.weak_sigma; });
        ssl["strong_sigma"] = make_double([](TrainConfig& c) -> double& { return c.ssl.augment.strong_sigma; });
        ssl["mask_prob"] = make_double([](TrainConfig& c) -> double& { return c.ssl.augment.mask_prob; });

        Section& tfe = r["tfe"];
        tfe["mu"] = make_double([](TrainConfig& c) -> double& { return c.tfe.mu; });
        tfe["blend_override"] = Entry{
            [](TrainConfig& c, const std::string& v, const std::string& f) {
                if (v == "none") c.tfe.blend_override = TfeConfig::BlendOverride::None;
                else if (v == "zero") c.tfe.blend_override = TfeConfig::BlendOverride::AllZero;
                else if (v == "one") c.tfe.blend_override = TfeConfig::BlendOverride::AllOne;
                else throw ConfigError(f + " must be none, zero, or one; got '" + v + "'");
            },
            [](const TrainConfig& c) -> std::string {
                switch (c.tfe.blend_override) {
                    case TfeConfig::BlendOverride::AllZero: return "zero";
                    case TfeConfig::BlendOverride::AllOne: return "one";
                    default: return "none";
                }
            }};
        tfe["label_blending"] = make_bool([](TrainConfig& c) -> bool& { return c.tfe.label_blending; });
        tfe["input_level_blend"] = make_bool([](TrainConfig& c) -> bool& { return c.tfe.input_level_blend; });

        Section& co = r["cossl"];
        co["mode"] = Entry{
            [](TrainConfig& c, const std::string& v, const std::string& f) {
                try {
                    c.cossl.mode = train_mode_from_string(v);
                } catch (const std::exception&) {
                    throw ConfigError(f + " must be cossl, vanilla, or crt; got '" + v + "'");
                }
            },
            [](const TrainConfig& c) { return to_string(c.cossl.mode); }};
        co["seed"] = make_u64([](TrainConfig& c) -> std::uint64_t& { return c.cossl.seed; });
        co["total_steps"] = make_long([](TrainConfig& c) -> long& { return c.cossl.total_steps; });
        co["steps_per_epoch"] = make_int([](TrainConfig& c) -> int& { return c.cossl.steps_per_epoch; });
        co["batch"] = make_int([](TrainConfig& c) -> int& { return c.cossl.batch; });
        co["warmup_fraction"] = make_double([](TrainConfig& c) -> double& { return c.cossl.warmup_fraction; });
        co["ema_momentum"] = make_double([](TrainConfig& c) -> double& { return c.cossl.ema_momentum; });
        co["lr"] = make_double([](TrainConfig& c) -> double& { return c.cossl.lr; });
        co["lr_classifier"] = make_double([](TrainConfig& c) -> double& { return c.cossl.lr_classifier; });
        co["beta1"] = make_double([](TrainConfig& c) -> double& { return c.cossl.beta1; });
        co["beta2"] = make_double([](TrainConfig& c) -> double& { return c.cossl.beta2; });
        co["adam_eps"] = make_double([](TrainConfig& c) -> double& { return c.cossl.adam_eps; });
        co["eval_epochs_tail"] = make_int([](TrainConfig& c) -> int& { return c.cossl.eval_epochs_tail; });
        co["allow_grad"] = make_bool([](TrainConfig& c) -> bool& { return c.cossl.allow_grad; });
        co["pl_from_hr"] = make_bool([](TrainConfig& c) -> bool& { return c.cossl.pl_from_hr; });
        co["ema_before_update"] = make_bool([](TrainConfig& c) -> bool& { return c.cossl.ema_before_update; });
        co["use_ema_for_eval"] = make_bool([](TrainConfig& c) -> bool& { return c.cossl.use_ema_for_eval; });
        co["warmup_pl_from_ema"] = make_bool([](TrainConfig& c) -> bool& { return c.cossl.warmup_pl_from_ema; });
        co["crt_epochs"] = make_int([](TrainConfig& c) -> int& { return c.cossl.crt_epochs; });
        co["crt_use_tfe"] = make_bool([](TrainConfig& c) -> bool& { return c.cossl.crt_use_tfe; });

        Section& ev = r["eval"];
        ev["test_per_class"] = make_int([](TrainConfig& c) -> int& { return c.eval.test_per_class; });
        ev["sweep_enabled"] = make_bool([](TrainConfig& c) -> bool& { return c.eval.sweep_enabled; });
        ev["sweep_cap"] = make_int([](TrainConfig& c) -> int& { return c.eval.sweep_cap; });
        ev["sweep_gammas"] = make_int_list([](TrainConfig& c) -> std::vector<int>& { return c.eval.sweep_gammas; });
        ev["pc_unknown_uniform"] = make_bool([](TrainConfig& c) -> bool& { return c.eval.pc_unknown_uniform; });
        return r;
    }();
    return reg;
}

void set_value(TrainConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value, int line) {
    const Registry& reg = registry();
    const auto sit = reg.find(section);
    const std::string where = line > 0 ? " (line " + std::to_string(line) + ")" : "";
    if (sit == reg.end()) throw ConfigError("unknown section [" + section + "]" + where);
    const auto kit = sit->second.find(key);
    if (kit == sit->second.end())
        throw ConfigError("unknown key '" + key + "' in section [" + section + "]" + where);
    kit->second.set(cfg, value, section + "." + key);
}

}  // namespace

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::Cossl: return "cossl";
        case TrainMode::Vanilla: return "vanilla";
        case TrainMode::Crt: return "crt";
    }
    return "cossl";
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "cossl") return TrainMode::Cossl;
    if (s == "vanilla") return TrainMode::Vanilla;
    if (s == "crt") return TrainMode::Crt;
    throw ConfigError("unknown mode '" + s + "'");
}

TrainConfig parse_config_text(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("config parse error at line " + std::to_string(lineno) +
                                  ": malformed section header '" + t + "'");
            section = trim(t.substr(1, t.size() - 2));
            if (registry().find(section) == registry().end())
                throw ConfigError("unknown section [" + section + "] (line " + std::to_string(lineno) + ")");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config parse error at line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + t + "'");
        if (section.empty())
            throw ConfigError("config parse error at line " + std::to_string(lineno) +
                              ": key outside any section");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        set_value(cfg, section, key, value, lineno);
    }
    return cfg;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like section.key=value: '" + assignment + "'");
    const std::string path = trim(assignment.substr(0, eq));
    const std::size_t dot = path.find('.');
    if (dot == std::string::npos)
        throw ConfigError("override must look like section.key=value: '" + assignment + "'");
    set_value(cfg, path.substr(0, dot), path.substr(dot + 1), trim(assignment.substr(eq + 1)), 0);
}

std::string dump_config(const TrainConfig& cfg) {
    std::string out;
    for (const auto& [section, keys] : registry()) {
        out += "[" + section + "]\n";
        for (const auto& [key, entry] : keys) out += key + " = " + entry.get(cfg) + "\n";
        out += "\n";
    }
    return out;
}

void validate_config(const TrainConfig& cfg) {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("invalid config: " + field + " " + why);
    };
    if (cfg.data.k < 2) fail("data.k", "must be >= 2");
    if (cfg.data.d < 1) fail("data.d", "must be >= 1");
    if (cfg.data.separation <= 0.0) fail("data.separation", "must be > 0");
    if (cfg.data.noise_sigma <= 0.0) fail("data.noise_sigma", "must be > 0");
    if (cfg.data.pool_per_class < 1) fail("data.pool_per_class", "must be >= 1");
    if (cfg.data.n1 < 1) fail("data.n1", "must be >= 1");
    if (cfg.data.m1 < 1) fail("data.m1", "must be >= 1");
    if (cfg.data.gamma_l < 1.0) fail("data.gamma_l", "must be >= 1");
    if (cfg.data.gamma_u < 1.0) fail("data.gamma_u", "must be >= 1");
    if (cfg.model.feature_dim < 1) fail("model.feature_dim", "must be >= 1");
    for (int h : cfg.model.hidden)
        if (h < 1) fail("model.hidden", "entries must be >= 1");
    if (cfg.ssl.tau < 0.0 || cfg.ssl.tau > 1.0) fail("ssl.tau", "must lie in [0, 1]");
    if (cfg.ssl.augment.weak_sigma < 0.0) fail("ssl.weak_sigma", "must be >= 0");
    if (cfg.ssl.augment.strong_sigma < cfg.ssl.augment.weak_sigma)
        fail("ssl.strong_sigma", "must be >= ssl.weak_sigma");
    if (cfg.ssl.augment.mask_prob < 0.0 || cfg.ssl.augment.mask_prob > 1.0)
        fail("ssl.mask_prob", "must lie in [0, 1]");
    if (cfg.tfe.mu < 0.0 || cfg.tfe.mu > 1.0) fail("tfe.mu", "must lie in [0, 1]");
    if (cfg.cossl.total_steps < 1) fail("cossl.total_steps", "must be >= 1");
    if (cfg.cossl.steps_per_epoch < 1) fail("cossl.steps_per_epoch", "must be >= 1");
    if (cfg.cossl.batch < 1) fail("cossl.batch", "must be >= 1");
    if (cfg.cossl.warmup_fraction < 0.0 || cfg.cossl.warmup_fraction > 1.0)
        fail("cossl.warmup_fraction", "must lie in [0, 1]");
    if (cfg.cossl.ema_momentum < 0.0 || cfg.cossl.ema_momentum >= 1.0)
        fail("cossl.ema_momentum", "must lie in [0, 1)");
    if (cfg.cossl.lr < 0.0) fail("cossl.lr", "must be >= 0");
    if (cfg.cossl.lr_classifier < 0.0) fail("cossl.lr_classifier", "must be >= 0");
    if (cfg.cossl.eval_epochs_tail < 1) fail("cossl.eval_epochs_tail", "must be >= 1");
    if (cfg.cossl.crt_epochs < 1) fail("cossl.crt_epochs", "must be >= 1");
    if (cfg.cossl.allow_grad && cfg.tfe.label_blending)
        fail("cossl.allow_grad", "cannot be combined with tfe.label_blending");
    if (cfg.eval.test_per_class < 1) fail("eval.test_per_class", "must be >= 1");
    if (cfg.eval.sweep_cap < 1) fail("eval.sweep_cap", "must be >= 1");
    for (int g : cfg.eval.sweep_gammas)
        if (std::abs(g) < 1) fail("eval.sweep_gammas", "entries must satisfy |gamma| >= 1");

    // Pool sufficiency: training splits plus the largest test draw must fit.
    // Eval and sweep sets are drawn independently from the remainder, so the
    // remainder only has to cover the larger of the two.
    const ImbalanceSpec spec = cfg.imbalance_spec();
    spec.validate();
    const ClassDistribution nl = long_tail_counts(spec.n1, spec.gamma_l, spec.k);
    const ClassDistribution mu = long_tail_counts(spec.m1, spec.gamma_u, spec.k);
    const int test_need = std::max(cfg.eval.test_per_class,
                                   cfg.eval.sweep_enabled ? cfg.eval.sweep_cap : 0);
    for (int c = 1; c <= cfg.data.k; ++c) {
        const long need = static_cast<long>(nl.count(c)) + mu.count(c) + test_need;
        if (need > cfg.data.pool_per_class)
            fail("data.pool_per_class",
                 "too small for class " + std::to_string(c) + ": needs >= " + std::to_string(need));
    }
}

}  // namespace cossl
