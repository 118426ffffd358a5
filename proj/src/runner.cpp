#include "cossl/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cossl {

namespace {

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

const char* kBuildId = "cossl-0.1.0 (" __VERSION__ ")";

void write_manifest(const fs::path& path, const TrainConfig& cfg, const std::string& out_dir,
                    const std::string& started, const std::string& ended) {
    json m;
    m["schema"] = "cossl-manifest-v1";
    m["build"] = kBuildId;
    m["seed"] = cfg.cossl.seed;
    m["mode"] = to_string(cfg.cossl.mode);
    m["started_at"] = started;
    m["ended_at"] = ended;
    m["out_dir"] = out_dir;
    m["outputs"] = {"metrics.csv", "summary.json", "checkpoint.bin"};
    m["config"] = dump_config(cfg);
    std::ofstream f(path);
    f << m.dump(2) << '\n';
}

void write_summary(const fs::path& path, const TrainConfig& cfg, const TrainResult& result) {
    json s;
    s["schema"] = "cossl-summary-v1";
    s["mode"] = to_string(result.mode);
    s["seed"] = cfg.cossl.seed;
    s["epochs"] = result.history.size();
    s["final_uniform_acc"] = result.final_uniform_acc;
    s["final_avg_class_recall"] = result.final_avg_class_recall;
    s["final_per_class_recall"] = result.final_per_class_recall;
    if (!result.history.empty()) {
        s["final_pseudo_accept_rate"] = result.history.back().pseudo_accept_rate;
        s["final_pseudo_precision"] = result.history.back().pseudo_precision;
    }
    std::ofstream f(path);
    f << s.dump(2) << '\n';
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const NumericalFailure& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
}

}  // namespace

std::string default_out_root() {
    const char* env = std::getenv("COSSL_OUT");
    return env && *env ? env : "runs";
}

void write_metrics_csv(const std::string& path, const std::vector<EpochRecord>& history) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "# cossl-metrics-v1\n";
    f << "epoch,L_x,L_u,L_c,uniform_acc,avg_class_recall,pseudo_accept_rate,pseudo_precision\n";
    for (const EpochRecord& e : history) {
        f << e.epoch << ',' << fmt(e.lx) << ',' << fmt(e.lu) << ',' << fmt(e.lc) << ','
          << fmt(e.uniform_acc) << ',' << fmt(e.avg_class_recall) << ','
          << fmt(e.pseudo_accept_rate) << ',' << fmt(e.pseudo_precision) << '\n';
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

EncoderParams encoder_from_tensors(const std::vector<NamedTensor>& tensors,
                                   const std::string& prefix, Activation act) {
    std::map<std::string, const NamedTensor*> by_name;
    for (const NamedTensor& t : tensors) by_name[t.name] = &t;
    EncoderParams p;
    p.act = act;
    for (int l = 0;; ++l) {
        const auto wit = by_name.find(prefix + ".w" + std::to_string(l));
        const auto bit = by_name.find(prefix + ".b" + std::to_string(l));
        if (wit == by_name.end()) break;
        if (bit == by_name.end()) throw std::runtime_error("checkpoint missing bias for " + prefix);
        Matrix w(wit->second->shape.at(0), wit->second->shape.at(1));
        w.data = wit->second->data;
        p.w.push_back(std::move(w));
        p.b.push_back(bit->second->data);
    }
    if (p.w.empty()) throw std::runtime_error("checkpoint has no tensors under '" + prefix + "'");
    return p;
}

HeadParams head_from_tensors(const std::vector<NamedTensor>& tensors, const std::string& prefix) {
    const NamedTensor* w = nullptr;
    const NamedTensor* b = nullptr;
    for (const NamedTensor& t : tensors) {
        if (t.name == prefix + ".w") w = &t;
        if (t.name == prefix + ".b") b = &t;
    }
    if (!w || !b) throw std::runtime_error("checkpoint has no head under '" + prefix + "'");
    HeadParams h;
    h.w = Matrix(w->shape.at(0), w->shape.at(1));
    h.w.data = w->data;
    h.b = b->data;
    return h;
}

int run_experiment(const TrainConfig& cfg, const std::string& out_dir, bool export_splits) {
    return guarded([&]() -> int {
        validate_config(cfg);
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        const std::string started = iso_timestamp();
        write_manifest(dir / "manifest.json", cfg, out_dir, started, "");

        const TrainData data = build_train_data(cfg);
        if (export_splits) {
            export_tsv(data.labeled, (dir / "labeled.tsv").string());
            export_tsv(data.unlabeled, (dir / "unlabeled.tsv").string());
            export_tsv(data.eval_test, (dir / "eval_test.tsv").string());
        }

        const TrainResult result = train(cfg, data);

        write_metrics_csv((dir / "metrics.csv").string(), result.history);
        write_summary(dir / "summary.json", cfg, result);
        save_checkpoint((dir / "checkpoint.bin").string(), collect_tensors(result));

        if (cfg.eval.sweep_enabled) {
            const EncoderParams& enc = result.eval_encoder(cfg.cossl.use_ema_for_eval);
            const HeadParams& head = result.eval_head();
            const SweepTable unknown = shifted_sweep(
                enc, head, data.remainder, cfg.eval.sweep_gammas, cfg.eval.sweep_cap,
                PcMode::Unknown, cfg.eval.pc_unknown_uniform, data.source_prior,
                derive_seed(cfg.cossl.seed, 105));
            write_sweep_csv((dir / "sweep.csv").string(), unknown);
            const SweepTable known = shifted_sweep(
                enc, head, data.remainder, cfg.eval.sweep_gammas, cfg.eval.sweep_cap, PcMode::Known,
                false, data.source_prior, derive_seed(cfg.cossl.seed, 105));
            write_sweep_csv((dir / "sweep_known.csv").string(), known);
        }

        write_manifest(dir / "manifest.json", cfg, out_dir, started, iso_timestamp());
        return kExitOk;
    });
}

int run_sweep(const TrainConfig& cfg, const std::string& checkpoint_path,
              const std::string& out_dir, PcMode mode) {
    return guarded([&]() -> int {
        validate_config(cfg);
        fs::create_directories(out_dir);
        const std::vector<NamedTensor> tensors = load_checkpoint(checkpoint_path);
        const EncoderParams xi = encoder_from_tensors(tensors, "xi", cfg.model.activation);
        const HeadParams head = head_from_tensors(
            tensors, cfg.cossl.mode == TrainMode::Vanilla ? "h_r" : "h_c");
        const TrainData data = build_train_data(cfg);
        const SweepTable table = shifted_sweep(
            xi, head, data.remainder, cfg.eval.sweep_gammas, cfg.eval.sweep_cap, mode,
            cfg.eval.pc_unknown_uniform, data.source_prior, derive_seed(cfg.cossl.seed, 105));
        const fs::path out = fs::path(out_dir) / "sweep.csv";
        write_sweep_csv(out.string(), table);
        std::printf("sweep mean accuracy %.4f -> %s\n", table.mean.overall_accuracy,
                    out.string().c_str());
        return kExitOk;
    });
}

int run_crt(TrainConfig cfg, const std::string& checkpoint_path, const std::string& out_dir) {
    return guarded([&]() -> int {
        cfg.cossl.mode = TrainMode::Crt;
        validate_config(cfg);
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        const std::string started = iso_timestamp();
        write_manifest(dir / "manifest.json", cfg, out_dir, started, "");

        const std::vector<NamedTensor> tensors = load_checkpoint(checkpoint_path);
        const TrainData data = build_train_data(cfg);

        TrainResult result;
        result.mode = TrainMode::Crt;
        result.g = encoder_from_tensors(tensors, "g", cfg.model.activation);
        result.xi = encoder_from_tensors(tensors, "xi", cfg.model.activation);
        result.h_r = head_from_tensors(tensors, "h_r");

        std::vector<EvalResult> evals;
        result.h_c = crt_retrain(result.xi, data.labeled,
                                 cfg.cossl.crt_use_tfe ? &data.unlabeled : nullptr, cfg,
                                 cfg.cossl.crt_epochs, cfg.cossl.crt_use_tfe,
                                 derive_seed(cfg.cossl.seed, 104), &data.eval_test, &evals);
        for (std::size_t i = 0; i < evals.size(); ++i) {
            EpochRecord rec;
            rec.epoch = static_cast<int>(i) + 1;
            rec.uniform_acc = evals[i].overall_accuracy;
            rec.avg_class_recall = evals[i].averaged_class_recall;
            rec.per_class_recall = evals[i].per_class_recall;
            result.history.push_back(std::move(rec));
        }
        const int tail = std::min(cfg.cossl.eval_epochs_tail, cfg.cossl.crt_epochs);
        std::vector<double> acc;
        std::vector<double> rec;
        for (const EpochRecord& e : result.history) {
            acc.push_back(e.uniform_acc);
            rec.push_back(e.avg_class_recall);
        }
        result.final_uniform_acc = last_k_average(acc, tail);
        result.final_avg_class_recall = last_k_average(rec, tail);
        const std::size_t classes = result.history.back().per_class_recall.size();
        result.final_per_class_recall.assign(classes, 0.0);
        for (std::size_t i = result.history.size() - static_cast<std::size_t>(tail);
             i < result.history.size(); ++i)
            for (std::size_t c = 0; c < classes; ++c)
                result.final_per_class_recall[c] += result.history[i].per_class_recall[c] / tail;

        write_metrics_csv((dir / "metrics.csv").string(), result.history);
        write_summary(dir / "summary.json", cfg, result);
        save_checkpoint((dir / "checkpoint.bin").string(), collect_tensors(result));
        write_manifest(dir / "manifest.json", cfg, out_dir, started, iso_timestamp());
        return kExitOk;
    });
}

const std::vector<std::string>& ablation_names() {
    static const std::vector<std::string> names = {"allow_grad", "pl_from_hr", "no_blend_prob",
                                                   "label_blending", "input_level_blend"};
    return names;
}

int run_ablate(TrainConfig cfg, const std::string& ablation, const std::string& out_dir) {
    cfg.cossl.mode = TrainMode::Cossl;
    if (ablation == "allow_grad") {
        cfg.cossl.allow_grad = true;
    } else if (ablation == "pl_from_hr") {
        cfg.cossl.pl_from_hr = true;
    } else if (ablation == "no_blend_prob") {
        cfg.tfe.blend_override = TfeConfig::BlendOverride::AllOne;
    } else if (ablation == "label_blending") {
        cfg.tfe.label_blending = true;
    } else if (ablation == "input_level_blend") {
        cfg.tfe.input_level_blend = true;
    } else {
        std::fprintf(stderr, "unknown ablation '%s'\n", ablation.c_str());
        return kExitUsage;
    }
    return run_experiment(cfg, out_dir);
}

int run_compare(const std::vector<std::string>& run_dirs, std::ostream& out) {
    return guarded([&]() -> int {
        if (run_dirs.empty()) {
            std::fprintf(stderr, "compare: no run directories given\n");
            return kExitUsage;
        }
        std::map<std::string, std::vector<double>> metrics;
        for (const std::string& dir : run_dirs) {
            const fs::path p = fs::path(dir) / "summary.json";
            std::ifstream f(p);
            if (!f) throw std::runtime_error("missing summary: " + p.string());
            json s = json::parse(f);
            for (const auto& [key, value] : s.items())
                if (value.is_number()) metrics[key].push_back(value.get<double>());
        }
        out << "metric,mean,std,n\n";
        for (const auto& [key, values] : metrics) {
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            const double sd = values.size() > 1 ? std::sqrt(var / (static_cast<double>(values.size()) - 1.0)) : 0.0;
            out << key << ',' << fmt(mean) << ',' << fmt(sd) << ',' << values.size() << '\n';
        }
        return kExitOk;
    });
}

}  // namespace cossl
