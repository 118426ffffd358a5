#include "cossl/eval.hpp"

#include "cossl/sampling.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace cossl {

void PriorPair::validate() const {
    if (source.size() != target.size() || source.empty())
        throw ValidationError("prior vectors must be non-empty and equal-sized");
    double ss = 0.0;
    double st = 0.0;
    for (double p : source) {
        if (p <= 0.0) throw ValidationError("p_source entries must be > 0");
        ss += p;
    }
    for (double p : target) {
        if (p < 0.0) throw ValidationError("p_target entries must be >= 0");
        st += p;
    }
    if (std::abs(ss - 1.0) > 1e-9 || std::abs(st - 1.0) > 1e-9)
        throw ValidationError("priors must sum to 1");
}

std::vector<double> post_compensate(std::span<const double> logits, const PriorPair& pair) {
    pair.validate();
    if (logits.size() != pair.source.size())
        throw ValidationError("logit/prior dimension mismatch");
    std::vector<double> out(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k)
        out[k] = logits[k] + std::log(pair.target[k]) - std::log(pair.source[k]);
    return out;
}

EvalResult evaluate(const EncoderParams& encoder, const HeadParams& head, const Dataset& test,
                    const PriorPair* pc) {
    const int k = head.num_classes();
    std::vector<long> per_class_total(static_cast<std::size_t>(k), 0);
    std::vector<long> per_class_correct(static_cast<std::size_t>(k), 0);
    long correct = 0;

    for (std::size_t i = 0; i < test.size(); ++i) {
        std::vector<double> logits = classify(head, encode(encoder, test.feature(i)));
        if (pc) logits = post_compensate(logits, *pc);
        int pred = 0;
        for (int j = 1; j < k; ++j)
            if (logits[static_cast<std::size_t>(j)] > logits[static_cast<std::size_t>(pred)]) pred = j;
        const int truth = test.label(i) - 1;
        ++per_class_total[static_cast<std::size_t>(truth)];
        if (pred == truth) {
            ++correct;
            ++per_class_correct[static_cast<std::size_t>(truth)];
        }
    }

    EvalResult res;
    res.pc_applied = pc != nullptr;
    res.overall_accuracy = test.size() ? static_cast<double>(correct) / static_cast<double>(test.size()) : 0.0;
    res.per_class_recall.resize(static_cast<std::size_t>(k), 0.0);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) {
        const double r = per_class_total[static_cast<std::size_t>(c)]
                             ? static_cast<double>(per_class_correct[static_cast<std::size_t>(c)]) /
                                   static_cast<double>(per_class_total[static_cast<std::size_t>(c)])
                             : 0.0;
        res.per_class_recall[static_cast<std::size_t>(c)] = r;
        sum += r;
    }
    res.averaged_class_recall = sum / static_cast<double>(k);
    return res;
}

SweepTable shifted_sweep(const EncoderParams& encoder, const HeadParams& head, const Dataset& pool,
                         std::span<const int> gammas, int cap, PcMode mode,
                         bool pc_unknown_uniform, const std::vector<double>& source_prior,
                         std::uint64_t seed) {
    const int k = pool.num_classes();
    SweepTable table;
    for (int gamma : gammas) {
        const int base = shifted_base_for_cap(cap, gamma);
        const ClassDistribution counts = shifted_test_counts(base, gamma, k);
        const Dataset test = build_test_set(pool, counts, seed);

        const PriorPair* pc = nullptr;
        PriorPair pair;
        if (mode == PcMode::Known) {
            pair.source = source_prior;
            pair.target = counts_to_prior(counts);
            pc = &pair;
        } else if (pc_unknown_uniform) {
            pair.source = source_prior;
            pair.target.assign(static_cast<std::size_t>(k), 1.0 / k);
            pc = &pair;
        }
        EvalResult row = evaluate(encoder, head, test, pc);
        row.gamma_test = gamma;
        table.rows.push_back(std::move(row));
    }

    table.mean.per_class_recall.assign(static_cast<std::size_t>(k), 0.0);
    table.mean.pc_applied = !table.rows.empty() && table.rows.front().pc_applied;
    for (const EvalResult& row : table.rows) {
        table.mean.overall_accuracy += row.overall_accuracy;
        table.mean.averaged_class_recall += row.averaged_class_recall;
        for (int c = 0; c < k; ++c)
            table.mean.per_class_recall[static_cast<std::size_t>(c)] +=
                row.per_class_recall[static_cast<std::size_t>(c)];
    }
    if (!table.rows.empty()) {
        const double n = static_cast<double>(table.rows.size());
        table.mean.overall_accuracy /= n;
        table.mean.averaged_class_recall /= n;
        for (double& r : table.mean.per_class_recall) r /= n;
    }
    return table;
}

namespace {
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}
}  // namespace

void write_sweep_csv(const std::string& path, const SweepTable& table) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    const int k = table.rows.empty() ? 0 : static_cast<int>(table.rows.front().per_class_recall.size());
    f << "# cossl-sweep-v1\n";
    f << "gamma,overall_acc,avg_class_recall";
    for (int c = 1; c <= k; ++c) f << ",recall_" << c;
    f << ",pc_applied\n";
    auto write_row = [&](const std::string& tag, const EvalResult& r) {
        f << tag << ',' << fmt(r.overall_accuracy) << ',' << fmt(r.averaged_class_recall);
        for (double rec : r.per_class_recall) f << ',' << fmt(rec);
        f << ',' << (r.pc_applied ? 1 : 0) << '\n';
    };
    for (const EvalResult& row : table.rows)
        write_row(std::to_string(static_cast<int>(row.gamma_test)), row);
    write_row("mean", table.mean);
    if (!f) throw std::runtime_error("write failed: " + path);
}

double last_k_average(std::span<const double> history, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > history.size())
        throw ValidationError("last_k_average: history shorter than k");
    double s = 0.0;
    for (std::size_t i = history.size() - static_cast<std::size_t>(k); i < history.size(); ++i)
        s += history[i];
    return s / static_cast<double>(k);
}

}  // namespace cossl
