// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fame/harness.hpp"
#include "fame/oracles.hpp"
#include "metric_fixtures.hpp"

using namespace fame;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

RunConfig shipped(const std::string& name) { return load_config((fs::path(FAME_SOURCE_DIR) / "configs" / name).string()); }

Outcome oracle_suite(const std::string& suite, double max_seconds) {
    const auto r = oracle::run_suite(suite, 20240601);
    const bool fast_enough = r.seconds < max_seconds;
    return {r.passed && fast_enough,
            fmt("%s: %zu instances, max error %.3g (tol %.1g), %.2fs (limit %.0fs)%s", suite.c_str(), r.instances,
                r.max_error, r.tolerance, r.seconds, max_seconds, r.detail.empty() ? "" : (" " + r.detail).c_str())};
}

Outcome criterion_cf() {
    const auto r = oracle::run_suite("cf", 20240601);
    return {r.passed, fmt("1000 pairs, self-distance zero and non-negative; max brute-force gap %.3g (tol %.0e)%s",
                          r.max_error, r.tolerance, r.detail.empty() ? "" : (" " + r.detail).c_str())};
}

Outcome criterion_welch() {
    const auto start = Clock::now();
    Rng rng(derive_seed(7, 6));
    const double alpha = 0.05;
    const int trials = 10000;
    const std::size_t episodes = 10;
    auto draw = [&](double meta_shift) {
        CandidateSummaries s;
        for (Candidate c : kCandidates) {
            EvalSummary e{c, {}};
            const double shift = c == Candidate::meta ? meta_shift : 0.0;
            for (std::size_t i = 0; i < episodes; ++i) e.returns.push_back(rng.normal(shift, 1.0));
            s[static_cast<std::size_t>(c)] = std::move(e);
        }
        return s;
    };
    int null_meta = 0, separated_meta = 0;
    for (int t = 0; t < trials; ++t) {
        null_meta += one_vs_all_test(draw(0.0), alpha, WarmupMode::strict_test).chosen == Candidate::meta;
        separated_meta += one_vs_all_test(draw(3.0), alpha, WarmupMode::strict_test).chosen == Candidate::meta;
    }
    const double null_rate = null_meta / double(trials), power = separated_meta / double(trials);
    const double secs = seconds_since(start);
    return {null_rate <= alpha + 0.02 && power >= 0.95 && secs < 30.0,
            fmt("identical candidates: Meta in %.4f of %d trials (limit %.2f); 3-sigma Meta: %.4f (need 0.95); %.2fs",
                null_rate, trials, alpha + 0.02, power, secs)};
}

Outcome criterion_reencounter() {
    int hits = 0;
    const int seeds = 50;
    std::map<std::string, int> decisions;
    for (int s = 0; s < seeds; ++s) {
        auto cfg = shipped("gridworld_aba_fame_q.json");
        cfg.seed = static_cast<std::uint64_t>(s);
        cfg.output_dir.clear();
        cfg.warmup_mode = WarmupMode::empirical_ranking;
        const auto r = make_run(cfg)->run();
        const Candidate c = r.tasks.back().chosen;
        ++decisions[to_string(c)];
        hits += c == Candidate::meta || c == Candidate::fast;
    }
    std::string spread;
    for (const auto& [name, n] : decisions) spread += " " + name + "=" + std::to_string(n);
    return {hits >= 45, fmt("Meta-or-Fast on the second A in %d/%d seeds (need 45);%s", hits, seeds, spread.c_str())};
}

struct MethodStats {
    double forgetting = 0, forgetting_se = 0, deficit = 0, deficit_se = 0;
};

std::map<std::string, MethodStats> stability_stats(const std::vector<std::string>& config_files, int seeds) {
    std::vector<LoadedCurve> curves;
    for (const auto& file : config_files)
        for (int s = 0; s < seeds; ++s) {
            auto cfg = shipped(file);
            cfg.seed = static_cast<std::uint64_t>(s);
            cfg.output_dir.clear();
            const auto r = make_run(cfg)->run();
            curves.push_back({cfg.id(), cfg.seed, r.curve_label(), r.curve});
            if (r.fast_curve) curves.push_back({cfg.id(), cfg.seed, r.fast_curve_label(), *r.fast_curve});
        }
    std::map<std::string, MethodStats> out;
    for (const auto& row : compute_report(curves)) {
        auto& m = out[row.method];
        if (row.metric == "forgetting") m.forgetting = row.value, m.forgetting_se = row.stderr_;
        if (row.metric == "avg_perf_deficit") m.deficit = row.value, m.deficit_se = row.stderr_;
    }
    return out;
}

/// lower + its stderr strictly below upper - its stderr.
bool separated(double lower, double lower_se, double upper, double upper_se) {
    return lower + lower_se < upper - upper_se;
}

Outcome criterion_stability() {
    const auto start = Clock::now();
    std::string detail;
    bool ok = true;

    const auto grid = stability_stats(
        {"gridworld_aba_fame_q.json", "gridworld_aba_finetune.json", "gridworld_aba_reset.json"}, 20);
    const auto& fq = grid.at("FAME-Q");
    const auto& gf = grid.at("Finetune");
    const auto& gr = grid.at("Reset");
    const bool grid_ok = separated(fq.forgetting, fq.forgetting_se, gf.forgetting, gf.forgetting_se) &&
                         separated(gf.forgetting, gf.forgetting_se, gr.deficit, gr.deficit_se);
    ok = ok && grid_ok;
    detail += fmt("gridworld FAME-Q F=%.3f+-%.3f < Finetune F=%.3f+-%.3f < Reset deficit=%.3f+-%.3f [%s]",
                  fq.forgetting, fq.forgetting_se, gf.forgetting, gf.forgetting_se, gr.deficit, gr.deficit_se,
                  grid_ok ? "ok" : "violated");

    const auto cont = stability_stats({"pointmass_aba_fame_kl.json", "pointmass_aba_fame_wd.json",
                                       "pointmass_aba_finetune.json", "pointmass_aba_reset.json"},
                                      20);
    const auto& cf = cont.at("Finetune");
    const auto& cr = cont.at("Reset");
    for (const char* name : {"FAME-KL", "FAME-WD"}) {
        const auto& m = cont.at(name);
        const bool m_ok = separated(m.forgetting, m.forgetting_se, cf.forgetting, cf.forgetting_se) &&
                          separated(cf.forgetting, cf.forgetting_se, cr.deficit, cr.deficit_se);
        ok = ok && m_ok;
        detail += fmt("; continuous %s F=%.3f+-%.3f [%s]", name, m.forgetting, m.forgetting_se, m_ok ? "ok" : "violated");
    }
    detail += fmt("; continuous Finetune F=%.3f+-%.3f, Reset deficit=%.3f+-%.3f", cf.forgetting, cf.forgetting_se,
                  cr.deficit, cr.deficit_se);
    const double secs = seconds_since(start);
    detail += fmt("; %.1fs", secs);
    return {ok && secs < 600.0, detail};
}

Outcome criterion_metrics() {
    double worst = 0.0;
    bool self_zero = true;
    bool shapes = true;
    for (const auto& fx : test::metric_fixtures()) {
        const auto ft = forward_transfer(fx.curve, fx.baseline);
        const auto f = forgetting(fx.curve);
        worst = std::max(worst, std::abs(ft.mean - fx.ft_mean));
        worst = std::max(worst, std::abs(f.mean - fx.forgetting_mean));
        for (std::size_t i = 0; i < ft.per_task.size(); ++i) {
            shapes = shapes && ft.per_task[i].has_value() == fx.ft_per_task[i].has_value();
            if (ft.per_task[i] && fx.ft_per_task[i]) worst = std::max(worst, std::abs(*ft.per_task[i] - *fx.ft_per_task[i]));
        }
        for (std::size_t i = 0; i < f.per_task.size(); ++i)
            worst = std::max(worst, std::abs(f.per_task[i] - fx.forgetting_per_task[i]));
        self_zero = self_zero && forward_transfer(fx.curve, fx.curve).mean == 0.0;
    }
    auto cfg = shipped("gridworld_aba_fame_q.json");
    cfg.output_dir.clear();
    const auto r = make_run(cfg)->run();
    self_zero = self_zero && forward_transfer(r.curve, r.curve).mean == 0.0 &&
                forward_transfer(*r.fast_curve, *r.fast_curve).mean == 0.0;
    return {self_zero && shapes && worst <= 1e-12,
            fmt("FT(self) exactly 0: %s; 3 fixtures, max deviation %.3g (tol 1e-12)", self_zero ? "yes" : "no", worst)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion_determinism() {
    const auto root = fs::temp_directory_path() / "fame_acceptance_determinism";
    fs::remove_all(root);
    std::size_t compared = 0;
    bool same = true;
    for (const char* file : {"gridworld_aba_fame_q.json", "gridworld_aba_fame_q_l2.json", "pointmass_aba_fame_kl.json",
                             "pointmass_aba_fame_wd.json"}) {
        std::vector<fs::path> dirs;
        for (int rep = 0; rep < 2; ++rep) {
            auto cfg = shipped(file);
            cfg.seed = 3;
            dirs.push_back(root / (std::string(file) + "-" + std::to_string(rep)));
            cfg.output_dir = dirs.back().string();
            run_experiment(cfg);
        }
        for (const char* csv : {"curves.csv", "tasks.csv", "summary.csv"}) {
            const auto a = slurp(dirs[0] / csv), b = slurp(dirs[1] / csv);
            same = same && !a.empty() && a == b;
            ++compared;
        }
    }
    fs::remove_all(root);
    return {same, fmt("%zu CSV pairs from repeated (config, seed) runs %s", compared, same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"incremental l2 integration equals batch average", [] { return oracle_suite("l2", 5.0); }},
        {"incremental Wasserstein integration equals batch average", [] { return oracle_suite("wd", 5.0); }},
        {"softmax-KL closed form equals numeric MLE", [] { return oracle_suite("kl", 30.0); }},
        {"W2 closed form equals quantile quadrature", [] { return oracle_suite("w2-closed-form", 5.0); }},
        {"forgetting measure foundations", criterion_cf},
        {"warm-up test calibration", criterion_welch},
        {"re-encountered task reuses prior knowledge", criterion_reencounter},
        {"stability ordering", criterion_stability},
        {"metric formulas", criterion_metrics},
        {"determinism", criterion_determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.passed;
        std::printf("[%s] %2zu %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
