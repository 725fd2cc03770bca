#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fame/buffers.hpp"
#include "fame/config.hpp"
#include "fame/harness.hpp"
#include "fame/oracles.hpp"
#include "fame/serialize.hpp"

namespace {

int run_command(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                const std::optional<std::string>& output, const std::optional<std::string>& resume) {
    fame::RunConfig cfg = fame::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (output) cfg.output_dir = *output;
    std::optional<std::filesystem::path> resume_path;
    if (resume) resume_path = *resume;
    const fame::RunResult result = fame::run_experiment(cfg, resume_path);
    std::cout << cfg.id() << ": " << result.tasks.size() << " of " << cfg.sequence.size() << " tasks";
    for (const auto& t : result.tasks) std::cout << (t.task_index == 0 ? " [" : ", ") << fame::to_string(t.chosen);
    std::cout << (result.tasks.empty() ? "" : "]") << '\n';
    if (!cfg.output_dir.empty()) std::cout << "wrote " << cfg.output_dir << '\n';
    if (result.complete) std::cout << fame::summary_csv(result);
    return 0;
}

int oracle_command(const std::string& suite, std::uint64_t seed) {
    std::vector<std::string> suites;
    if (suite == "all")
        suites = fame::oracle::suite_names();
    else
        suites.push_back(suite);
    bool all_passed = true;
    for (const auto& name : suites) {
        const auto r = fame::oracle::run_suite(name, seed);
        all_passed = all_passed && r.passed;
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.suite << ": " << r.instances << " instances, max error "
                  << r.max_error << " (tolerance " << r.tolerance << "), " << r.seconds << " s";
        if (!r.detail.empty()) std::cout << ", " << r.detail;
        std::cout << '\n';
    }
    return all_passed ? 0 : 1;
}

int metrics_command(const std::vector<std::string>& inputs, const std::string& baseline,
                    const std::optional<std::string>& output) {
    std::vector<fame::LoadedCurve> curves;
    for (const auto& in : inputs) {
        std::filesystem::path p(in);
        if (std::filesystem::is_directory(p)) p /= "curves.csv";
        auto loaded = fame::load_curves_csv(p);
        curves.insert(curves.end(), loaded.begin(), loaded.end());
    }
    const std::string csv = fame::report_csv(fame::compute_report(curves, baseline));
    if (output)
        fame::detail::write_atomically(*output, csv);
    else
        std::cout << csv;
    return 0;
}

int dump_buffer_command(const std::string& checkpoint_path, const std::optional<std::string>& output) {
    std::ifstream in(checkpoint_path);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + checkpoint_path + "'");
    const nlohmann::json j = nlohmann::json::parse(in);
    const auto& learners = j.at("learners");
    const std::string kind = learners.at("meta_buffer_kind").get<std::string>();
    std::ostringstream out;
    if (kind == "state_action")
        fame::write_csv(out, fame::buffer_from_json<fame::StateActionRecord>(learners.at("meta_buffer")));
    else if (kind == "state")
        fame::write_csv(out, fame::buffer_from_json<fame::StateRecord>(learners.at("meta_buffer")));
    else if (kind == "continuous_action")
        fame::write_csv(out, fame::buffer_from_json<fame::ContinuousActionRecord>(learners.at("meta_buffer")));
    else
        throw std::runtime_error("unknown meta buffer kind '" + kind + "'");
    if (output)
        fame::detail::write_atomically(*output, out.str());
    else
        std::cout << out.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-learner continual reinforcement learning lab"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a task sequence from a JSON config");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    std::optional<std::string> resume;
    run->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the run seed");
    run->add_option("--output", output, "Override the output directory");
    run->add_option("--resume", resume, "Continue from a checkpoint written by an earlier run")->check(CLI::ExistingFile);

    auto* oracle = app.add_subcommand("oracle-check", "Compare integration rules and divergences with reference oracles");
    std::string suite = "all";
    std::uint64_t oracle_seed = 0;
    oracle->add_option("--suite", suite, "l2, wd, kl, gaussian-kl, w2-closed-form, cf or all");
    oracle->add_option("--seed", oracle_seed, "Seed for the random instances");

    auto* metrics = app.add_subcommand("metrics", "Cross-run report from curves.csv files or run directories");
    std::vector<std::string> inputs;
    std::string baseline = "Reset";
    std::optional<std::string> report_path;
    metrics->add_option("inputs", inputs, "curves.csv files or output directories")->required();
    metrics->add_option("--baseline", baseline, "Method used as the forward-transfer reference");
    metrics->add_option("--output", report_path, "Write the report here instead of stdout");

    auto* dump = app.add_subcommand("dump-buffer", "Print the meta buffer stored in a checkpoint as CSV");
    std::string checkpoint_path;
    std::optional<std::string> dump_path;
    dump->add_option("checkpoint", checkpoint_path, "checkpoint.json")->required()->check(CLI::ExistingFile);
    dump->add_option("--output", dump_path, "Write the CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return run_command(config_path, seed, output, resume);
        if (oracle->parsed()) return oracle_command(suite, oracle_seed);
        if (metrics->parsed()) return metrics_command(inputs, baseline, report_path);
        if (dump->parsed()) return dump_buffer_command(checkpoint_path, dump_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
