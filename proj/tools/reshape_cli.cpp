// Experiment runner over the C interface.
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reshape/reshape.h"

namespace {

struct Overrides {
    std::optional<std::string> strategy, out, mode;
    std::optional<double> tau, eta, rate;
    std::optional<int> workers;
    std::optional<unsigned long long> seed;
};

void add_overrides(CLI::App* cmd, std::string& config, Overrides& o) {
    cmd->add_option("--config", config, "experiment JSON file")->required();
    cmd->add_option("--strategy", o.strategy, "none | reshape-sbr | reshape-sbk | flux | flowjoin");
    cmd->add_option("--tau", o.tau, "workload gap threshold");
    cmd->add_option("--eta", o.eta, "minimum backlog of a skewed worker");
    cmd->add_option("--workers", o.workers, "operator workers");
    cmd->add_option("--seed", o.seed, "input generator seed");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--mode", o.mode, "deterministic | concurrent");
    cmd->add_option("--rate", o.rate, "source records per tick");
}

int report(reshape_status s) {
    std::fprintf(stderr, "reshape: %s: %s\n", reshape_status_name(s), reshape_last_error());
    return static_cast<int>(s);
}

int execute(const std::string& config, const Overrides& o, const char* baseline) {
    reshape_set_log_level(nullptr);
    reshape_experiment* exp = nullptr;
    if (auto s = reshape_experiment_load(config.c_str(), &exp)) return report(s);

    std::vector<std::pair<const char*, std::string>> sets;
    if (o.strategy) sets.emplace_back("strategy", *o.strategy);
    if (o.tau) sets.emplace_back("tau", std::to_string(*o.tau));
    if (o.eta) sets.emplace_back("eta", std::to_string(*o.eta));
    if (o.workers) sets.emplace_back("workers", std::to_string(*o.workers));
    if (o.seed) sets.emplace_back("seed", std::to_string(*o.seed));
    if (o.out) sets.emplace_back("out", *o.out);
    if (o.mode) sets.emplace_back("mode", *o.mode);
    if (o.rate) sets.emplace_back("rate", std::to_string(*o.rate));

    int rc = 0;
    for (const auto& [field, value] : sets) {
        if (auto s = reshape_experiment_set(exp, field, value.c_str())) {
            rc = report(s);
            break;
        }
    }
    if (rc == 0) {
        const auto s = baseline ? reshape_experiment_compare(exp, baseline) : reshape_experiment_run(exp);
        if (s) rc = report(s);
    }
    if (rc == 0) {
        if (auto s = reshape_experiment_write(exp)) rc = report(s);
    }
    if (rc == 0) {
        size_t need = 0;
        reshape_result_summary(exp, nullptr, 0, &need);
        std::string text(need, '\0');
        if (auto s = reshape_result_summary(exp, text.data(), text.size(), &need)) {
            rc = report(s);
        } else {
            std::fputs(text.c_str(), stdout);
            std::fprintf(stderr, "outputs written to %s\n", reshape_experiment_output_dir(exp));
        }
    }
    reshape_experiment_free(exp);
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Skew-mitigation experiment runner"};
    app.require_subcommand(1);
    app.set_version_flag("--version", reshape_version());

    std::string run_config, cmp_config, baseline = "none";
    Overrides run_o, cmp_o;
    auto* run = app.add_subcommand("run", "run one experiment");
    add_overrides(run, run_config, run_o);
    auto* cmp = app.add_subcommand("compare", "paired baseline and mitigated runs; reports load reduction");
    add_overrides(cmp, cmp_config, cmp_o);
    cmp->add_option("--baseline", baseline, "strategy of the reference run")->required();

    CLI11_PARSE(app, argc, argv);
    if (*run) return execute(run_config, run_o, nullptr);
    return execute(cmp_config, cmp_o, baseline.c_str());
}
