// parrot_sim: run, sweep and report simulated federated training experiments.
#include <parrot/errors.hpp>
#include <parrot/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string clock;
};

parrot::ExperimentSpec load_with_overrides(const std::string& path, const Overrides& o) {
    auto spec = parrot::load_experiment(path);
    if (o.seed) {
        spec.sim.seed = *o.seed;
    }
    if (!o.clock.empty()) {
        spec.sim.clock = parrot::parse_clock(o.clock);
    }
    if (!o.out.empty()) {
        spec.output_dir = o.out;
    }
    spec.sim.validate();
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulate federated training rounds on a pool of sequential executors"};
    app.require_subcommand(1);

    Overrides overrides;
    std::string spec_path;
    std::string report_dir;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("spec", spec_path, "experiment file (JSON)")->required();
        cmd->add_option("--seed", overrides.seed, "override sim.seed");
        cmd->add_option("--out", overrides.out, "override output.dir");
        cmd->add_option("--clock", overrides.clock, "override sim.clock")
            ->check(CLI::IsMember({"virtual", "real"}));
    };
    auto* run = app.add_subcommand("run", "run one experiment");
    add_common(run);
    auto* sweep = app.add_subcommand("sweep", "run every arm of the sweep section");
    add_common(sweep);
    auto* report = app.add_subcommand("report", "summarize a results directory");
    report->add_option("dir", report_dir, "results directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInvalid;
    }

    try {
        if (*report) {
            std::cout << parrot::report_directory(report_dir);
            return kOk;
        }
        const auto spec = load_with_overrides(spec_path, overrides);
        if (*run) {
            const auto result = parrot::run_experiment(spec, spec.output_dir);
            std::cout << "wrote " << result.rounds.size() << " rounds to " << spec.output_dir << "\n";
        } else {
            parrot::run_sweep(spec, spec.output_dir);
            std::cout << "wrote " << parrot::expand_sweep(spec).size() << " arms to " << spec.output_dir << "\n";
        }
        return kOk;
    } catch (const parrot::ConfigError& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailed;
    }
}
