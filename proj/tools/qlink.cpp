// Command-line front end for the link simulator.
//
// Exit codes: 0 success, 2 configuration or input error, 3 physics invariant
// violation, 4 I/O failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qlink/runner.hpp"
#include "qlink/scenario.hpp"

namespace {

using namespace qlink;
namespace fs = std::filesystem;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> trials;
};

Scenario load_with_overrides(const std::string& path, const Overrides& ov) {
    Scenario scn = load_scenario(path);
    if (ov.seed) scn.seed = *ov.seed;
    if (ov.out) scn.output_dir = *ov.out;
    if (ov.trials) scn.tomography.mc_trials = *ov.trials;
    scn.validate();
    return scn;
}

void print_file(const OutputTree& tree, const std::string& name) {
    const auto it = tree.files().find(name);
    if (it != tree.files().end()) std::cout << it->second;
}

void commit_and_report(const OutputTree& tree, const Scenario& scn) {
    tree.commit(scn.output_dir);
    print_file(tree, "summary.json");
    std::cerr << "wrote " << tree.files().size() << " files to " << scn.output_dir << "\n";
}

void add_overrides(CLI::App* sub, Overrides& ov) {
    sub->add_option("--seed", ov.seed, "Override the scenario seed");
    sub->add_option("--out", ov.out, "Override the output directory");
    sub->add_option("--trials", ov.trials, "Override the Monte Carlo trial count");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Polarization / time-bin interconversion link simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string scenario_path;
    std::string csv_path;
    Overrides ov;
    std::optional<double> target_phase_deg;
    bool no_subtract = false;

    auto* validate = app.add_subcommand("validate", "Check a scenario file and exit");
    validate->add_option("scenario", scenario_path, "Scenario JSON")->required();

    auto* source = app.add_subcommand("source-char", "Source tomography, CHSH repeats and fringe scan");
    source->add_option("scenario", scenario_path, "Scenario JSON")->required();
    add_overrides(source, ov);

    auto* sweep = app.add_subcommand("sweep-interconvert", "Tomography rounds through the full link under strain");
    sweep->add_option("scenario", scenario_path, "Scenario JSON")->required();
    add_overrides(sweep, ov);

    auto* baseline = app.add_subcommand("sweep-baseline", "Same schedule with the idler left in polarization");
    baseline->add_option("scenario", scenario_path, "Scenario JSON")->required();
    add_overrides(baseline, ov);

    auto* hist = app.add_subcommand("histograms", "Arrival-time histograms and conditional bin probabilities");
    hist->add_option("scenario", scenario_path, "Scenario JSON")->required();
    add_overrides(hist, ov);

    auto* tomo = app.add_subcommand("tomo-from-counts", "Reconstruct every round of a counts CSV");
    tomo->add_option("csv", csv_path, "Counts CSV")->required();
    std::uint64_t offline_seed = 1;
    int offline_trials = 100;
    tomo->add_option("--seed", offline_seed, "Seed of the run that produced the file")->capture_default_str();
    tomo->add_option("--trials", offline_trials, "Monte Carlo trials per round")->capture_default_str();
    tomo->add_option("--out", ov.out, "Write results.jsonl into this directory");
    tomo->add_option("--target-phase-deg", target_phase_deg, "Target Bell phase; fitted when omitted");
    tomo->add_flag("--no-subtract", no_subtract, "Keep accidental coincidences");

    auto* chsh = app.add_subcommand("chsh-from-counts", "CHSH S per round of a counts CSV");
    chsh->add_option("csv", csv_path, "Counts CSV")->required();
    chsh->add_flag("--no-subtract", no_subtract, "Keep accidental coincidences");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const std::string command = app.get_subcommands().front()->get_name();
        const RunInfo info{command, scenario_path};

        if (*validate) {
            const Scenario scn = load_scenario(scenario_path);
            std::cout << "ok " << scn.name << " (hash " << content_hash(scn.text) << ")\n";
        } else if (*source) {
            const Scenario scn = load_with_overrides(scenario_path, ov);
            commit_and_report(source_outputs(run_source_characterization(scn), scn, info), scn);
        } else if (*sweep) {
            const Scenario scn = load_with_overrides(scenario_path, ov);
            const HistogramReport h = run_histograms(scn);
            commit_and_report(sweep_outputs(run_interconversion_sweep(scn), &h, scn, info), scn);
        } else if (*baseline) {
            const Scenario scn = load_with_overrides(scenario_path, ov);
            commit_and_report(sweep_outputs(run_pol_baseline_sweep(scn), nullptr, scn, info), scn);
        } else if (*hist) {
            const Scenario scn = load_with_overrides(scenario_path, ov);
            commit_and_report(histogram_outputs(run_histograms(scn), scn, info), scn);
        } else if (*tomo) {
            if (offline_trials != 0 && offline_trials < 2) throw ConfigError("--trials must be 0 or >= 2");
            const auto records = read_counts_csv(csv_path);
            std::optional<double> phase;
            if (target_phase_deg) phase = deg2rad(*target_phase_deg);
            const RoundAnalysis ra = analyze_rounds(records, offline_seed, offline_trials, !no_subtract, phase);
            std::string jsonl;
            for (const auto& r : ra.rounds) jsonl += round_json(r) + "\n";
            std::cout << jsonl;
            if (ov.out) {
                OutputTree tree;
                tree.add("results.jsonl", jsonl);
                tree.commit(*ov.out);
            }
        } else if (*chsh) {
            const auto records = read_counts_csv(csv_path);
            const ChshAnalysis a = analyze_chsh(records, !no_subtract);
            nlohmann::json j{{"rounds", a.rounds}, {"s", a.s}, {"mean", a.mean}, {"std", a.std}};
            std::cout << j.dump() << "\n";
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const PhysicsError& e) {
        std::cerr << "physics invariant violated: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "physics invariant violated: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
