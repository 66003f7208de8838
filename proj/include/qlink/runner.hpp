#pragma once

// The three experiments (source characterization, interconversion sweep,
// polarization-only baseline sweep), the arrival-time histograms, and their
// file outputs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qlink/scenario.hpp"

namespace qlink {

inline constexpr const char* kToolVersion = "0.1.0";

struct RoundResult {
    int round = 0;
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    double total_counts = 0.0;
    TomographyResult tomo;
};

// Coincidences of one local-basis group (four settings), normalized to the
// largest group rate of the run.
struct RatePoint {
    int round = 0;
    int group = 0;
    double t_start_s = 0.0;
    double duration_s = 0.0;
    std::uint64_t counts = 0;
    double normalized = 0.0;
};

struct SweepReport {
    std::vector<CountRecord> records;
    std::vector<RoundResult> rounds;
    std::vector<RatePoint> rate_trace;
    double target_phase_rad = 0.0;
    double fidelity_mean = 0.0;
    double fidelity_std = 0.0;  // sample std across rounds
    double fidelity_min = 0.0;
    double fidelity_max = 0.0;
    double rate_max_over_min = 0.0;
    double rate_cv = 0.0;
    std::optional<LinearFit> fit;  // fidelity vs per-round counts
    double simulated_seconds = 0.0;
};

SweepReport run_interconversion_sweep(const Scenario& scn);
SweepReport run_pol_baseline_sweep(const Scenario& scn);

struct FringePoint {
    double signal_hwp_deg = 0.0;
    double idler_hwp_deg = 0.0;
    double mean_counts = 0.0;
    double std_counts = 0.0;
};

// y = c0 + c1 cos(4h) + c2 sin(4h) over one full period of idler HWP angle h.
struct FringeFit {
    double signal_hwp_deg = 0.0;
    double offset = 0.0;
    double amplitude = 0.0;
    double phase_deg = 0.0;  // idler HWP angle of maximum
    double visibility = 0.0;
    double r_squared = 0.0;
};

struct SourceReport {
    std::vector<CountRecord> tomography_records;
    TomographyResult tomography;
    std::vector<CountRecord> chsh_records;  // round = repeat index
    std::vector<double> chsh_per_repeat;
    std::vector<double> chsh_raw_per_repeat;
    double chsh_mean = 0.0;
    double chsh_std = 0.0;
    double chsh_raw_mean = 0.0;
    std::vector<FringePoint> fringe;
    std::vector<FringeFit> fringe_fits;
    double simulated_seconds = 0.0;
};

SourceReport run_source_characterization(const Scenario& scn);

struct HistogramReport {
    double jitter_ps = 0.0;
    ArrivalHistogram heralded_h;  // after pol->TB, signal H
    ArrivalHistogram heralded_v;  // after pol->TB, signal V
    ArrivalHistogram three_peak;  // after TB->pol
    std::array<double, 3> peak_weights{};
    double p_early_given_h = 0.0;
    double p_late_given_v = 0.0;
    double p_early_given_h_exact = 0.0;
    double p_late_given_v_exact = 0.0;
    double interpeak_fraction = 0.0;
    double interpeak_expected = 0.0;
};

HistogramReport run_histograms(const Scenario& scn);

// Per-round reconstruction shared by the sweeps and the offline path. With no
// target phase the phase is fitted to the raw per-round estimates.
struct RoundAnalysis {
    std::vector<RoundResult> rounds;
    double target_phase_rad = 0.0;
};

RoundAnalysis analyze_rounds(const std::vector<CountRecord>& records, std::uint64_t seed, int mc_trials,
                             bool subtract, std::optional<double> target_phase_rad);

struct ChshAnalysis {
    std::vector<int> rounds;
    std::vector<double> s;
    double mean = 0.0;
    double std = 0.0;
};

ChshAnalysis analyze_chsh(const std::vector<CountRecord>& records, bool subtract, const ChshAngles& angles = {});

// Shortest decimal that parses back to the same double.
std::string format_double(double x);

std::string counts_csv(const std::vector<CountRecord>& records);
// Throws ConfigError on malformed content.
std::vector<CountRecord> parse_counts_csv(const std::string& text);
std::vector<CountRecord> read_counts_csv(const std::filesystem::path& path);

std::string round_json(const RoundResult& r);

// In-memory set of files committed to a directory in one step: written to a
// sibling temporary directory which then replaces the target.
class OutputTree {
  public:
    void add(const std::string& name, std::string content);
    bool empty() const { return files_.empty(); }
    const std::map<std::string, std::string>& files() const { return files_; }
    // Throws IoError; on failure the target is left untouched.
    void commit(const std::filesystem::path& dir) const;

  private:
    std::map<std::string, std::string> files_;
};

struct RunInfo {
    std::string command;
    std::filesystem::path scenario_path;
};

OutputTree sweep_outputs(const SweepReport& report, const HistogramReport* histograms, const Scenario& scn,
                         const RunInfo& info);
OutputTree source_outputs(const SourceReport& report, const Scenario& scn, const RunInfo& info);
OutputTree histogram_outputs(const HistogramReport& report, const Scenario& scn, const RunInfo& info);

}  // namespace qlink
