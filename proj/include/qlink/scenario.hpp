#pragma once

// Declarative scenario files (JSON). Every key carries its unit in the name
// and unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "qlink/chain.hpp"
#include "qlink/counting.hpp"
#include "qlink/noisegen.hpp"
#include "qlink/tomography.hpp"

namespace qlink {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class PhysicsError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SourceParams {
    SourceSpec spec;
    double pair_rate_hz = 1e4;
    double singles_s_hz = 0.0;
    double singles_i_hz = 0.0;
    double window_ns = 1.0;
};

struct StrainParams {
    StrainSchedule schedule;
    double q1_deg = 0.0;
    double q2_deg = 15.0;
};

struct TomographyPlan {
    int n_rounds = 10;
    double acquisition_s = 4.333;
    int mc_trials = 100;
    bool subtract_accidentals = true;
};

struct ChshPlan {
    ChshAngles angles;
    int repeats = 5;
    double acquisition_s = 1.0;
    double fringe_step_deg = 5.0;
};

struct DetectorParams {
    DetectorEfficiencies efficiencies;
    double jitter_ps = 20.0;
    double histogram_bin_ps = 1.0;
    std::uint64_t histogram_events = 100000;
};

struct Scenario {
    std::string name = "unnamed";
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    SourceParams source;
    LinkConfig link;
    StrainParams strain;
    TomographyPlan tomography;
    ChshPlan chsh;
    DetectorParams detectors;

    // Raw file text; the manifest hash is taken over it.
    std::string text;

    // Throws ConfigError.
    void validate() const;
};

Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

// Stable 64-bit FNV-1a, rendered as 16 hex digits.
std::string content_hash(const std::string& bytes);

// Independent sub-seed for one named use of the scenario seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace qlink
