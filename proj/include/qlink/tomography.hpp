#pragma once

// Two-qubit polarization tomography: the overcomplete 36-projector set,
// linear-inversion reconstruction, CHSH and Monte Carlo error bars.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qlink/counting.hpp"
#include "qlink/qmath.hpp"

namespace qlink {

inline constexpr std::size_t kTomographySettings = 36;
inline constexpr std::size_t kChshSettings = 16;

class InversionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct Eigenstate {
    std::string label;
    double qwp_deg;
    double hwp_deg;
};

// H, V, D, A, R, L with the analyzer angles that project onto them.
const std::array<Eigenstate, 6>& eigenstates();

// Ordered signal basis (Z, X, Y) x idler basis x signal outcome x idler
// outcome, so entries 4g..4g+3 form local-basis group g.
struct SettingSet36 {
    std::array<MeasurementSetting, kTomographySettings> settings;
};

SettingSet36 build_settings_36();

// Position of `setting` in the canonical list, matched by projector.
std::optional<std::size_t> match_setting(const MeasurementSetting& setting,
                                         std::span<const MeasurementSetting> canonical);

// Least-squares unit-trace Hermitian estimate from weights (counts or exact
// probabilities) given
// in canonical order; each group of four is normalized to sum to one.
DensityMatrix linear_inversion_weights(std::span<const double> weights);

// For each canonical setting, the index of its record. Requires exactly the 36
// settings, each once.
std::array<std::size_t, kTomographySettings> tomography_order(std::span<const CountRecord> records);

DensityMatrix linear_inversion(std::span<const CountRecord> records, bool subtract = false);

// Polarization angles of the two analyzers for each arm.
struct ChshAngles {
    double a_deg = 0.0;
    double a2_deg = 45.0;
    double b_deg = 22.5;
    double b2_deg = 67.5;
};

// (a,b), (a,b'), (a',b), (a',b') each with outcomes ++, +-, -+, --.
std::array<MeasurementSetting, kChshSettings> build_chsh_settings(const ChshAngles& angles = {});

double chsh_s_weights(std::span<const double> weights);
double chsh_s(std::span<const CountRecord> records, bool subtract, const ChshAngles& angles = {});

struct McResult {
    double f_mean = 0.0;
    double f_std = 0.0;
    DensityMatrix rho_mean = DensityMatrix::maximally_mixed(4);
};

McResult mc_uncertainty(std::span<const CountRecord> records, const PureState& target, int n_trials,
                        std::uint64_t seed, bool subtract = false);

struct TomographyResult {
    DensityMatrix rho = DensityMatrix::maximally_mixed(4);
    double fidelity = 0.0;      // raw linear inversion, clamped to [0, 1]
    double fidelity_psd = 0.0;  // after projection onto the physical set
    double fidelity_std = 0.0;
    std::optional<double> chsh;
    int n_mc_trials = 0;
    bool physical = false;
    double min_eigenvalue = 0.0;
};

struct ReconstructionOptions {
    bool subtract_accidentals = false;
    int mc_trials = 0;
    std::uint64_t seed = 0;
};

TomographyResult reconstruct(std::span<const CountRecord> records, const PureState& target,
                             const ReconstructionOptions& opts);

// Phase maximizing <phi+(phase)|rho|phi+(phase)> summed over states.
double fit_bell_phase(std::span<const DensityMatrix> rhos);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double correlation = 0.0;  // 0 when y has no variance
};

// Ordinary least squares of y on x; needs >= 3 points and spread in x.
LinearFit fidelity_vs_counts_fit(std::span<const std::pair<double, double>> points);

}  // namespace qlink
