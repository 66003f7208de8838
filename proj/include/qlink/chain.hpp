#pragma once

// The idler channel: polarization -> time-bin AMZI, strained transport fiber,
// time-bin -> polarization AMZI, and middle-peak post-selection.
//
// Mode spaces (signal polarization is always the leading factor):
//   input     s{H,V} x i{H,V}                      dim 4,  index s*2 + p
//   mid-link  s{H,V} x i{H,V} x bin{e,l}           dim 8,  index s*4 + p*2 + b
//   output    s{H,V} x i{H,V} x peak{EE,MID,LL}    dim 12, index s*6 + p*3 + k
//
// Loss is carried as lost trace; nothing in here normalizes except
// postselect_middle(). The chain never draws random numbers: phase noise is
// passed in explicitly.

#include <array>
#include <cstddef>

#include "qlink/elements.hpp"
#include "qlink/qmath.hpp"

namespace qlink {

inline constexpr std::size_t kInputDim = 4;
inline constexpr std::size_t kMidLinkDim = 8;
inline constexpr std::size_t kOutputDim = 12;

enum class Peak : std::size_t { EE = 0, MID = 1, LL = 2 };

inline constexpr std::size_t mid_index(std::size_t s, std::size_t p, std::size_t bin) { return s * 4 + p * 2 + bin; }
inline constexpr std::size_t out_index(std::size_t s, std::size_t p, Peak k) {
    return s * 6 + p * 3 + static_cast<std::size_t>(k);
}

struct LinkConfig {
    double timebin_separation_ns = 50.0;
    double delay_length_m = 10.2;
    // pol->TB splitter, TB->pol cleanup, TB->pol combiner
    std::array<double, 3> fpbs_extinction_db{20.0, 20.0, 20.0};
    // Deviation from 50:50 of both fiber beamsplitters, in [0, 0.5].
    double fbs_imbalance = 0.0;
    // Residual arm-loss mismatch after the VOA, applied to the short arm of
    // the pol->TB interferometer.
    double pdl_imbalance_db = 0.0;
    std::array<double, 2> phase_sigma_deg{1.0, 1.0};
    // Set points of the two interferometer phases.
    std::array<double, 2> amzi_phase_deg{0.0, 0.0};
    // Residual EL/LE arrival mismatch and the wavepacket rms duration.
    double temporal_mismatch_ps = 1.0;
    double wavepacket_sigma_ps = 12.3;
    std::array<double, 2> module_insertion_loss_db{12.0, 7.0};

    // Perfect components; insertion losses are kept.
    static LinkConfig ideal();

    // Throws std::invalid_argument naming the offending field.
    void validate() const;

    // EL/LE wavepacket overlap exp(-dt^2 / (2 sigma^2)).
    double overlap_factor() const;
};

// Group delay of a fiber length, group index 1.468.
double fiber_delay_ns(double length_m);

struct SourceSpec {
    double visibility = 1.0;
    double phase_rad = 0.0;
    // Fraction of pair emission carried by the |HH> spiral.
    double balance = 0.5;
};

// Two spirals in superposition; the second spiral's |HH> pair is rotated to
// |VV> and both are combined on a PBS. The result is mixed with white noise
// of weight (1 - visibility).
DensityMatrix bell_source(const SourceSpec& spec);

struct ChannelOutput {
    DensityMatrix joint_state;  // dim 12, block diagonal in the peak index
    double survival_probability = 0.0;
    std::array<double, 3> peak_weights{};  // EE, MID, LL

    // Unnormalized 4x4 signal x idler-polarization block of one peak.
    CMatrix peak_block(Peak k) const;
};

struct PostSelected {
    DensityMatrix state;  // normalized two-qubit polarization state
    double success_probability = 0.0;
};

struct PhaseDraws {
    double amzi1_rad = 0.0;
    double amzi2_rad = 0.0;
};

struct EndToEnd {
    DensityMatrix rho;
    double rate_factor = 0.0;          // MID success x insertion losses
    double success_probability = 0.0;  // MID success before insertion loss
    ChannelOutput channel;
};

DensityMatrix pol_to_timebin(const DensityMatrix& input, const LinkConfig& cfg, double phase_draw_rad);

DensityMatrix transport(const DensityMatrix& state, const PaddleAngles& paddles);

ChannelOutput timebin_to_pol(const DensityMatrix& state, const LinkConfig& cfg, double phase_draw_rad);

// Throws std::domain_error if the middle peak is empty.
PostSelected postselect_middle(const ChannelOutput& out);

EndToEnd end_to_end(const DensityMatrix& bell, const LinkConfig& cfg, const PaddleAngles& paddles,
                    const PhaseDraws& draws);

struct Baseline {
    DensityMatrix rho;
    double rate_factor = 1.0;
};

// Idler kept in polarization: the paddle unitary acts directly, no loss.
Baseline pol_only_baseline(const DensityMatrix& bell, const PaddleAngles& paddles);

// Joint probabilities P(signal s, idler bin b) of a mid-link state, by
// tracing out idler polarization. Indexed [s][b].
std::array<std::array<double, 2>, 2> bin_weights(const DensityMatrix& mid_link);

// Nominal relative phase of the MID-peak |VV> term relative to |HH>,
// source phase plus the interferometer set points.
double nominal_end_phase(const SourceSpec& source, const LinkConfig& cfg);

// Idler-only maps, exposed for tests and diagnostics.
CMatrix pol_to_timebin_idler_map(const LinkConfig& cfg, double phase_draw_rad);              // 4x2
std::array<CMatrix, 4> timebin_to_pol_idler_maps(const LinkConfig& cfg, double phase_draw_rad);  // EE, EL, LE, LL; 2x4

}  // namespace qlink
