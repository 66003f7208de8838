#pragma once

// Seedable stochastic inputs of the simulation. Every random value is keyed by
// (seed, stream, index): there is no generator state shared between calls, so
// sweeps can be evaluated in any order and replayed exactly.

#include <cstdint>
#include <random>

#include "qlink/elements.hpp"

namespace qlink {

// Half-waveplate strain actuator: steps of step_deg every dwell_s, bouncing
// between start_deg and max_deg.
struct StrainSchedule {
    double step_deg = 1.0;
    double dwell_s = 5.0;
    double max_deg = 160.0;
    double start_deg = 0.0;

    void validate() const;
    // Whole steps from start to max.
    std::int64_t steps_per_leg() const;
    double period_s() const;
};

PaddleAngles paddle_at(double t_s, const StrainSchedule& sched, double fixed_q1_deg, double fixed_q2_deg);

// First time strictly after t_s at which paddle_at changes.
double next_step_time(double t_s, const StrainSchedule& sched);

enum class Stream : std::uint64_t {
    Phase = 1,
    Counts = 2,
    Histogram = 3,
    MonteCarlo = 4,
};

// Fresh engine for one key.
std::mt19937_64 counter_engine(std::uint64_t seed, Stream stream, std::uint64_t index);

struct NoiseDraws {
    double phase1_rad = 0.0;
    double phase2_rad = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t setting_index = 0;
};

NoiseDraws draw_phases(std::uint64_t seed, std::uint64_t setting_index, double sigma_deg);
NoiseDraws draw_phases(std::uint64_t seed, std::uint64_t setting_index, double sigma1_deg, double sigma2_deg);

// Flat-background accidental coincidences: S_s * S_i * window * duration.
double accidentals(double singles_s_hz, double singles_i_hz, double window_s, double duration_s);

}  // namespace qlink
