#include "qlink/noisegen.hpp"

#include <cmath>
#include <stdexcept>

namespace qlink {

void StrainSchedule::validate() const {
    if (!(step_deg > 0.0) || !std::isfinite(step_deg)) throw std::invalid_argument("StrainSchedule: step_deg must be > 0");
    if (!(dwell_s > 0.0) || !std::isfinite(dwell_s)) throw std::invalid_argument("StrainSchedule: dwell_s must be > 0");
    if (!std::isfinite(start_deg) || !std::isfinite(max_deg) || max_deg < start_deg) {
        throw std::invalid_argument("StrainSchedule: need start_deg <= max_deg");
    }
}

std::int64_t StrainSchedule::steps_per_leg() const {
    return static_cast<std::int64_t>(std::floor((max_deg - start_deg) / step_deg + 1e-9));
}

double StrainSchedule::period_s() const { return 2.0 * static_cast<double>(steps_per_leg()) * dwell_s; }

PaddleAngles paddle_at(double t_s, const StrainSchedule& sched, double fixed_q1_deg, double fixed_q2_deg) {
    if (!(t_s >= 0.0)) throw std::invalid_argument("paddle_at: t must be >= 0");
    const std::int64_t leg = sched.steps_per_leg();
    const auto n = static_cast<std::int64_t>(std::floor(t_s / sched.dwell_s));
    std::int64_t pos = 0;
    if (leg > 0) {
        const std::int64_t m = n % (2 * leg);
        pos = m <= leg ? m : 2 * leg - m;
    }
    return {fixed_q1_deg, sched.start_deg + static_cast<double>(pos) * sched.step_deg, fixed_q2_deg};
}

double next_step_time(double t_s, const StrainSchedule& sched) {
    return (std::floor(t_s / sched.dwell_s) + 1.0) * sched.dwell_s;
}

std::mt19937_64 counter_engine(std::uint64_t seed, Stream stream, std::uint64_t index) {
    const auto s = static_cast<std::uint64_t>(stream);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

NoiseDraws draw_phases(std::uint64_t seed, std::uint64_t setting_index, double sigma_deg) {
    return draw_phases(seed, setting_index, sigma_deg, sigma_deg);
}

NoiseDraws draw_phases(std::uint64_t seed, std::uint64_t setting_index, double sigma1_deg, double sigma2_deg) {
    if (!(sigma1_deg >= 0.0) || !(sigma2_deg >= 0.0)) throw std::invalid_argument("draw_phases: sigma must be >= 0");
    auto eng = counter_engine(seed, Stream::Phase, setting_index);
    std::normal_distribution<double> unit(0.0, 1.0);
    const double z1 = unit(eng);
    const double z2 = unit(eng);
    return {deg2rad(sigma1_deg) * z1, deg2rad(sigma2_deg) * z2, seed, setting_index};
}

double accidentals(double singles_s_hz, double singles_i_hz, double window_s, double duration_s) {
    if (singles_s_hz < 0.0 || singles_i_hz < 0.0 || window_s < 0.0 || duration_s < 0.0) {
        throw std::invalid_argument("accidentals: inputs must be >= 0");
    }
    return singles_s_hz * singles_i_hz * window_s * duration_s;
}

}  // namespace qlink
