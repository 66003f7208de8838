#pragma once

// Detector-side model: polarization analyzers, coincidence statistics and
// time-tagged arrival histograms.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qlink/chain.hpp"
#include "qlink/qmath.hpp"

namespace qlink {

enum class Port { Transmit, Reflect };

// QWP then HWP then a PBS; the photon is counted at `port`.
struct AnalyzerSpec {
    double qwp_deg = 0.0;
    double hwp_deg = 0.0;
    Port port = Port::Transmit;
};

struct MeasurementSetting {
    AnalyzerSpec signal;
    AnalyzerSpec idler;
    std::string signal_label;
    std::string idler_label;
};

struct DetectorEfficiencies {
    double signal_transmit = 1.0;
    double signal_reflect = 1.0;
    double idler_transmit = 1.0;
    double idler_reflect = 1.0;

    double signal(Port p) const { return p == Port::Transmit ? signal_transmit : signal_reflect; }
    double idler(Port p) const { return p == Port::Transmit ? idler_transmit : idler_reflect; }
};

struct CountRecord {
    MeasurementSetting setting;
    std::uint64_t counts = 0;
    double duration_s = 1.0;
    double singles_s_hz = 0.0;
    double singles_i_hz = 0.0;
    double window_ns = 0.0;
    int round = 0;
    double t_start_s = 0.0;
};

struct Acquisition {
    double pair_rate_hz = 0.0;
    double rate_factor = 1.0;
    double duration_s = 1.0;
    DetectorEfficiencies efficiencies;
    double singles_s_hz = 0.0;
    double singles_i_hz = 0.0;
    double window_s = 0.0;
};

// Single-arm projector U^dagger |port><port| U with U = hwp * qwp.
CMatrix analyzer_projector(const AnalyzerSpec& arm);
// Signal (x) idler rank-1 projector.
CMatrix analyzer_projector(const MeasurementSetting& setting);

// Mean true coincidences, without background.
double expected_signal_counts(const DensityMatrix& rho, const MeasurementSetting& setting, const Acquisition& acq);
// Mean coincidences including flat accidentals.
double expected_counts(const DensityMatrix& rho, const MeasurementSetting& setting, const Acquisition& acq);

std::uint64_t sample_counts(double mean, std::uint64_t seed, std::uint64_t index);

struct ArrivalHistogram {
    double bin_width_ps = 1.0;
    double origin_ns = 0.0;
    std::vector<std::uint64_t> bins;

    std::uint64_t total() const;
    double bin_center_ns(std::size_t i) const;
    // Events in bins whose centers lie in [lo_ns, hi_ns).
    std::uint64_t count_between(double lo_ns, double hi_ns) const;
};

// Timing spread of an arrival peak: detector jitter and wavepacket width in quadrature.
double combined_jitter_ps(double detector_jitter_ps, const LinkConfig& cfg);

// n_events arrivals split multinomially over peaks centered at k * separation,
// each smeared by a Gaussian of rms jitter_ps.
ArrivalHistogram histogram_arrivals(std::span<const double> peak_weights, const LinkConfig& cfg, double jitter_ps,
                                    std::uint64_t n_events, std::uint64_t seed, double bin_width_ps = 1.0,
                                    std::uint64_t stream_index = 0);

// Fraction of events farther than separation/4 from every peak center.
double interpeak_fraction(const ArrivalHistogram& hist, double separation_ns, std::size_t n_peaks);
// Gaussian tail mass beyond separation/4 for one peak.
double expected_interpeak_fraction(double jitter_ps, double separation_ns);

// P(e|H) from the histogram heralded by signal H and P(l|V) from the one
// heralded by signal V; each bin window is separation/2 wide.
std::pair<double, double> conditional_bin_probs(const ArrivalHistogram& heralded_h, const ArrivalHistogram& heralded_v,
                                                double separation_ns);

double accidentals(const CountRecord& rec);
double subtract_accidentals(const CountRecord& rec);

}  // namespace qlink
