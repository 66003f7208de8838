#include "qlink/counting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "qlink/elements.hpp"
#include "qlink/noisegen.hpp"

namespace qlink {

CMatrix analyzer_projector(const AnalyzerSpec& arm) {
    const CMatrix u = hwp(arm.hwp_deg).matrix() * qwp(arm.qwp_deg).matrix();
    const PureState out = arm.port == Port::Transmit ? states::H() : states::V();
    const CMatrix v = u.adjoint() * CMatrix::column(out.amplitudes());
    return v * v.adjoint();
}

CMatrix analyzer_projector(const MeasurementSetting& setting) {
    return kron(analyzer_projector(setting.signal), analyzer_projector(setting.idler));
}

double expected_signal_counts(const DensityMatrix& rho, const MeasurementSetting& setting, const Acquisition& acq) {
    if (rho.dim() != 4) throw DimensionError("expected_counts: two-qubit state required");
    if (acq.pair_rate_hz < 0.0 || acq.rate_factor < 0.0 || acq.duration_s < 0.0) {
        throw std::invalid_argument("expected_counts: rates and duration must be >= 0");
    }
    const double p = std::max(0.0, (analyzer_projector(setting) * rho.matrix()).trace().real());
    const double eta = acq.efficiencies.signal(setting.signal.port) * acq.efficiencies.idler(setting.idler.port);
    return acq.pair_rate_hz * acq.rate_factor * p * eta * acq.duration_s;
}

double expected_counts(const DensityMatrix& rho, const MeasurementSetting& setting, const Acquisition& acq) {
    return expected_signal_counts(rho, setting, acq) +
           accidentals(acq.singles_s_hz, acq.singles_i_hz, acq.window_s, acq.duration_s);
}

std::uint64_t sample_counts(double mean, std::uint64_t seed, std::uint64_t index) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("sample_counts: mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    auto eng = counter_engine(seed, Stream::Counts, index);
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(eng);
}

std::uint64_t ArrivalHistogram::total() const { return std::accumulate(bins.begin(), bins.end(), std::uint64_t{0}); }

double ArrivalHistogram::bin_center_ns(std::size_t i) const {
    return (origin_ns * 1e3 + (static_cast<double>(i) + 0.5) * bin_width_ps) * 1e-3;
}

std::uint64_t ArrivalHistogram::count_between(double lo_ns, double hi_ns) const {
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const double c = bin_center_ns(i);
        if (c >= lo_ns && c < hi_ns) n += bins[i];
    }
    return n;
}

double combined_jitter_ps(double detector_jitter_ps, const LinkConfig& cfg) {
    return std::hypot(detector_jitter_ps, cfg.wavepacket_sigma_ps);
}

ArrivalHistogram histogram_arrivals(std::span<const double> peak_weights, const LinkConfig& cfg, double jitter_ps,
                                    std::uint64_t n_events, std::uint64_t seed, double bin_width_ps,
                                    std::uint64_t stream_index) {
    if (peak_weights.empty()) throw std::invalid_argument("histogram_arrivals: no peaks");
    if (!(jitter_ps >= 0.0)) throw std::invalid_argument("histogram_arrivals: jitter must be >= 0");
    if (!(bin_width_ps > 0.0)) throw std::invalid_argument("histogram_arrivals: bin width must be > 0");
    double wsum = 0.0;
    for (double w : peak_weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("histogram_arrivals: weights must be >= 0");
        wsum += w;
    }
    if (!(wsum > 0.0) && n_events > 0) throw std::invalid_argument("histogram_arrivals: all weights are zero");

    const double sep = cfg.timebin_separation_ns;
    const std::size_t n_peaks = peak_weights.size();
    ArrivalHistogram h;
    h.bin_width_ps = bin_width_ps;
    h.origin_ns = -0.5 * sep;
    const auto n_bins = static_cast<std::size_t>(std::ceil(static_cast<double>(n_peaks) * sep * 1e3 / bin_width_ps));
    h.bins.assign(n_bins, 0);

    auto eng = counter_engine(seed, Stream::Histogram, stream_index);
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::uint64_t remaining = n_events;
    double remaining_weight = wsum;
    for (std::size_t k = 0; k < n_peaks && remaining > 0; ++k) {
        std::uint64_t in_peak = remaining;
        if (k + 1 < n_peaks) {
            const double p = remaining_weight > 0.0 ? std::clamp(peak_weights[k] / remaining_weight, 0.0, 1.0) : 0.0;
            std::binomial_distribution<std::uint64_t> split(remaining, p);
            in_peak = split(eng);
        }
        remaining -= in_peak;
        remaining_weight -= peak_weights[k];
        const double center_ns = static_cast<double>(k) * sep;
        for (std::uint64_t e = 0; e < in_peak; ++e) {
            const double t_ns = center_ns + jitter_ps * 1e-3 * jitter(eng);
            const double idx = std::floor((t_ns - h.origin_ns) * 1e3 / bin_width_ps);
            const auto i = static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(n_bins - 1)));
            ++h.bins[i];
        }
    }
    return h;
}

double interpeak_fraction(const ArrivalHistogram& hist, double separation_ns, std::size_t n_peaks) {
    const std::uint64_t total = hist.total();
    if (total == 0) throw std::invalid_argument("interpeak_fraction: empty histogram");
    std::uint64_t near = 0;
    for (std::size_t k = 0; k < n_peaks; ++k) {
        const double c = static_cast<double>(k) * separation_ns;
        near += hist.count_between(c - 0.25 * separation_ns, c + 0.25 * separation_ns);
    }
    return static_cast<double>(total - near) / static_cast<double>(total);
}

double expected_interpeak_fraction(double jitter_ps, double separation_ns) {
    if (jitter_ps <= 0.0) return 0.0;
    return std::erfc(0.25 * separation_ns * 1e3 / (jitter_ps * std::sqrt(2.0)));
}

std::pair<double, double> conditional_bin_probs(const ArrivalHistogram& heralded_h, const ArrivalHistogram& heralded_v,
                                                double separation_ns) {
    const double q = 0.25 * separation_ns;
    auto fraction = [&](const ArrivalHistogram& h, bool want_late) {
        const double early = static_cast<double>(h.count_between(-q, q));
        const double late = static_cast<double>(h.count_between(separation_ns - q, separation_ns + q));
        if (early + late <= 0.0) throw std::invalid_argument("conditional_bin_probs: empty histogram");
        return (want_late ? late : early) / (early + late);
    };
    return {fraction(heralded_h, false), fraction(heralded_v, true)};
}

double accidentals(const CountRecord& rec) {
    return accidentals(rec.singles_s_hz, rec.singles_i_hz, rec.window_ns * 1e-9, rec.duration_s);
}

double subtract_accidentals(const CountRecord& rec) {
    return std::max(0.0, static_cast<double>(rec.counts) - accidentals(rec));
}

}  // namespace qlink
