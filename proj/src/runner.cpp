#include "qlink/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace qlink {

namespace {

using nlohmann::json;

// Sub-seed tags; the sweeps key their per-setting draws on the scenario seed
// directly.
enum : std::uint64_t {
    kTagSourceTomography = 1,
    kTagSourceChsh = 2,
    kTagFringe = 3,
    kTagHistogram = 4,
    kTagSourceMc = 5,
    kTagRoundMc = 1000,
};

constexpr std::size_t kGroupSize = 4;

struct SampleStats {
    double mean = 0.0;
    double std = 0.0;  // n - 1 normalization, 0 for a single sample
};

SampleStats sample_stats(const std::vector<double>& xs) {
    SampleStats s;
    if (xs.empty()) return s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
}

void require_physical(const DensityMatrix& rho, const char* where, double t_s) {
    const PhysicalityReport rep = is_physical(rho, 1e-9);
    if (!rep.physical) {
        std::ostringstream msg;
        msg << where << ": non-physical state at t = " << t_s << " s (min eigenvalue " << rep.min_eigenvalue
            << ", trace " << rep.trace << ")";
        throw PhysicsError(msg.str());
    }
}

double insertion_transmission(const LinkConfig& cfg) {
    return std::pow(10.0, -(cfg.module_insertion_loss_db[0] + cfg.module_insertion_loss_db[1]) / 10.0);
}

enum class ChainKind { Interconvert, Baseline };

// Channel response for one constant-paddle segment.
struct Segment {
    DensityMatrix rho = DensityMatrix::maximally_mixed(4);
    double rate_factor = 0.0;
    double idler_transmission = 0.0;
};

Segment evaluate_segment(ChainKind kind, const DensityMatrix& bell, const Scenario& scn, const PaddleAngles& pad,
                         const PhaseDraws& draws, double t_s) {
    Segment seg;
    if (kind == ChainKind::Baseline) {
        Baseline b = pol_only_baseline(bell, pad);
        require_physical(b.rho, "baseline", t_s);
        seg.rho = std::move(b.rho);
        seg.rate_factor = b.rate_factor;
        seg.idler_transmission = 1.0;
        return seg;
    }
    try {
        EndToEnd e = end_to_end(bell, scn.link, pad, draws);
        require_physical(e.rho, "end-to-end", t_s);
        seg.idler_transmission = e.channel.survival_probability * insertion_transmission(scn.link);
        seg.rho = std::move(e.rho);
        seg.rate_factor = e.rate_factor;
    } catch (const std::domain_error&) {
        // Nothing reaches the middle peak while the cleanup polarizer is
        // fully crossed.
    }
    return seg;
}

SweepReport run_sweep(const Scenario& scn, ChainKind kind) {
    scn.validate();
    const SettingSet36 set = build_settings_36();
    const DensityMatrix bell = bell_source(scn.source.spec);
    const double acq = scn.tomography.acquisition_s;
    const auto& sched = scn.strain.schedule;

    SweepReport rep;
    const auto n_rounds = static_cast<std::size_t>(scn.tomography.n_rounds);
    rep.records.reserve(n_rounds * kTomographySettings);
    // The four outcomes of one local basis pair are recorded together (two
    // detectors per analyzer) over a window of kGroupSize * acq.
    const std::size_t groups_per_round = kTomographySettings / kGroupSize;
    const double window = static_cast<double>(kGroupSize) * acq;
    for (std::size_t r = 0; r < n_rounds; ++r) {
        for (std::size_t grp = 0; grp < groups_per_round; ++grp) {
            const std::uint64_t g = r * groups_per_round + grp;
            const double t0 = static_cast<double>(g) * window;
            const double t1 = t0 + window;

            PhaseDraws draws;
            if (kind == ChainKind::Interconvert) {
                const NoiseDraws nd =
                    draw_phases(scn.seed, g, scn.link.phase_sigma_deg[0], scn.link.phase_sigma_deg[1]);
                draws = {nd.phase1_rad, nd.phase2_rad};
            }

            std::array<double, kGroupSize> mean{};
            double idler_exposure = 0.0;
            for (double t = t0; t < t1;) {
                const double tn = std::min(next_step_time(t, sched), t1);
                const PaddleAngles pad = paddle_at(t, sched, scn.strain.q1_deg, scn.strain.q2_deg);
                const Segment seg = evaluate_segment(kind, bell, scn, pad, draws, t);
                Acquisition a;
                a.pair_rate_hz = scn.source.pair_rate_hz;
                a.rate_factor = seg.rate_factor;
                a.duration_s = tn - t;
                a.efficiencies = scn.detectors.efficiencies;
                if (seg.rate_factor > 0.0) {
                    for (std::size_t o = 0; o < kGroupSize; ++o) {
                        mean[o] += expected_signal_counts(seg.rho, set.settings[grp * kGroupSize + o], a);
                    }
                }
                idler_exposure += seg.idler_transmission * (tn - t);
                t = tn;
            }

            for (std::size_t o = 0; o < kGroupSize; ++o) {
                const std::size_t k = grp * kGroupSize + o;
                CountRecord rec;
                rec.setting = set.settings[k];
                rec.duration_s = window;
                rec.singles_s_hz = scn.source.singles_s_hz;
                rec.singles_i_hz = scn.source.singles_i_hz * idler_exposure / window;
                rec.window_ns = scn.source.window_ns;
                rec.round = static_cast<int>(r);
                rec.t_start_s = t0;
                rec.counts = sample_counts(mean[o] + accidentals(rec), scn.seed, r * kTomographySettings + k);
                rep.records.push_back(std::move(rec));
            }
        }
    }
    rep.simulated_seconds = static_cast<double>(n_rounds * groups_per_round) * window;

    // Rate trace per local-basis group.
    double max_rate = 0.0;
    double min_rate = std::numeric_limits<double>::infinity();
    std::vector<double> rates;
    for (std::size_t start = 0; start < rep.records.size(); start += kGroupSize) {
        RatePoint p;
        p.round = rep.records[start].round;
        p.group = static_cast<int>((start % kTomographySettings) / kGroupSize);
        p.t_start_s = rep.records[start].t_start_s;
        p.duration_s = rep.records[start].duration_s;
        for (std::size_t j = start; j < start + kGroupSize; ++j) p.counts += rep.records[j].counts;
        const double rate = static_cast<double>(p.counts) / p.duration_s;
        rates.push_back(rate);
        max_rate = std::max(max_rate, rate);
        min_rate = std::min(min_rate, rate);
        rep.rate_trace.push_back(p);
    }
    for (std::size_t i = 0; i < rep.rate_trace.size(); ++i) {
        rep.rate_trace[i].normalized = max_rate > 0.0 ? rates[i] / max_rate : 0.0;
    }
    rep.rate_max_over_min = min_rate > 0.0 ? max_rate / min_rate : std::numeric_limits<double>::infinity();
    const SampleStats rs = sample_stats(rates);
    rep.rate_cv = rs.mean > 0.0 ? rs.std / rs.mean : 0.0;

    std::optional<double> target;
    if (kind == ChainKind::Baseline) target = scn.source.spec.phase_rad;
    RoundAnalysis ra = analyze_rounds(rep.records, scn.seed, scn.tomography.mc_trials,
                                      scn.tomography.subtract_accidentals, target);
    rep.rounds = std::move(ra.rounds);
    rep.target_phase_rad = ra.target_phase_rad;

    std::vector<double> fids;
    std::vector<std::pair<double, double>> points;
    for (const auto& rr : rep.rounds) {
        fids.push_back(rr.tomo.fidelity);
        points.emplace_back(rr.total_counts, rr.tomo.fidelity);
    }
    const SampleStats fs = sample_stats(fids);
    rep.fidelity_mean = fs.mean;
    rep.fidelity_std = fs.std;
    rep.fidelity_min = *std::min_element(fids.begin(), fids.end());
    rep.fidelity_max = *std::max_element(fids.begin(), fids.end());
    try {
        rep.fit = fidelity_vs_counts_fit(points);
    } catch (const std::invalid_argument&) {
        rep.fit.reset();
    }
    return rep;
}

FringeFit fit_fringe(double signal_hwp_deg, const std::vector<double>& h_deg, const std::vector<double>& y) {
    const auto n = static_cast<double>(y.size());
    FringeFit f;
    f.signal_hwp_deg = signal_hwp_deg;
    double c1 = 0.0;
    double c2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double a = 4.0 * deg2rad(h_deg[i]);
        f.offset += y[i] / n;
        c1 += 2.0 * y[i] * std::cos(a) / n;
        c2 += 2.0 * y[i] * std::sin(a) / n;
    }
    f.amplitude = std::hypot(c1, c2);
    f.phase_deg = rad2deg(std::atan2(c2, c1)) / 4.0;
    f.visibility = f.offset > 0.0 ? f.amplitude / f.offset : 0.0;
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double a = 4.0 * deg2rad(h_deg[i]);
        const double model = f.offset + c1 * std::cos(a) + c2 * std::sin(a);
        ss_res += (y[i] - model) * (y[i] - model);
        ss_tot += (y[i] - f.offset) * (y[i] - f.offset);
    }
    f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    return f;
}

std::string format_int(std::uint64_t x) { return std::to_string(x); }

json rho_json(const DensityMatrix& rho) {
    json arr = json::array();
    for (std::size_t i = 0; i < rho.dim(); ++i) {
        for (std::size_t j = 0; j < rho.dim(); ++j) {
            const cplx z = rho(i, j);
            arr.push_back(json::array({z.real(), z.imag()}));
        }
    }
    return arr;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json manifest_json(const OutputTree& tree, const Scenario& scn, const RunInfo& info, double simulated_seconds) {
    json files = json::array();
    for (const auto& [name, content] : tree.files()) {
        files.push_back({{"path", name}, {"bytes", content.size()}, {"fnv1a", content_hash(content)}});
    }
    return json{
        {"tool", "qlink"},
        {"version", kToolVersion},
        {"command", info.command},
        {"scenario", info.scenario_path.filename().string()},
        {"scenario_hash", content_hash(scn.text)},
        {"scenario_name", scn.name},
        {"seed", scn.seed},
        {"files", files},
        {"simulated_wall_clock_s", simulated_seconds},
    };
}

void add_manifest(OutputTree& tree, const Scenario& scn, const RunInfo& info, double simulated_seconds) {
    if (tree.empty()) throw IoError("no results to write");
    tree.add("manifest.json", manifest_json(tree, scn, info, simulated_seconds).dump(2) + "\n");
}

std::string histogram_csv(const HistogramReport& h) {
    std::string out = "histogram,time_ns,counts\n";
    auto emit = [&](const char* name, const ArrivalHistogram& hist) {
        for (std::size_t i = 0; i < hist.bins.size(); ++i) {
            if (hist.bins[i] == 0) continue;
            out += name;
            out += ',';
            out += format_double(hist.bin_center_ns(i));
            out += ',';
            out += format_int(hist.bins[i]);
            out += '\n';
        }
    };
    emit("pol_to_tb_signal_H", h.heralded_h);
    emit("pol_to_tb_signal_V", h.heralded_v);
    emit("tb_to_pol", h.three_peak);
    return out;
}

json histogram_summary(const HistogramReport& h) {
    return json{
        {"jitter_ps", h.jitter_ps},
        {"peak_weights", {h.peak_weights[0], h.peak_weights[1], h.peak_weights[2]}},
        {"p_early_given_h", h.p_early_given_h},
        {"p_late_given_v", h.p_late_given_v},
        {"p_early_given_h_exact", h.p_early_given_h_exact},
        {"p_late_given_v_exact", h.p_late_given_v_exact},
        {"interpeak_fraction", h.interpeak_fraction},
        {"interpeak_expected", h.interpeak_expected},
    };
}

const char* kCountsHeader = "round,setting_s,setting_i,qwp_s,hwp_s,qwp_i,hwp_i,t_start_s,duration_s,counts,singles_s,"
                            "singles_i,window_ns";

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_field(const std::string& s, std::size_t line_no, const char* column) {
    T value{};
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || s.empty()) {
        throw ConfigError("counts CSV line " + std::to_string(line_no) + ": bad " + column + " '" + s + "'");
    }
    return value;
}

}  // namespace

SweepReport run_interconversion_sweep(const Scenario& scn) { return run_sweep(scn, ChainKind::Interconvert); }

SweepReport run_pol_baseline_sweep(const Scenario& scn) { return run_sweep(scn, ChainKind::Baseline); }

RoundAnalysis analyze_rounds(const std::vector<CountRecord>& records, std::uint64_t seed, int mc_trials,
                             bool subtract, std::optional<double> target_phase_rad) {
    if (records.empty()) throw std::invalid_argument("analyze_rounds: no records");
    std::map<int, std::vector<CountRecord>> by_round;
    for (const auto& r : records) by_round[r.round].push_back(r);

    RoundAnalysis out;
    if (target_phase_rad) {
        out.target_phase_rad = *target_phase_rad;
    } else {
        std::vector<DensityMatrix> raw;
        for (const auto& [round, recs] : by_round) raw.push_back(linear_inversion(recs, subtract));
        out.target_phase_rad = fit_bell_phase(raw);
    }
    const PureState target = states::phi_plus(out.target_phase_rad);

    for (const auto& [round, recs] : by_round) {
        RoundResult rr;
        rr.round = round;
        rr.t_start_s = std::numeric_limits<double>::infinity();
        rr.t_end_s = -std::numeric_limits<double>::infinity();
        for (const auto& rec : recs) {
            rr.total_counts += static_cast<double>(rec.counts);
            rr.t_start_s = std::min(rr.t_start_s, rec.t_start_s);
            rr.t_end_s = std::max(rr.t_end_s, rec.t_start_s + rec.duration_s);
        }
        ReconstructionOptions opts;
        opts.subtract_accidentals = subtract;
        opts.mc_trials = mc_trials;
        opts.seed = derive_seed(seed, kTagRoundMc + static_cast<std::uint64_t>(round));
        rr.tomo = reconstruct(recs, target, opts);
        out.rounds.push_back(std::move(rr));
    }
    return out;
}

ChshAnalysis analyze_chsh(const std::vector<CountRecord>& records, bool subtract, const ChshAngles& angles) {
    if (records.empty()) throw std::invalid_argument("analyze_chsh: no records");
    std::map<int, std::vector<CountRecord>> by_round;
    for (const auto& r : records) by_round[r.round].push_back(r);
    ChshAnalysis out;
    for (const auto& [round, recs] : by_round) {
        out.rounds.push_back(round);
        out.s.push_back(chsh_s(recs, subtract, angles));
    }
    const SampleStats st = sample_stats(out.s);
    out.mean = st.mean;
    out.std = st.std;
    return out;
}

SourceReport run_source_characterization(const Scenario& scn) {
    scn.validate();
    const DensityMatrix bell = bell_source(scn.source.spec);
    require_physical(bell, "source", 0.0);

    auto record_for = [&](const MeasurementSetting& setting, double duration, int round, double t_start,
                          std::uint64_t seed, std::uint64_t index) {
        Acquisition a;
        a.pair_rate_hz = scn.source.pair_rate_hz;
        a.duration_s = duration;
        a.efficiencies = scn.detectors.efficiencies;
        CountRecord rec;
        rec.setting = setting;
        rec.duration_s = duration;
        rec.singles_s_hz = scn.source.singles_s_hz;
        rec.singles_i_hz = scn.source.singles_i_hz;
        rec.window_ns = scn.source.window_ns;
        rec.round = round;
        rec.t_start_s = t_start;
        rec.counts = sample_counts(expected_signal_counts(bell, setting, a) + accidentals(rec), seed, index);
        return rec;
    };

    SourceReport rep;
    double t = 0.0;

    const SettingSet36 set = build_settings_36();
    const double tomo_acq = scn.tomography.acquisition_s;
    const std::uint64_t tomo_seed = derive_seed(scn.seed, kTagSourceTomography);
    for (std::size_t k = 0; k < kTomographySettings; ++k) {
        rep.tomography_records.push_back(record_for(set.settings[k], tomo_acq, 0, t, tomo_seed, k));
        t += tomo_acq;
    }
    ReconstructionOptions opts;
    opts.subtract_accidentals = scn.tomography.subtract_accidentals;
    opts.mc_trials = scn.tomography.mc_trials;
    opts.seed = derive_seed(scn.seed, kTagSourceMc);
    rep.tomography = reconstruct(rep.tomography_records, states::phi_plus(scn.source.spec.phase_rad), opts);

    const auto chsh_settings = build_chsh_settings(scn.chsh.angles);
    const double chsh_acq = scn.chsh.acquisition_s;
    const std::uint64_t chsh_seed = derive_seed(scn.seed, kTagSourceChsh);
    std::uint64_t index = 0;
    for (int rpt = 0; rpt < scn.chsh.repeats; ++rpt) {
        for (const auto& s : chsh_settings) {
            rep.chsh_records.push_back(record_for(s, chsh_acq, rpt, t, chsh_seed, index++));
            t += chsh_acq;
        }
    }
    const ChshAnalysis sub = analyze_chsh(rep.chsh_records, true, scn.chsh.angles);
    const ChshAnalysis raw = analyze_chsh(rep.chsh_records, false, scn.chsh.angles);
    rep.chsh_per_repeat = sub.s;
    rep.chsh_raw_per_repeat = raw.s;
    rep.chsh_mean = sub.mean;
    rep.chsh_std = sub.std;
    rep.chsh_raw_mean = raw.mean;
    rep.tomography.chsh = sub.mean;

    const auto n_steps = static_cast<std::size_t>(std::lround(90.0 / scn.chsh.fringe_step_deg));
    const double step = 90.0 / static_cast<double>(n_steps);
    const std::uint64_t fringe_seed = derive_seed(scn.seed, kTagFringe);
    index = 0;
    for (double signal_hwp : {0.0, 22.5, 45.0, 67.5}) {
        std::vector<double> hs;
        std::vector<double> ys;
        for (std::size_t n = 0; n < n_steps; ++n) {
            const double h = static_cast<double>(n) * step;
            MeasurementSetting setting{{0.0, signal_hwp, Port::Transmit}, {0.0, h, Port::Transmit}, "", ""};
            std::vector<double> counts;
            for (int rpt = 0; rpt < scn.chsh.repeats; ++rpt) {
                const CountRecord rec = record_for(setting, chsh_acq, rpt, t, fringe_seed, index++);
                counts.push_back(static_cast<double>(rec.counts));
                t += chsh_acq;
            }
            const SampleStats st = sample_stats(counts);
            rep.fringe.push_back({signal_hwp, h, st.mean, st.std});
            hs.push_back(h);
            ys.push_back(st.mean);
        }
        rep.fringe_fits.push_back(fit_fringe(signal_hwp, hs, ys));
    }
    rep.simulated_seconds = t;
    return rep;
}

HistogramReport run_histograms(const Scenario& scn) {
    scn.validate();
    const DensityMatrix bell = bell_source(scn.source.spec);
    const LinkConfig& cfg = scn.link;
    const std::uint64_t seed = derive_seed(scn.seed, kTagHistogram);
    const std::uint64_t n = scn.detectors.histogram_events;
    const double bin = scn.detectors.histogram_bin_ps;

    HistogramReport h;
    h.jitter_ps = combined_jitter_ps(scn.detectors.jitter_ps, cfg);

    const auto w = bin_weights(pol_to_timebin(bell, cfg, 0.0));
    const std::array<double, 2> herald_h{w[0][0], w[0][1]};
    const std::array<double, 2> herald_v{w[1][0], w[1][1]};
    h.heralded_h = histogram_arrivals(herald_h, cfg, h.jitter_ps, n, seed, bin, 0);
    h.heralded_v = histogram_arrivals(herald_v, cfg, h.jitter_ps, n, seed, bin, 1);
    h.p_early_given_h_exact = w[0][0] / (w[0][0] + w[0][1]);
    h.p_late_given_v_exact = w[1][1] / (w[1][0] + w[1][1]);
    const auto [pe, pl] = conditional_bin_probs(h.heralded_h, h.heralded_v, cfg.timebin_separation_ns);
    h.p_early_given_h = pe;
    h.p_late_given_v = pl;

    const EndToEnd e = end_to_end(bell, cfg, PaddleAngles{}, PhaseDraws{});
    h.peak_weights = e.channel.peak_weights;
    h.three_peak = histogram_arrivals(h.peak_weights, cfg, h.jitter_ps, n, seed, bin, 2);
    h.interpeak_fraction = interpeak_fraction(h.three_peak, cfg.timebin_separation_ns, 3);
    h.interpeak_expected = expected_interpeak_fraction(h.jitter_ps, cfg.timebin_separation_ns);
    return h;
}

std::string format_double(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

std::string counts_csv(const std::vector<CountRecord>& records) {
    std::string out = kCountsHeader;
    out += '\n';
    for (const auto& r : records) {
        const auto& s = r.setting;
        out += std::to_string(r.round) + ',' + s.signal_label + ',' + s.idler_label + ',' +
               format_double(s.signal.qwp_deg) + ',' + format_double(s.signal.hwp_deg) + ',' +
               format_double(s.idler.qwp_deg) + ',' + format_double(s.idler.hwp_deg) + ',' +
               format_double(r.t_start_s) + ',' + format_double(r.duration_s) + ',' + format_int(r.counts) + ',' +
               format_double(r.singles_s_hz) + ',' + format_double(r.singles_i_hz) + ',' +
               format_double(r.window_ns) + '\n';
    }
    return out;
}

std::vector<CountRecord> parse_counts_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("counts CSV: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCountsHeader) throw ConfigError("counts CSV: unexpected header '" + line + "'");

    std::vector<CountRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_commas(line);
        if (f.size() != 13) {
            throw ConfigError("counts CSV line " + std::to_string(line_no) + ": expected 13 fields, got " +
                              std::to_string(f.size()));
        }
        CountRecord r;
        r.round = parse_field<int>(f[0], line_no, "round");
        r.setting.signal_label = f[1];
        r.setting.idler_label = f[2];
        r.setting.signal = {parse_field<double>(f[3], line_no, "qwp_s"), parse_field<double>(f[4], line_no, "hwp_s"),
                            Port::Transmit};
        r.setting.idler = {parse_field<double>(f[5], line_no, "qwp_i"), parse_field<double>(f[6], line_no, "hwp_i"),
                           Port::Transmit};
        r.t_start_s = parse_field<double>(f[7], line_no, "t_start_s");
        r.duration_s = parse_field<double>(f[8], line_no, "duration_s");
        r.counts = parse_field<std::uint64_t>(f[9], line_no, "counts");
        r.singles_s_hz = parse_field<double>(f[10], line_no, "singles_s");
        r.singles_i_hz = parse_field<double>(f[11], line_no, "singles_i");
        r.window_ns = parse_field<double>(f[12], line_no, "window_ns");
        if (!(r.duration_s > 0.0) || !(r.singles_s_hz >= 0.0) || !(r.singles_i_hz >= 0.0) || !(r.window_ns >= 0.0)) {
            throw ConfigError("counts CSV line " + std::to_string(line_no) + ": negative or zero rate/duration");
        }
        out.push_back(std::move(r));
    }
    if (out.empty()) throw ConfigError("counts CSV: no records");
    return out;
}

std::vector<CountRecord> read_counts_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open counts file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("failed reading counts file " + path.string());
    try {
        return parse_counts_csv(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string round_json(const RoundResult& r) {
    json j{
        {"round", r.round},
        {"t_start_s", r.t_start_s},
        {"t_end_s", r.t_end_s},
        {"total_counts", r.total_counts},
        {"fidelity", r.tomo.fidelity},
        {"fidelity_psd", r.tomo.fidelity_psd},
        {"fidelity_std", r.tomo.fidelity_std},
        {"mc_trials", r.tomo.n_mc_trials},
        {"physical", r.tomo.physical},
        {"min_eigenvalue", r.tomo.min_eigenvalue},
        {"rho", rho_json(r.tomo.rho)},
    };
    if (r.tomo.chsh) j["chsh"] = *r.tomo.chsh;
    return j.dump();
}

void OutputTree::add(const std::string& name, std::string content) {
    if (name.empty() || name.find('/') != std::string::npos || name.front() == '.') {
        throw std::invalid_argument("OutputTree: bad file name '" + name + "'");
    }
    files_[name] = std::move(content);
}

void OutputTree::commit(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    if (files_.empty()) throw IoError("no results to write to " + dir.string());

    const fs::path target = dir.has_filename() ? dir : dir.parent_path();
    const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
    const std::string stem = target.filename().string();
    const fs::path staging = parent / ("." + stem + ".partial");
    const fs::path retired = parent / ("." + stem + ".old");

    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create " + parent.string() + ": " + ec.message());
    fs::remove_all(staging, ec);
    fs::create_directory(staging, ec);
    if (ec) throw IoError("cannot create " + staging.string() + ": " + ec.message());

    for (const auto& [name, content] : files_) {
        const fs::path p = staging / name;
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) {
            fs::remove_all(staging, ec);
            throw IoError("failed writing " + (target / name).string());
        }
    }

    fs::remove_all(retired, ec);
    const bool existed = fs::exists(target);
    if (existed) {
        fs::rename(target, retired, ec);
        if (ec) {
            fs::remove_all(staging, ec);
            throw IoError("cannot replace " + target.string() + ": " + ec.message());
        }
    }
    fs::rename(staging, target, ec);
    if (ec) {
        const std::string why = ec.message();
        if (existed) fs::rename(retired, target, ec);
        fs::remove_all(staging, ec);
        throw IoError("cannot move results into " + target.string() + ": " + why);
    }
    fs::remove_all(retired, ec);
}

OutputTree sweep_outputs(const SweepReport& report, const HistogramReport* histograms, const Scenario& scn,
                         const RunInfo& info) {
    OutputTree tree;
    if (report.records.empty() || report.rounds.empty()) throw IoError("no results to write");
    tree.add("counts.csv", counts_csv(report.records));

    std::string jsonl;
    for (const auto& r : report.rounds) jsonl += round_json(r) + "\n";
    tree.add("results.jsonl", jsonl);

    std::string trace = "round,group,t_start_s,duration_s,counts,normalized_rate\n";
    for (const auto& p : report.rate_trace) {
        trace += std::to_string(p.round) + ',' + std::to_string(p.group) + ',' + format_double(p.t_start_s) + ',' +
                 format_double(p.duration_s) + ',' + format_int(p.counts) + ',' + format_double(p.normalized) + '\n';
    }
    tree.add("rate_trace.csv", trace);

    json summary{
        {"scenario", scn.name},
        {"command", info.command},
        {"n_rounds", report.rounds.size()},
        {"target_phase_deg", rad2deg(report.target_phase_rad)},
        {"fidelity_mean", report.fidelity_mean},
        {"fidelity_std", report.fidelity_std},
        {"fidelity_min", report.fidelity_min},
        {"fidelity_max", report.fidelity_max},
        {"fidelity_range", report.fidelity_max - report.fidelity_min},
        {"rate_max_over_min", finite_or_null(report.rate_max_over_min)},
        {"rate_cv", report.rate_cv},
        {"simulated_wall_clock_s", report.simulated_seconds},
    };
    if (report.fit) {
        summary["fidelity_vs_counts"] = {
            {"slope", report.fit->slope},
            {"intercept", report.fit->intercept},
            {"correlation", report.fit->correlation},
        };
    }
    if (histograms) {
        tree.add("histograms.csv", histogram_csv(*histograms));
        summary["histograms"] = histogram_summary(*histograms);
    }
    tree.add("summary.json", summary.dump(2) + "\n");
    add_manifest(tree, scn, info, report.simulated_seconds);
    return tree;
}

OutputTree source_outputs(const SourceReport& report, const Scenario& scn, const RunInfo& info) {
    OutputTree tree;
    if (report.tomography_records.empty()) throw IoError("no results to write");
    tree.add("counts.csv", counts_csv(report.tomography_records));
    tree.add("chsh_counts.csv", counts_csv(report.chsh_records));

    RoundResult rr;
    rr.t_start_s = report.tomography_records.front().t_start_s;
    rr.t_end_s = report.tomography_records.back().t_start_s + report.tomography_records.back().duration_s;
    for (const auto& r : report.tomography_records) rr.total_counts += static_cast<double>(r.counts);
    rr.tomo = report.tomography;
    tree.add("results.jsonl", round_json(rr) + "\n");

    std::string fringe = "signal_hwp_deg,idler_hwp_deg,mean_counts,std_counts\n";
    for (const auto& p : report.fringe) {
        fringe += format_double(p.signal_hwp_deg) + ',' + format_double(p.idler_hwp_deg) + ',' +
                  format_double(p.mean_counts) + ',' + format_double(p.std_counts) + '\n';
    }
    tree.add("fringe.csv", fringe);

    json fits = json::array();
    for (const auto& f : report.fringe_fits) {
        fits.push_back({{"signal_hwp_deg", f.signal_hwp_deg},
                        {"offset", f.offset},
                        {"amplitude", f.amplitude},
                        {"phase_deg", f.phase_deg},
                        {"visibility", f.visibility},
                        {"r_squared", f.r_squared}});
    }
    json summary{
        {"scenario", scn.name},
        {"command", info.command},
        {"fidelity", report.tomography.fidelity},
        {"fidelity_std", report.tomography.fidelity_std},
        {"fidelity_psd", report.tomography.fidelity_psd},
        {"chsh_mean", report.chsh_mean},
        {"chsh_std", report.chsh_std},
        {"chsh_raw_mean", report.chsh_raw_mean},
        {"chsh_per_repeat", report.chsh_per_repeat},
        {"chsh_raw_per_repeat", report.chsh_raw_per_repeat},
        {"fringe_fits", fits},
        {"simulated_wall_clock_s", report.simulated_seconds},
    };
    tree.add("summary.json", summary.dump(2) + "\n");
    add_manifest(tree, scn, info, report.simulated_seconds);
    return tree;
}

OutputTree histogram_outputs(const HistogramReport& report, const Scenario& scn, const RunInfo& info) {
    OutputTree tree;
    tree.add("histograms.csv", histogram_csv(report));
    json summary = histogram_summary(report);
    summary["scenario"] = scn.name;
    summary["command"] = info.command;
    tree.add("summary.json", summary.dump(2) + "\n");
    add_manifest(tree, scn, info, 0.0);
    return tree;
}

}  // namespace qlink
