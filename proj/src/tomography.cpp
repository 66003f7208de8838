#include "qlink/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qlink/noisegen.hpp"

namespace qlink {

namespace {

constexpr std::size_t kParams = 15;

std::array<CMatrix, 4> paulis() {
    const cplx i{0.0, 1.0};
    return {CMatrix::identity(2), CMatrix{{0.0, 1.0}, {1.0, 0.0}}, CMatrix{{0.0, -i}, {i, 0.0}},
            CMatrix{{1.0, 0.0}, {0.0, -1.0}}};
}

// Two-qubit Pauli products except I(x)I, index 4a+b-1.
const std::array<CMatrix, kParams>& pauli_basis() {
    static const std::array<CMatrix, kParams> basis = [] {
        const auto p = paulis();
        std::array<CMatrix, kParams> b;
        for (std::size_t k = 1; k < 16; ++k) b[k - 1] = kron(p[k / 4], p[k % 4]);
        return b;
    }();
    return basis;
}

struct Design {
    // a(k, j) = tr(P_k sigma_j) / 4
    std::array<std::array<double, kParams>, kTomographySettings> a{};
    // Cholesky factor of a^T a (lower triangle).
    std::array<std::array<double, kParams>, kParams> chol{};
    std::array<double, kTomographySettings> offset{};  // tr(P_k) / 4
};

const Design& design() {
    static const Design d = [] {
        Design out;
        const auto set = build_settings_36();
        const auto& basis = pauli_basis();
        for (std::size_t k = 0; k < kTomographySettings; ++k) {
            const CMatrix proj = analyzer_projector(set.settings[k]);
            out.offset[k] = proj.trace().real() / 4.0;
            for (std::size_t j = 0; j < kParams; ++j) out.a[k][j] = (proj * basis[j]).trace().real() / 4.0;
        }
        std::array<std::array<double, kParams>, kParams> ata{};
        for (std::size_t r = 0; r < kParams; ++r)
            for (std::size_t c = 0; c < kParams; ++c)
                for (std::size_t k = 0; k < kTomographySettings; ++k) ata[r][c] += out.a[k][r] * out.a[k][c];
        for (std::size_t j = 0; j < kParams; ++j) {
            double diag = ata[j][j];
            for (std::size_t m = 0; m < j; ++m) diag -= out.chol[j][m] * out.chol[j][m];
            if (!(diag > 1e-12)) throw InversionError("linear_inversion: singular design matrix");
            out.chol[j][j] = std::sqrt(diag);
            for (std::size_t i = j + 1; i < kParams; ++i) {
                double v = ata[i][j];
                for (std::size_t m = 0; m < j; ++m) v -= out.chol[i][m] * out.chol[j][m];
                out.chol[i][j] = v / out.chol[j][j];
            }
        }
        return out;
    }();
    return d;
}

std::array<double, kChshSettings> chsh_weights_from_records(std::span<const CountRecord> records, bool subtract,
                                                            const ChshAngles& angles) {
    const auto canonical = build_chsh_settings(angles);
    std::array<double, kChshSettings> w{};
    std::array<bool, kChshSettings> seen{};
    for (const auto& rec : records) {
        const auto idx = match_setting(rec.setting, canonical);
        if (!idx) throw InversionError("chsh_s: record does not match a CHSH setting");
        if (seen[*idx]) throw InversionError("chsh_s: duplicate CHSH setting");
        seen[*idx] = true;
        w[*idx] = subtract ? subtract_accidentals(rec) : static_cast<double>(rec.counts);
    }
    for (bool s : seen)
        if (!s) throw InversionError("chsh_s: missing CHSH setting");
    return w;
}

}  // namespace

const std::array<Eigenstate, 6>& eigenstates() {
    static const std::array<Eigenstate, 6> e{{
        {"H", 0.0, 0.0},
        {"V", 0.0, 45.0},
        {"D", 45.0, 22.5},
        {"A", 45.0, -22.5},
        // With qwp(45)|H> = |R>, the analyzer that passes R needs the fast axis at -45.
        {"R", -45.0, 0.0},
        {"L", 45.0, 0.0},
    }};
    return e;
}

SettingSet36 build_settings_36() {
    const auto& e = eigenstates();
    SettingSet36 set;
    std::size_t k = 0;
    for (std::size_t sb = 0; sb < 3; ++sb)
        for (std::size_t ib = 0; ib < 3; ++ib)
            for (std::size_t so = 0; so < 2; ++so)
                for (std::size_t io = 0; io < 2; ++io) {
                    const Eigenstate& s = e[sb * 2 + so];
                    const Eigenstate& i = e[ib * 2 + io];
                    set.settings[k++] = MeasurementSetting{{s.qwp_deg, s.hwp_deg, Port::Transmit},
                                                           {i.qwp_deg, i.hwp_deg, Port::Transmit},
                                                           s.label,
                                                           i.label};
                }
    return set;
}

std::optional<std::size_t> match_setting(const MeasurementSetting& setting,
                                         std::span<const MeasurementSetting> canonical) {
    const CMatrix p = analyzer_projector(setting);
    for (std::size_t k = 0; k < canonical.size(); ++k) {
        if (p.max_abs_diff(analyzer_projector(canonical[k])) < 1e-9) return k;
    }
    return std::nullopt;
}

DensityMatrix linear_inversion_weights(std::span<const double> weights) {
    if (weights.size() != kTomographySettings) throw InversionError("linear_inversion: need 36 weights");
    const Design& d = design();

    std::array<double, kTomographySettings> p{};
    for (std::size_t g = 0; g < kTomographySettings / 4; ++g) {
        double total = 0.0;
        for (std::size_t k = 4 * g; k < 4 * g + 4; ++k) {
            if (!std::isfinite(weights[k])) throw InversionError("linear_inversion: non-finite weight");
            total += weights[k];
        }
        if (!(total > 0.0)) throw InversionError("linear_inversion: local-basis group " + std::to_string(g) + " has no counts");
        for (std::size_t k = 4 * g; k < 4 * g + 4; ++k) p[k] = weights[k] / total;
    }

    // Normal equations a^T a r = a^T (p - offset), solved with the cached factor.
    std::array<double, kParams> rhs{};
    for (std::size_t j = 0; j < kParams; ++j)
        for (std::size_t k = 0; k < kTomographySettings; ++k) rhs[j] += d.a[k][j] * (p[k] - d.offset[k]);
    std::array<double, kParams> y{};
    for (std::size_t i = 0; i < kParams; ++i) {
        double v = rhs[i];
        for (std::size_t m = 0; m < i; ++m) v -= d.chol[i][m] * y[m];
        y[i] = v / d.chol[i][i];
    }
    std::array<double, kParams> r{};
    for (std::size_t ii = kParams; ii-- > 0;) {
        double v = y[ii];
        for (std::size_t m = ii + 1; m < kParams; ++m) v -= d.chol[m][ii] * r[m];
        r[ii] = v / d.chol[ii][ii];
    }

    CMatrix rho = CMatrix::identity(4);
    const auto& basis = pauli_basis();
    for (std::size_t j = 0; j < kParams; ++j) rho += basis[j] * cplx{r[j], 0.0};
    return DensityMatrix(rho * cplx{0.25, 0.0});
}

std::array<std::size_t, kTomographySettings> tomography_order(std::span<const CountRecord> records) {
    if (records.size() != kTomographySettings) {
        throw InversionError("linear_inversion: expected 36 records, got " + std::to_string(records.size()));
    }
    const auto set = build_settings_36();
    std::array<std::size_t, kTomographySettings> pos{};
    std::array<bool, kTomographySettings> seen{};
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto idx = match_setting(records[r].setting, set.settings);
        if (!idx) throw InversionError("linear_inversion: record does not match a tomography setting");
        if (seen[*idx]) {
            throw InversionError("linear_inversion: duplicate setting " + records[r].setting.signal_label +
                                 records[r].setting.idler_label);
        }
        seen[*idx] = true;
        pos[*idx] = r;
    }
    return pos;
}

DensityMatrix linear_inversion(std::span<const CountRecord> records, bool subtract) {
    const auto pos = tomography_order(records);
    std::array<double, kTomographySettings> w{};
    for (std::size_t k = 0; k < kTomographySettings; ++k) {
        const CountRecord& rec = records[pos[k]];
        w[k] = subtract ? subtract_accidentals(rec) : static_cast<double>(rec.counts);
    }
    return linear_inversion_weights(w);
}

std::array<MeasurementSetting, kChshSettings> build_chsh_settings(const ChshAngles& angles) {
    const std::array<std::pair<double, double>, 4> pairs{{{angles.a_deg, angles.b_deg},
                                                          {angles.a_deg, angles.b2_deg},
                                                          {angles.a2_deg, angles.b_deg},
                                                          {angles.a2_deg, angles.b2_deg}}};
    std::array<MeasurementSetting, kChshSettings> out;
    std::size_t k = 0;
    for (const auto& [a, b] : pairs) {
        for (int so = 0; so < 2; ++so) {
            for (int io = 0; io < 2; ++io) {
                // Polarization angle theta is analyzed by a HWP at theta/2; the
                // orthogonal outcome sits 45 degrees further.
                const double hs = 0.5 * a + 45.0 * so;
                const double hi = 0.5 * b + 45.0 * io;
                out[k++] = MeasurementSetting{{0.0, hs, Port::Transmit},
                                              {0.0, hi, Port::Transmit},
                                              "a" + std::to_string(static_cast<int>(std::lround(a * 10))) + (so ? "-" : "+"),
                                              "b" + std::to_string(static_cast<int>(std::lround(b * 10))) + (io ? "-" : "+")};
            }
        }
    }
    return out;
}

double chsh_s_weights(std::span<const double> weights) {
    if (weights.size() != kChshSettings) throw InversionError("chsh_s: need 16 weights");
    std::array<double, 4> e{};
    for (std::size_t pair = 0; pair < 4; ++pair) {
        const double pp = weights[4 * pair + 0], pm = weights[4 * pair + 1];
        const double mp = weights[4 * pair + 2], mm = weights[4 * pair + 3];
        const double total = pp + pm + mp + mm;
        if (!(total > 0.0)) throw InversionError("chsh_s: zero total in an analyzer pair");
        e[pair] = (pp + mm - pm - mp) / total;
    }
    return std::abs(e[0] - e[1]) + std::abs(e[2] + e[3]);
}

double chsh_s(std::span<const CountRecord> records, bool subtract, const ChshAngles& angles) {
    return chsh_s_weights(chsh_weights_from_records(records, subtract, angles));
}

McResult mc_uncertainty(std::span<const CountRecord> records, const PureState& target, int n_trials,
                        std::uint64_t seed, bool subtract) {
    if (n_trials < 2) throw std::invalid_argument("mc_uncertainty: need at least 2 trials");
    const auto pos = tomography_order(records);
    double sum = 0.0, sum2 = 0.0;
    CMatrix rho_sum(4, 4);
    for (int t = 0; t < n_trials; ++t) {
        auto eng = counter_engine(seed, Stream::MonteCarlo, static_cast<std::uint64_t>(t));
        std::array<double, kTomographySettings> w{};
        for (std::size_t k = 0; k < kTomographySettings; ++k) {
            CountRecord rec = records[pos[k]];
            if (rec.counts > 0) {
                std::poisson_distribution<std::uint64_t> dist(static_cast<double>(rec.counts));
                rec.counts = dist(eng);
            }
            w[k] = subtract ? subtract_accidentals(rec) : static_cast<double>(rec.counts);
        }
        const DensityMatrix rho = linear_inversion_weights(w);
        const double f = fidelity_pure(rho, target);
        sum += f;
        sum2 += f * f;
        rho_sum += rho.matrix();
    }
    const double n = static_cast<double>(n_trials);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var), DensityMatrix(rho_sum * cplx{1.0 / n, 0.0})};
}

TomographyResult reconstruct(std::span<const CountRecord> records, const PureState& target,
                             const ReconstructionOptions& opts) {
    TomographyResult res;
    res.rho = linear_inversion(records, opts.subtract_accidentals);
    res.fidelity = std::clamp(fidelity_pure(res.rho, target), 0.0, 1.0);
    const auto phys = is_physical(res.rho, 1e-9);
    res.physical = phys.physical;
    res.min_eigenvalue = phys.min_eigenvalue;
    res.fidelity_psd = std::clamp(fidelity_pure(project_psd(res.rho), target), 0.0, 1.0);
    if (opts.mc_trials >= 2) {
        const McResult mc = mc_uncertainty(records, target, opts.mc_trials, opts.seed, opts.subtract_accidentals);
        res.fidelity_std = mc.f_std;
        res.n_mc_trials = opts.mc_trials;
    }
    return res;
}

double fit_bell_phase(std::span<const DensityMatrix> rhos) {
    if (rhos.empty()) throw std::invalid_argument("fit_bell_phase: no states");
    cplx coherence = 0.0;
    for (const auto& r : rhos) {
        if (r.dim() != 4) throw DimensionError("fit_bell_phase: two-qubit states required");
        coherence += r(3, 0) / r.trace();
    }
    return std::arg(coherence);
}

LinearFit fidelity_vs_counts_fit(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3) throw std::invalid_argument("fidelity_vs_counts_fit: need at least 3 points");
    const double n = static_cast<double>(points.size());
    // Shift by the first point so constant data gives exactly zero deviations.
    const double x0 = points.front().first, y0 = points.front().second;
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : points) {
        mx += x - x0;
        my += y - y0;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : points) {
        const double dx = x - x0 - mx, dy = y - y0 - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    mx += x0;
    my += y0;
    if (!(sxx > 0.0)) throw std::invalid_argument("fidelity_vs_counts_fit: x has no variance");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.correlation = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
    return fit;
}

}  // namespace qlink
