#include "qlink/chain.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qlink {

namespace {

constexpr double kGroupIndex = 1.468;
constexpr double kSpeedOfLight = 299792458.0;

// Rows [port*2, port*2+2) of a multi-port map, restricted to the columns of one input port.
CMatrix port_block(const CMatrix& m, std::size_t out_port, std::size_t in_port) {
    CMatrix b(2, 2);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 2; ++c) b(r, c) = m(out_port * 2 + r, in_port * 2 + c);
    return b;
}

CMatrix lift_idler(const CMatrix& idler_map) { return kron(CMatrix::identity(2), idler_map); }

void require_dim(const DensityMatrix& rho, std::size_t dim, const char* where) {
    if (rho.dim() != dim) {
        throw DimensionError(std::string(where) + ": expected dimension " + std::to_string(dim) + ", got " +
                             std::to_string(rho.dim()));
    }
}

}  // namespace

LinkConfig LinkConfig::ideal() {
    LinkConfig c;
    const double inf = std::numeric_limits<double>::infinity();
    c.fpbs_extinction_db = {inf, inf, inf};
    c.fbs_imbalance = 0.0;
    c.pdl_imbalance_db = 0.0;
    c.phase_sigma_deg = {0.0, 0.0};
    c.temporal_mismatch_ps = 0.0;
    return c;
}

void LinkConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("LinkConfig: " + what); };
    if (!(timebin_separation_ns > 0.0) || !std::isfinite(timebin_separation_ns)) fail("timebin_separation_ns must be > 0");
    if (!(delay_length_m > 0.0) || !std::isfinite(delay_length_m)) fail("delay_length_m must be > 0");
    if (std::abs(fiber_delay_ns(delay_length_m) - timebin_separation_ns) > 0.02 * timebin_separation_ns) {
        fail("delay_length_m inconsistent with timebin_separation_ns (>2% apart)");
    }
    for (double e : fpbs_extinction_db)
        if (std::isnan(e) || e < 0.0) fail("fpbs_extinction_db must be >= 0");
    if (!(fbs_imbalance >= 0.0 && fbs_imbalance <= 0.5)) fail("fbs_imbalance must lie in [0, 0.5]");
    if (!(pdl_imbalance_db >= 0.0) || !std::isfinite(pdl_imbalance_db)) fail("pdl_imbalance_db must be >= 0");
    for (double s : phase_sigma_deg)
        if (!(s >= 0.0) || !std::isfinite(s)) fail("phase_sigma_deg must be >= 0");
    for (double p : amzi_phase_deg)
        if (!std::isfinite(p)) fail("amzi_phase_deg must be finite");
    if (std::isnan(temporal_mismatch_ps) || temporal_mismatch_ps < 0.0) fail("temporal_mismatch_ps must be >= 0");
    if (!(wavepacket_sigma_ps > 0.0) || !std::isfinite(wavepacket_sigma_ps)) fail("wavepacket_sigma_ps must be > 0");
    for (double l : module_insertion_loss_db)
        if (!(l >= 0.0) || !std::isfinite(l)) fail("module_insertion_loss_db must be >= 0");
}

double LinkConfig::overlap_factor() const {
    if (std::isinf(temporal_mismatch_ps)) return 0.0;
    const double x = temporal_mismatch_ps / wavepacket_sigma_ps;
    return std::exp(-0.5 * x * x);
}

double fiber_delay_ns(double length_m) { return length_m * kGroupIndex / kSpeedOfLight * 1e9; }

DensityMatrix bell_source(const SourceSpec& spec) {
    if (!(spec.visibility >= 0.0 && spec.visibility <= 1.0)) throw std::invalid_argument("bell_source: visibility outside [0,1]");
    if (!(spec.balance >= 0.0 && spec.balance <= 1.0)) throw std::invalid_argument("bell_source: balance outside [0,1]");

    // Spiral 2 emits |HH>; spiral 3 emits |HH> which the QHQ controllers turn
    // into |VV> ahead of the combining PBS. One pair, in superposition.
    const CMatrix hh = CMatrix::column(kron(states::H(), states::H()).amplitudes());
    const CMatrix rot = kron(hwp(45.0).matrix(), hwp(45.0).matrix());
    const CMatrix from2 = hh * cplx{std::sqrt(spec.balance), 0.0};
    const CMatrix from3 = rot * hh * std::polar(std::sqrt(1.0 - spec.balance), spec.phase_rad);
    const CMatrix psi = from2 + from3;

    CMatrix rho = psi * psi.adjoint() * cplx{spec.visibility, 0.0};
    rho += CMatrix::identity(4) * cplx{(1.0 - spec.visibility) / 4.0, 0.0};
    return DensityMatrix(std::move(rho));
}

CMatrix ChannelOutput::peak_block(Peak k) const {
    CMatrix b(4, 4);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t p = 0; p < 2; ++p)
            for (std::size_t s2 = 0; s2 < 2; ++s2)
                for (std::size_t p2 = 0; p2 < 2; ++p2)
                    b(s * 2 + p, s2 * 2 + p2) = joint_state(out_index(s, p, k), out_index(s2, p2, k));
    return b;
}

CMatrix pol_to_timebin_idler_map(const LinkConfig& cfg, double phase_draw_rad) {
    const CMatrix split = pbs(ExtinctionSpec{cfg.fpbs_extinction_db[0]}).matrix();
    const CMatrix combiner = beamsplitter(cfg.fbs_imbalance).matrix();

    // Short arm: VOA residual; its polarization controller is the identity.
    const CMatrix short_arm = attenuator(cfg.pdl_imbalance_db).matrix()(0, 0) * port_block(split, 0, 0);
    // Long arm: controller rotates V onto the common H reference, then the
    // delay line and the interferometer phase.
    const double phi = deg2rad(cfg.amzi_phase_deg[0]) + phase_draw_rad;
    const CMatrix long_arm = std::polar(1.0, phi) * (hwp(45.0).matrix() * port_block(split, 1, 0));

    // Only one FBS output port feeds the transport fiber.
    const CMatrix early = combiner(0, 0) * short_arm;
    const CMatrix late = combiner(0, 1) * long_arm;

    CMatrix k(4, 2);
    for (std::size_t p = 0; p < 2; ++p) {
        for (std::size_t in = 0; in < 2; ++in) {
            k(p * 2 + 0, in) = early(p, in);
            k(p * 2 + 1, in) = late(p, in);
        }
    }
    return k;
}

std::array<CMatrix, 4> timebin_to_pol_idler_maps(const LinkConfig& cfg, double phase_draw_rad) {
    const CMatrix cleanup = port_block(pbs(ExtinctionSpec{cfg.fpbs_extinction_db[1]}).matrix(), 0, 0);
    const CMatrix splitter = beamsplitter(cfg.fbs_imbalance).matrix();
    const CMatrix combine = pbs_two_port(ExtinctionSpec{cfg.fpbs_extinction_db[2]}).matrix();

    // Long arm enters combiner port 1 as H (transmitted); short arm is
    // rotated to V and enters port 2 (reflected into the same output).
    const double phi = deg2rad(cfg.amzi_phase_deg[1]) + phase_draw_rad;
    const CMatrix short_path = splitter(0, 0) * (port_block(combine, 0, 1) * hwp(45.0).matrix() * cleanup);
    const CMatrix long_path = (splitter(1, 0) * std::polar(1.0, phi)) * (port_block(combine, 0, 0) * cleanup);

    // Restrict a 2x2 polarization map to one input time bin of the 4-dim idler space.
    auto on_bin = [](const CMatrix& path, std::size_t bin) {
        CMatrix m(2, 4);
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t p = 0; p < 2; ++p) m(r, p * 2 + bin) = path(r, p);
        return m;
    };
    return {on_bin(short_path, 0), on_bin(long_path, 0), on_bin(short_path, 1), on_bin(long_path, 1)};
}

DensityMatrix pol_to_timebin(const DensityMatrix& input, const LinkConfig& cfg, double phase_draw_rad) {
    require_dim(input, kInputDim, "pol_to_timebin");
    const CMatrix k = lift_idler(pol_to_timebin_idler_map(cfg, phase_draw_rad));
    return DensityMatrix(conjugate(k, input.matrix()));
}

DensityMatrix transport(const DensityMatrix& state, const PaddleAngles& paddles) {
    require_dim(state, kMidLinkDim, "transport");
    // Both time bins see the same unitary.
    const CMatrix u = kron(CMatrix::identity(2), kron(paddle_unitary(paddles).matrix(), CMatrix::identity(2)));
    return DensityMatrix(conjugate(u, state.matrix()));
}

ChannelOutput timebin_to_pol(const DensityMatrix& state, const LinkConfig& cfg, double phase_draw_rad) {
    require_dim(state, kMidLinkDim, "timebin_to_pol");
    const auto maps = timebin_to_pol_idler_maps(cfg, phase_draw_rad);
    const CMatrix ee = lift_idler(maps[0]);
    const CMatrix el = lift_idler(maps[1]);
    const CMatrix le = lift_idler(maps[2]);
    const CMatrix ll = lift_idler(maps[3]);
    const CMatrix& rho = state.matrix();

    const CMatrix block_ee = conjugate(ee, rho);
    const CMatrix block_ll = conjugate(ll, rho);
    // EL and LE share the middle arrival slot; their cross terms are weighted
    // by the wavepacket overlap.
    const CMatrix cross = el * rho * le.adjoint();
    const cplx gamma{cfg.overlap_factor(), 0.0};
    const CMatrix block_mid = conjugate(el, rho) + conjugate(le, rho) + gamma * (cross + cross.adjoint());

    CMatrix joint(kOutputDim, kOutputDim);
    const std::array<const CMatrix*, 3> blocks{&block_ee, &block_mid, &block_ll};
    std::array<double, 3> weights{};
    for (std::size_t k = 0; k < 3; ++k) {
        const CMatrix& b = *blocks[k];
        weights[k] = b.trace().real();
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 4; ++c)
                joint(out_index(r / 2, r % 2, static_cast<Peak>(k)), out_index(c / 2, c % 2, static_cast<Peak>(k))) = b(r, c);
    }
    ChannelOutput out{DensityMatrix(std::move(joint)), 0.0, weights};
    out.survival_probability = weights[0] + weights[1] + weights[2];
    return out;
}

PostSelected postselect_middle(const ChannelOutput& out) {
    const double w = out.peak_weights[static_cast<std::size_t>(Peak::MID)];
    if (!(w > 1e-24)) throw std::domain_error("postselect_middle: middle peak is empty");
    return {DensityMatrix(out.peak_block(Peak::MID) * cplx{1.0 / w, 0.0}), w};
}

EndToEnd end_to_end(const DensityMatrix& bell, const LinkConfig& cfg, const PaddleAngles& paddles,
                    const PhaseDraws& draws) {
    const DensityMatrix converted = pol_to_timebin(bell, cfg, draws.amzi1_rad);
    const DensityMatrix strained = transport(converted, paddles);
    ChannelOutput channel = timebin_to_pol(strained, cfg, draws.amzi2_rad);
    PostSelected mid = postselect_middle(channel);
    const double insertion =
        std::pow(10.0, -(cfg.module_insertion_loss_db[0] + cfg.module_insertion_loss_db[1]) / 10.0);
    return {std::move(mid.state), mid.success_probability * insertion, mid.success_probability, std::move(channel)};
}

Baseline pol_only_baseline(const DensityMatrix& bell, const PaddleAngles& paddles) {
    require_dim(bell, kInputDim, "pol_only_baseline");
    const CMatrix u = kron(CMatrix::identity(2), paddle_unitary(paddles).matrix());
    return {DensityMatrix(conjugate(u, bell.matrix())), 1.0};
}

std::array<std::array<double, 2>, 2> bin_weights(const DensityMatrix& mid_link) {
    require_dim(mid_link, kMidLinkDim, "bin_weights");
    std::array<std::array<double, 2>, 2> w{};
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t p = 0; p < 2; ++p) w[s][b] += mid_link(mid_index(s, p, b), mid_index(s, p, b)).real();
    return w;
}

double nominal_end_phase(const SourceSpec& source, const LinkConfig& cfg) {
    return source.phase_rad + deg2rad(cfg.amzi_phase_deg[0]) - deg2rad(cfg.amzi_phase_deg[1]);
}

}  // namespace qlink
