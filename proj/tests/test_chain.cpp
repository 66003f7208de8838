#include <doctest.h>

#include <cmath>
#include <limits>

#include "qlink/chain.hpp"

using namespace qlink;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

DensityMatrix input_state(const PureState& s, const PureState& i) { return DensityMatrix::from_pure(kron(s, i)); }

double late_fraction(const DensityMatrix& mid) {
    const auto w = bin_weights(mid);
    const double late = w[0][1] + w[1][1];
    return late / (late + w[0][0] + w[1][0]);
}

LinkConfig extinction_only(double split_db, double cleanup_db = kInf, double combine_db = kInf) {
    LinkConfig c = LinkConfig::ideal();
    c.fpbs_extinction_db = {split_db, cleanup_db, combine_db};
    return c;
}

}  // namespace

TEST_CASE("ideal chain with identity paddles returns the Bell state") {
    const LinkConfig cfg = LinkConfig::ideal();
    const SourceSpec src{};
    const EndToEnd e = end_to_end(bell_source(src), cfg, {}, {});
    CHECK(fidelity_pure(e.rho, states::phi_plus(nominal_end_phase(src, cfg))) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.success_probability == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(e.rate_factor == doctest::Approx(0.25 * std::pow(10.0, -1.9)).epsilon(1e-12));
    const auto& w = e.channel.peak_weights;
    CHECK(w[1] == doctest::Approx(2.0 * w[0]).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(w[0]).epsilon(1e-12));
}

TEST_CASE("set-point phases move the end-state phase") {
    LinkConfig cfg = LinkConfig::ideal();
    cfg.amzi_phase_deg = {30.0, 10.0};
    const SourceSpec src{1.0, deg2rad(15.0), 0.5};
    const EndToEnd e = end_to_end(bell_source(src), cfg, {}, {0.2, 0.05});
    const double phase = nominal_end_phase(src, cfg) + 0.2 - 0.05;
    CHECK(fidelity_pure(e.rho, states::phi_plus(phase)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ideal pol to time-bin routes H to early and V to late") {
    const LinkConfig cfg = LinkConfig::ideal();
    const DensityMatrix h = pol_to_timebin(input_state(states::H(), states::H()), cfg, 0.0);
    CHECK(h.trace() == doctest::Approx(0.5));
    CHECK(std::abs(h(mid_index(0, 0, 0), mid_index(0, 0, 0)).real() - 0.5) < 1e-15);
    const DensityMatrix v = pol_to_timebin(input_state(states::H(), states::V()), cfg, 0.0);
    CHECK(std::abs(v(mid_index(0, 0, 1), mid_index(0, 0, 1)).real() - 0.5) < 1e-15);
}

TEST_CASE("20 dB splitter extinction puts 1% of H into the late bin") {
    const DensityMatrix mid = pol_to_timebin(input_state(states::H(), states::H()), extinction_only(20.0), 0.0);
    CHECK(std::abs(late_fraction(mid) - 0.01) < 1e-6);
}

TEST_CASE("pathological splitter extinction gives even routing") {
    const DensityMatrix mid = pol_to_timebin(input_state(states::H(), states::H()), extinction_only(3.0103), 0.0);
    CHECK(late_fraction(mid) == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("correct-bin probabilities approach one as imperfections vanish") {
    double previous = 0.0;
    for (double db : {10.0, 20.0, 30.0, 80.0}) {
        const DensityMatrix mid = pol_to_timebin(input_state(states::H(), states::H()), extinction_only(db), 0.0);
        const double correct = 1.0 - late_fraction(mid);
        CHECK(correct > previous);
        previous = correct;
    }
    CHECK(previous > 1.0 - 1e-6);
}

TEST_CASE("transport with identity paddles leaves the state unchanged") {
    const DensityMatrix mid = pol_to_timebin(bell_source({}), LinkConfig{}, 0.1);
    CHECK(transport(mid, {}).matrix().max_abs_diff(mid.matrix()) < 1e-12);
    const DensityMatrix moved = transport(mid, {12.0, 77.0, 140.0});
    CHECK(moved.trace() == doctest::Approx(mid.trace()).epsilon(1e-12));
}

TEST_CASE("paddles that flip the reference polarization null the cleanup") {
    const LinkConfig cfg = LinkConfig::ideal();
    const DensityMatrix mid = transport(pol_to_timebin(bell_source({}), cfg, 0.0), {0.0, 45.0, 0.0});
    const ChannelOutput out = timebin_to_pol(mid, cfg, 0.0);
    CHECK(out.survival_probability < 1e-15);
    CHECK_THROWS_AS(postselect_middle(out), std::domain_error);
}

TEST_CASE("survival follows Malus law through the cleanup") {
    const LinkConfig cfg = LinkConfig::ideal();
    const DensityMatrix mid = pol_to_timebin(bell_source({}), cfg, 0.0);
    for (double h : {0.0, 10.0, 22.5, 30.0}) {
        const ChannelOutput out = timebin_to_pol(transport(mid, {0.0, h, 0.0}), cfg, 0.0);
        const double c = std::cos(deg2rad(2 * h));
        CHECK(out.survival_probability == doctest::Approx(0.5 * c * c).epsilon(1e-12));
    }
}

TEST_CASE("trace never increases along the chain") {
    const LinkConfig cfg;
    const DensityMatrix in = bell_source({0.98, 0.0, 0.5});
    const DensityMatrix mid = pol_to_timebin(in, cfg, 0.01);
    CHECK(mid.trace() <= in.trace() + 1e-12);
    const DensityMatrix strained = transport(mid, {5.0, 33.0, 22.0});
    CHECK(strained.trace() <= mid.trace() + 1e-12);
    const ChannelOutput out = timebin_to_pol(strained, cfg, -0.02);
    CHECK(out.survival_probability <= strained.trace() + 1e-12);
}

TEST_CASE("ideal chain fidelity is independent of the paddles") {
    const LinkConfig cfg = LinkConfig::ideal();
    for (double h = 0.0; h < 180.0; h += 13.0) {
        const PaddleAngles p{0.0, h, 22.0};
        const ChannelOutput probe = timebin_to_pol(transport(pol_to_timebin(bell_source({}), cfg, 0.0), p), cfg, 0.0);
        if (probe.peak_weights[1] < 1e-12) continue;
        const EndToEnd e = end_to_end(bell_source({}), cfg, p, {});
        CHECK(fidelity_pure(e.rho, states::phi_plus()) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("temporal mismatch decoheres the middle peak") {
    LinkConfig cfg = LinkConfig::ideal();
    cfg.temporal_mismatch_ps = kInf;
    const EndToEnd e = end_to_end(bell_source({}), cfg, {}, {});
    CHECK(fidelity_pure(e.rho, states::phi_plus()) == doctest::Approx(0.5).epsilon(1e-12));
    cfg.temporal_mismatch_ps = 12.3;
    cfg.wavepacket_sigma_ps = 12.3;
    const double g = std::exp(-0.5);
    CHECK(cfg.overlap_factor() == doctest::Approx(g));
    const EndToEnd partial = end_to_end(bell_source({}), cfg, {}, {});
    CHECK(fidelity_pure(partial.rho, states::phi_plus()) == doctest::Approx(0.5 * (1.0 + g)).epsilon(1e-12));
}

TEST_CASE("middle peak carries the early and late peaks combined") {
    const LinkConfig cfg;
    for (double h : {0.0, 17.0, 40.0}) {
        const ChannelOutput out = timebin_to_pol(transport(pol_to_timebin(bell_source({}), cfg, 0.0), {0, h, 0}), cfg, 0.0);
        const auto& w = out.peak_weights;
        CHECK(w[1] == doctest::Approx(w[0] + w[2]).epsilon(1e-9));
    }
}

TEST_CASE("polarization baseline") {
    const DensityMatrix bell = bell_source({});
    CHECK(fidelity_pure(pol_only_baseline(bell, {}).rho, states::phi_plus()) == doctest::Approx(1.0));
    CHECK(fidelity_pure(pol_only_baseline(bell, {0.0, 45.0, 0.0}).rho, states::phi_plus()) == doctest::Approx(0.0));
    CHECK(pol_only_baseline(bell, {10, 20, 30}).rate_factor == 1.0);
}

TEST_CASE("Bell source") {
    CHECK(fidelity_pure(bell_source({0.9947, 0.0, 0.5}), states::phi_plus()) ==
          doctest::Approx((1.0 + 3.0 * 0.9947) / 4.0));
    CHECK(fidelity_pure(bell_source({1.0, 0.7, 0.5}), states::phi_plus(0.7)) == doctest::Approx(1.0));
    CHECK_THROWS(bell_source({1.2, 0.0, 0.5}));
}

TEST_CASE("link validation") {
    LinkConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.delay_length_m = 20.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = LinkConfig{};
    cfg.fbs_imbalance = 0.7;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK(fiber_delay_ns(10.2) == doctest::Approx(49.95).epsilon(1e-3));
}

TEST_CASE("chain stages check dimensions") {
    CHECK_THROWS_AS(transport(bell_source({}), {}), DimensionError);
    CHECK_THROWS_AS(pol_to_timebin(DensityMatrix::maximally_mixed(8), LinkConfig{}, 0.0), DimensionError);
}
