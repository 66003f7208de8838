#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "qlink/chain.hpp"
#include "qlink/counting.hpp"

using namespace qlink;

namespace {

MeasurementSetting setting(AnalyzerSpec s, AnalyzerSpec i) { return {s, i, "", ""}; }

double trace_norm_sq(const CMatrix& m) { return (m * m).trace().real(); }

Acquisition plain(double rate, double seconds) {
    Acquisition a;
    a.pair_rate_hz = rate;
    a.duration_s = seconds;
    return a;
}

}  // namespace

TEST_CASE("analyzer projector examples") {
    const CMatrix hh = analyzer_projector(setting({}, {}));
    CHECK(hh.max_abs_diff(kron(states::H(), states::H()).projector()) < 1e-15);

    // The quarter-wave plate sits in front of the half-wave plate, so a lone
    // 22.5 degree HWP needs the QWP parked on the diagonal to analyze D.
    const CMatrix dd = analyzer_projector(setting({45, 22.5}, {45, 22.5}));
    CHECK(dd.max_abs_diff(kron(states::D(), states::D()).projector()) < 1e-14);
    const CMatrix rr = analyzer_projector(setting({0, 22.5}, {0, 22.5}));
    CHECK(rr.max_abs_diff(kron(states::R(), states::R()).projector()) < 1e-14);

    const CMatrix circ = analyzer_projector(AnalyzerSpec{45.0, 0.0});
    CHECK((circ * circ).max_abs_diff(circ) < 1e-14);
    CHECK(circ.trace().real() == doctest::Approx(1.0));
    CHECK(trace_norm_sq(circ) == doctest::Approx(1.0));
    const double pr = (circ * states::R().projector()).trace().real();
    const double pl = (circ * states::L().projector()).trace().real();
    CHECK(std::max(pr, pl) == doctest::Approx(1.0));
}

TEST_CASE("transmit and reflect ports complete each other") {
    for (double q : {0.0, 30.0, 45.0})
        for (double h : {0.0, 11.0, 22.5}) {
            const CMatrix sum = analyzer_projector(AnalyzerSpec{q, h, Port::Transmit}) +
                                analyzer_projector(AnalyzerSpec{q, h, Port::Reflect});
            CHECK(sum.max_abs_diff(CMatrix::identity(2)) < 1e-14);
        }
}

TEST_CASE("expected counts examples") {
    const DensityMatrix phi = DensityMatrix::from_pure(states::phi_plus());
    CHECK(expected_counts(phi, setting({}, {}), plain(1e3, 1.0)) == doctest::Approx(500.0));

    Acquisition acc = plain(1e3, 1.0);
    acc.singles_s_hz = 1e4;
    acc.singles_i_hz = 1e4;
    acc.window_s = 1e-9;
    const MeasurementSetting hv = setting({}, {0, 0, Port::Reflect});
    CHECK(expected_signal_counts(phi, hv, acc) == doctest::Approx(0.0));
    CHECK(expected_counts(phi, hv, acc) == doctest::Approx(0.1));

    Acquisition eff = plain(1e3, 1.0);
    eff.efficiencies.signal_reflect = 0.8;
    const double t = expected_counts(phi, setting({}, {}), eff);
    const double r = expected_counts(phi, setting({0, 0, Port::Reflect}, {0, 0, Port::Reflect}), eff);
    CHECK(r / t == doctest::Approx(0.8));
}

TEST_CASE("sample_counts") {
    CHECK(sample_counts(0.0, 1, 0) == 0);
    CHECK(sample_counts(123.4, 5, 6) == sample_counts(123.4, 5, 6));
    CHECK_THROWS(sample_counts(-1.0, 1, 0));
    CHECK_THROWS(sample_counts(std::numeric_limits<double>::infinity(), 1, 0));

    constexpr int n = 20000;
    const double mean = 1e4;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const auto c = static_cast<double>(sample_counts(mean, 77, static_cast<std::uint64_t>(i)));
        s += c;
        s2 += c * c;
    }
    const double m = s / n;
    const double sd = std::sqrt(s2 / n - m * m);
    CHECK(m == doctest::Approx(mean).epsilon(0.002));
    CHECK(sd == doctest::Approx(std::sqrt(mean)).epsilon(0.05));
}

TEST_CASE("histogram with 1:2:1 weights") {
    const LinkConfig cfg;
    const std::vector<double> w{1.0, 2.0, 1.0};
    const std::uint64_t n = 400000;
    const ArrivalHistogram h = histogram_arrivals(w, cfg, 20.0, n, 3);
    CHECK(h.total() == n);
    const double a0 = static_cast<double>(h.count_between(-12.5, 12.5));
    const double a1 = static_cast<double>(h.count_between(37.5, 62.5));
    const double a2 = static_cast<double>(h.count_between(87.5, 112.5));
    CHECK(a0 + a1 + a2 == doctest::Approx(static_cast<double>(n)));
    const double sigma = std::sqrt(n * 0.25 * 0.75);
    CHECK(std::abs(a0 - n * 0.25) < 5 * sigma);
    CHECK(std::abs(a1 - n * 0.5) < 5 * sigma);
    CHECK(std::abs(a2 - n * 0.25) < 5 * sigma);
    CHECK(interpeak_fraction(h, 50.0, 3) == 0.0);
}

TEST_CASE("zero jitter puts every event in three bins") {
    const std::vector<double> w{1.0, 2.0, 1.0};
    const ArrivalHistogram h = histogram_arrivals(w, LinkConfig{}, 0.0, 1000, 4);
    int nonzero = 0;
    for (auto b : h.bins) nonzero += b > 0;
    CHECK(nonzero == 3);
}

TEST_CASE("a single weight gives a single peak") {
    const std::vector<double> w{0.0, 1.0, 0.0};
    const ArrivalHistogram h = histogram_arrivals(w, LinkConfig{}, 20.0, 10000, 4);
    CHECK(h.count_between(37.5, 62.5) == 10000);
}

TEST_CASE("histogram geometry") {
    const std::vector<double> w{1.0};
    const ArrivalHistogram h = histogram_arrivals(w, LinkConfig{}, 10.0, 10, 1, 2.0);
    CHECK(h.origin_ns == -25.0);
    CHECK(h.bin_center_ns(0) == doctest::Approx(-24.999).epsilon(1e-14));
    CHECK(h.bins.size() == 25000);
    CHECK_THROWS(histogram_arrivals(std::vector<double>{}, LinkConfig{}, 10.0, 10, 1));
    CHECK_THROWS(histogram_arrivals(std::vector<double>{0.0, 0.0}, LinkConfig{}, 10.0, 10, 1));
}

TEST_CASE("inter-peak occupancy bounds") {
    LinkConfig cfg;
    const double j = combined_jitter_ps(20.0, cfg);
    CHECK(j == doctest::Approx(std::hypot(20.0, 12.3)));
    CHECK(expected_interpeak_fraction(j, 50.0) < 1e-15);
    CHECK(expected_interpeak_fraction(99.0, 50.0) < 1e-15);
    CHECK(expected_interpeak_fraction(0.0, 50.0) == 0.0);
}

TEST_CASE("conditional bin probabilities") {
    const ArrivalHistogram h = histogram_arrivals(std::vector<double>{1.0, 0.0}, LinkConfig{}, 20.0, 5000, 1);
    const ArrivalHistogram v = histogram_arrivals(std::vector<double>{0.0, 1.0}, LinkConfig{}, 20.0, 5000, 2);
    const auto [pe, pl] = conditional_bin_probs(h, v, 50.0);
    CHECK(pe == 1.0);
    CHECK(pl == 1.0);

    // Fully mixed routing.
    const ArrivalHistogram m = histogram_arrivals(std::vector<double>{0.5, 0.5}, LinkConfig{}, 20.0, 200000, 3);
    const auto [me, ml] = conditional_bin_probs(m, m, 50.0);
    CHECK(me == doctest::Approx(0.5).epsilon(0.01));
    CHECK(ml == doctest::Approx(0.5).epsilon(0.01));

    CHECK_THROWS(conditional_bin_probs(ArrivalHistogram{}, v, 50.0));
}

TEST_CASE("accidental subtraction") {
    CountRecord rec;
    rec.counts = 100;
    rec.duration_s = 1.0;
    CHECK(subtract_accidentals(rec) == 100.0);
    rec.singles_s_hz = 1e5;
    rec.singles_i_hz = 1e5;
    rec.window_ns = 1.0;
    CHECK(accidentals(rec) == doctest::Approx(10.0));
    CHECK(subtract_accidentals(rec) == doctest::Approx(90.0));
    rec.counts = 5;
    CHECK(subtract_accidentals(rec) == 0.0);
}
