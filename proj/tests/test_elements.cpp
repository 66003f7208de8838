#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qlink/elements.hpp"

using namespace qlink;

namespace {

CMatrix apply(const TransferMap& m, const PureState& s) { return m.matrix() * CMatrix::column(s.amplitudes()); }

// |<a|b>|^2 for column vectors.
double overlap(const CMatrix& a, const PureState& b) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < b.dim(); ++i) s += std::conj(b[i]) * a(i, 0);
    return std::norm(s);
}

double power(const CMatrix& v, std::size_t i) { return std::norm(v(i, 0)); }

}  // namespace

TEST_CASE("half-wave plate examples") {
    const CMatrix h0 = apply(hwp(0.0), states::H());
    CHECK(std::abs(h0(0, 0) - cplx(1.0)) < 1e-15);
    const CMatrix v0 = apply(hwp(0.0), states::V());
    CHECK(std::abs(v0(1, 0) - cplx(-1.0)) < 1e-15);
    CHECK(overlap(apply(hwp(22.5), states::H()), states::D()) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(overlap(apply(hwp(45.0), states::H()), states::V()) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("quarter-wave plate examples") {
    CHECK(overlap(apply(qwp(0.0), states::H()), states::H()) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(overlap(apply(qwp(45.0), states::H()), states::R()) == doctest::Approx(1.0).epsilon(1e-14));
    for (double t : {0.0, 17.0, 45.0, 101.3}) {
        CHECK((qwp(t).matrix() * qwp(t).matrix()).max_abs_diff(hwp(t).matrix()) < 1e-14);
        CHECK(qwp(t).is_unitary());
        CHECK(hwp(t).is_unitary());
    }
}

TEST_CASE("ideal PBS routes H to port A and V to port B") {
    const TransferMap p = pbs(ExtinctionSpec{});
    CHECK(p.out_dim() == 4);
    const CMatrix h = apply(p, states::H());
    CHECK(power(h, 0) == doctest::Approx(1.0));
    CHECK(power(h, 2) + power(h, 3) == doctest::Approx(0.0));
    const CMatrix v = apply(p, states::V());
    CHECK(power(v, 3) == doctest::Approx(1.0));
}

TEST_CASE("finite extinction leaks into the wrong port") {
    const TransferMap p = pbs(ExtinctionSpec{20.0});
    const CMatrix h = apply(p, states::H());
    CHECK(power(h, 2) + power(h, 3) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(power(h, 0) + power(h, 1) == doctest::Approx(0.99).epsilon(1e-12));
    CHECK(ExtinctionSpec{13.8}.leakage() == doctest::Approx(std::pow(10.0, -1.38)));
    CHECK(1.0 - ExtinctionSpec{13.8}.leakage() == doctest::Approx(0.958).epsilon(1e-3));
    CHECK(ExtinctionSpec{}.leakage() == 0.0);
    CHECK(pbs_two_port(ExtinctionSpec{20.0}).is_unitary(1e-12));
    CHECK(pbs_two_port(ExtinctionSpec{}).is_unitary(1e-12));
}

TEST_CASE("two-port PBS combines V on port 2 into port A") {
    const TransferMap p = pbs_two_port(ExtinctionSpec{});
    CMatrix in(4, 1);
    in(3, 0) = 1.0;  // port 2, V
    const CMatrix out = p.matrix() * in;
    CHECK(power(out, 1) == doctest::Approx(1.0));
}

TEST_CASE("50:50 beamsplitter splits evenly and is unitary") {
    const TransferMap b = bs_5050();
    CHECK(b.is_unitary());
    CMatrix in(2, 1);
    in(0, 0) = 1.0;
    const CMatrix out = b.matrix() * in;
    CHECK(power(out, 0) == doctest::Approx(0.5));
    CHECK(power(out, 1) == doctest::Approx(0.5));
    CHECK(beamsplitter(0.1).is_unitary());
    CHECK(power(beamsplitter(0.1).matrix() * in, 0) == doctest::Approx(0.6));
    CHECK_THROWS(beamsplitter(0.6));
}

TEST_CASE("balanced Mach-Zehnder with zero phase sends all light to one port") {
    const TransferMap mz = bs_5050().after(bs_5050());
    CMatrix in(2, 1);
    in(0, 0) = 1.0;
    const CMatrix out = mz.matrix() * in;
    CHECK(power(out, 0) + power(out, 1) == doctest::Approx(1.0));
    CHECK(std::min(power(out, 0), power(out, 1)) < 1e-15);
}

TEST_CASE("attenuator values") {
    CHECK(std::abs(attenuator(0.0).matrix()(0, 0)) == doctest::Approx(1.0));
    CHECK(std::norm(attenuator(3.0103).matrix()(0, 0)) == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(std::norm(attenuator(12.0).matrix()(0, 0)) == doctest::Approx(0.0631).epsilon(1e-3));
    CHECK_THROWS(attenuator(-1.0));
}

TEST_CASE("transfer maps reject gain") {
    CHECK_THROWS(TransferMap(CMatrix{{1.1}}, "gain"));
    CHECK_NOTHROW(TransferMap(CMatrix{{0.5}}, "loss"));
}

TEST_CASE("paddle unitary examples") {
    const CMatrix h = apply(paddle_unitary({0.0, 0.0, 0.0}), states::H());
    CHECK(overlap(h, states::H()) == doctest::Approx(1.0));
    CHECK(overlap(apply(paddle_unitary({0.0, 45.0, 0.0}), states::H()), states::V()) == doctest::Approx(1.0));
    CHECK(overlap(apply(paddle_unitary({0.0, 45.0, 0.0}), states::V()), states::H()) == doctest::Approx(1.0));
    for (double q1 = 0; q1 < 180; q1 += 37)
        for (double hh = 0; hh < 180; hh += 29)
            for (double q2 = 0; q2 < 180; q2 += 41) CHECK(paddle_unitary({q1, hh, q2}).is_unitary(1e-12));
}

TEST_CASE("paddles cover the polarization sphere") {
    // Images of |H> over a grid of the three angles fill >= 90% of equal-area
    // cells on the Poincare sphere.
    constexpr int kBands = 12;
    constexpr int kSectors = 24;
    std::vector<bool> hit(kBands * kSectors, false);
    for (double q1 = 0; q1 < 180; q1 += 10)
        for (double hh = 0; hh < 180; hh += 5)
            for (double q2 = 0; q2 < 180; q2 += 5) {
                const CMatrix v = apply(paddle_unitary({q1, hh, q2}), states::H());
                const cplx a = v(0, 0);
                const cplx b = v(1, 0);
                const double s1 = std::norm(a) - std::norm(b);
                const double s2 = 2.0 * std::real(std::conj(a) * b);
                const double s3 = 2.0 * std::imag(std::conj(a) * b);
                const int band = std::min(kBands - 1, static_cast<int>((s3 + 1.0) / 2.0 * kBands));
                double az = std::atan2(s2, s1);
                if (az < 0) az += 2 * kPi;
                const int sector = std::min(kSectors - 1, static_cast<int>(az / (2 * kPi) * kSectors));
                hit[band * kSectors + sector] = true;
            }
    const double covered = static_cast<double>(std::count(hit.begin(), hit.end(), true)) / hit.size();
    CHECK(covered >= 0.9);
}

TEST_CASE("phase shift") {
    CHECK(phase_shift(0.0, 1).matrix().max_abs_diff(CMatrix::identity(2)) == 0.0);
    const CMatrix out = phase_shift(kPi, 1).matrix() * CMatrix::column(states::D().amplitudes());
    CHECK(overlap(out, states::A()) == doctest::Approx(1.0));
    CHECK_THROWS(phase_shift(0.1, 2, 2));
}

TEST_CASE("rotation composes additively") {
    CHECK(rotation(20.0).after(rotation(15.0)).matrix().max_abs_diff(rotation(35.0).matrix()) < 1e-14);
}
