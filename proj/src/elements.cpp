#include "qlink/elements.hpp"

#include <cmath>
#include <stdexcept>

namespace qlink {

TransferMap::TransferMap(CMatrix matrix, std::string label) : m_(std::move(matrix)), label_(std::move(label)) {
    if (m_.rows() == 0 || m_.cols() == 0) throw DimensionError("TransferMap: empty matrix");
    if (!m_.is_finite()) throw DimensionError("TransferMap '" + label_ + "': non-finite entry");
    if (max_singular_value() > 1.0 + 1e-9) {
        throw DimensionError("TransferMap '" + label_ + "': singular value exceeds 1 (gain)");
    }
}

double TransferMap::max_singular_value() const {
    const auto eig = eigh(m_.adjoint() * m_);
    return std::sqrt(std::max(eig.values.back(), 0.0));
}

bool TransferMap::is_unitary(double tol) const {
    if (!m_.is_square()) return false;
    return (m_.adjoint() * m_).max_abs_diff(CMatrix::identity(m_.cols())) <= tol;
}

TransferMap TransferMap::after(const TransferMap& first) const {
    return TransferMap(m_ * first.m_, label_ + "*" + first.label_);
}

double ExtinctionSpec::leakage() const {
    if (std::isnan(extinction_db) || extinction_db < 0.0) {
        throw std::invalid_argument("ExtinctionSpec: extinction_db must be >= 0");
    }
    if (std::isinf(extinction_db)) return 0.0;
    return std::pow(10.0, -extinction_db / 10.0);
}

double ExtinctionSpec::leakage_amplitude() const { return std::sqrt(leakage()); }

TransferMap rotation(double theta_deg) {
    const double t = deg2rad(theta_deg);
    const double c = std::cos(t), s = std::sin(t);
    return TransferMap({{c, -s}, {s, c}}, "rot");
}

TransferMap hwp(double theta_deg) {
    const double t = 2.0 * deg2rad(theta_deg);
    const double c = std::cos(t), s = std::sin(t);
    return TransferMap({{c, s}, {s, -c}}, "hwp");
}

TransferMap qwp(double theta_deg) {
    const double t = deg2rad(theta_deg);
    const double c = std::cos(t), s = std::sin(t);
    const cplx mi{0.0, -1.0};
    // R(t) diag(1, -i) R(-t), expanded.
    return TransferMap({{c * c + mi * s * s, c * s * (1.0 - mi)},
                        {c * s * (1.0 - mi), s * s + mi * c * c}},
                       "qwp");
}

TransferMap pbs(const ExtinctionSpec& ext) {
    const double leak = ext.leakage_amplitude();
    const double pass = std::sqrt(1.0 - ext.leakage());
    CMatrix m(4, 2);
    m(0, 0) = pass;  // H -> port A
    m(2, 0) = leak;  // H leaks to port B
    m(3, 1) = pass;  // V -> port B
    m(1, 1) = leak;  // V leaks to port A
    return TransferMap(std::move(m), "pbs");
}

TransferMap pbs_two_port(const ExtinctionSpec& ext) {
    const double leak = ext.leakage_amplitude();
    const double pass = std::sqrt(1.0 - ext.leakage());
    CMatrix m(4, 4);
    // input port 1
    m(0, 0) = pass;
    m(2, 0) = leak;
    m(3, 1) = pass;
    m(1, 1) = leak;
    // input port 2; the sign keeps the map unitary
    m(2, 2) = pass;
    m(0, 2) = -leak;
    m(1, 3) = pass;
    m(3, 3) = -leak;
    return TransferMap(std::move(m), "pbs2");
}

TransferMap beamsplitter(double imbalance) {
    if (!(imbalance >= 0.0 && imbalance <= 0.5)) {
        throw std::invalid_argument("beamsplitter: imbalance must lie in [0, 0.5]");
    }
    const double t = std::sqrt(0.5 + imbalance);
    const double r = std::sqrt(0.5 - imbalance);
    const cplx ir{0.0, r};
    return TransferMap({{t, ir}, {ir, t}}, "bs");
}

TransferMap bs_5050() { return beamsplitter(0.0); }

TransferMap attenuator(double loss_db) {
    if (!(loss_db >= 0.0)) throw std::invalid_argument("attenuator: loss_db must be >= 0");
    return TransferMap({{std::pow(10.0, -loss_db / 20.0)}}, "att");
}

TransferMap paddle_unitary(const PaddleAngles& angles) {
    return qwp(angles.q2_deg).after(hwp(angles.h_deg)).after(qwp(angles.q1_deg));
}

TransferMap phase_shift(double phi_rad, std::size_t on_mode, std::size_t dim) {
    if (on_mode >= dim) throw DimensionError("phase_shift: mode index out of range");
    if (!std::isfinite(phi_rad)) throw std::invalid_argument("phase_shift: non-finite phase");
    CMatrix m = CMatrix::identity(dim);
    m(on_mode, on_mode) = std::polar(1.0, phi_rad);
    return TransferMap(std::move(m), "phase");
}

}  // namespace qlink
