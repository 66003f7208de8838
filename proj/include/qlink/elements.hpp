#pragma once

// Jones-calculus transfer maps for the passive fiber components of the link.
//
// Conventions, pinned project-wide:
//   * polarization basis order is (H, V); angles are the fast axis from
//     horizontal, in degrees.
//   * hwp(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]
//     qwp(t) = R(t) diag(1, -i) R(-t), so qwp(45)|H> ~ (|H> + i|V>)/sqrt(2)
//     and qwp(t)^2 == hwp(t) exactly.
//   * beamsplitters use the symmetric convention [[t, i r], [i r, t]].
//   * a polarizing beamsplitter leaks amplitude sqrt(eps) coherently into the
//     wrong port, eps = 10^(-extinction_db/10).
//   * multi-port maps index modes as port * 2 + polarization.

#include <cstddef>
#include <limits>
#include <string>

#include "qlink/qmath.hpp"

namespace qlink {

// Passive linear map from in_dim modes to out_dim modes (matrix is
// out_dim x in_dim). Construction rejects gain: every singular value must be
// <= 1 + 1e-9.
class TransferMap {
  public:
    TransferMap(CMatrix matrix, std::string label);

    std::size_t in_dim() const { return m_.cols(); }
    std::size_t out_dim() const { return m_.rows(); }
    const CMatrix& matrix() const { return m_; }
    const std::string& label() const { return label_; }

    double max_singular_value() const;
    bool is_unitary(double tol = 1e-12) const;

    // Composition: (this after first).
    TransferMap after(const TransferMap& first) const;

  private:
    CMatrix m_;
    std::string label_;
};

struct ExtinctionSpec {
    double extinction_db = std::numeric_limits<double>::infinity();

    // Power fraction routed to the wrong port.
    double leakage() const;
    double leakage_amplitude() const;
};

struct PaddleAngles {
    double q1_deg = 0.0;
    double h_deg = 0.0;
    double q2_deg = 0.0;
};

enum class Pol : std::size_t { H = 0, V = 1 };

TransferMap rotation(double theta_deg);
TransferMap hwp(double theta_deg);
TransferMap qwp(double theta_deg);

// Single-input PBS: 2 polarizations -> (port A, port B) x (H, V).
// H exits port A, V exits port B.
TransferMap pbs(const ExtinctionSpec& ext);

// Full two-input PBS, (in port, pol) -> (out port, pol); unitary.
// Input port 1 behaves like pbs(); input port 2 sends V to port A and H to
// port B, so it doubles as a polarization combiner.
TransferMap pbs_two_port(const ExtinctionSpec& ext);

// Symmetric 2x2 beamsplitter, power splitting (0.5 + imbalance, 0.5 - imbalance).
TransferMap beamsplitter(double imbalance);
TransferMap bs_5050();

// Scalar amplitude 10^(-loss_db/20) on a single mode.
TransferMap attenuator(double loss_db);

// qwp(q2) * hwp(h) * qwp(q1)
TransferMap paddle_unitary(const PaddleAngles& angles);

// Diagonal unitary applying e^{i phi} to mode `on_mode` of `dim` modes.
TransferMap phase_shift(double phi_rad, std::size_t on_mode, std::size_t dim = 2);

}  // namespace qlink
