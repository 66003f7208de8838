#pragma once

// Dense complex linear algebra for the small Hilbert spaces used by the link
// simulator (dimension <= 16). Row-major storage, value semantics throughout.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlink {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Thrown on shape mismatches and violated preconditions of the math layer.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class CMatrix {
  public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols);
    CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries);
    CMatrix(std::initializer_list<std::initializer_list<cplx>> rows);

    static CMatrix identity(std::size_t n);
    static CMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
    static CMatrix column(std::span<const cplx> v);
    static CMatrix diagonal(std::span<const cplx> d);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool is_square() const { return rows_ == cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const cplx> data() const { return data_; }

    CMatrix adjoint() const;
    CMatrix transpose() const;
    cplx trace() const;
    bool is_finite() const;
    double frobenius_norm() const;
    double max_abs_diff(const CMatrix& other) const;

    CMatrix& operator+=(const CMatrix& rhs);
    CMatrix& operator-=(const CMatrix& rhs);
    CMatrix& operator*=(cplx s);

    friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
    friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
    friend CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
    friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }
    friend CMatrix operator*(const CMatrix& a, const CMatrix& b);

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

// Kronecker product; results larger than 256x256 are rejected.
CMatrix kron(const CMatrix& a, const CMatrix& b);

// A*B*A^dagger, the conjugation used for every state update.
CMatrix conjugate(const CMatrix& op, const CMatrix& rho);

class PureState {
  public:
    // Requires unit norm within 1e-12.
    explicit PureState(std::vector<cplx> amplitudes);
    // Normalizes a non-zero vector.
    static PureState normalized(std::vector<cplx> amplitudes);

    std::size_t dim() const { return amps_.size(); }
    std::span<const cplx> amplitudes() const { return amps_; }
    const cplx& operator[](std::size_t i) const { return amps_[i]; }

    CMatrix projector() const;

  private:
    std::vector<cplx> amps_;
};

PureState kron(const PureState& a, const PureState& b);

// Hermitian (within 1e-10), finite, square operator with positive trace.
// Positivity is deliberately not enforced here: linear inversion produces
// non-physical matrices that must still be representable. Use is_physical().
class DensityMatrix {
  public:
    explicit DensityMatrix(CMatrix m);
    static DensityMatrix from_pure(const PureState& psi);
    static DensityMatrix maximally_mixed(std::size_t dim);

    std::size_t dim() const { return m_.rows(); }
    const CMatrix& matrix() const { return m_; }
    double trace() const { return m_.trace().real(); }
    const cplx& operator()(std::size_t r, std::size_t c) const { return m_(r, c); }

    // Copy rescaled to unit trace.
    DensityMatrix normalized() const;

  private:
    CMatrix m_;
};

struct EigenDecomposition {
    std::vector<double> values;  // ascending
    CMatrix vectors;             // columns are eigenvectors
};

// Cyclic complex Jacobi for Hermitian matrices (dimension <= 16).
EigenDecomposition eigh(const CMatrix& hermitian);

double fidelity_pure(const DensityMatrix& rho, const PureState& target);

DensityMatrix project_psd(const DensityMatrix& rho);

struct PhysicalityReport {
    bool physical = true;
    double hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
    double trace = 0.0;
    std::vector<std::string> violations;
};

PhysicalityReport is_physical(const CMatrix& rho, double tol);
inline PhysicalityReport is_physical(const DensityMatrix& rho, double tol) {
    return is_physical(rho.matrix(), tol);
}

// 0.5 * sum |eig(a - b)| for Hermitian a, b.
double trace_distance(const CMatrix& a, const CMatrix& b);

// Named single-qubit and two-qubit states used throughout.
namespace states {
PureState H();
PureState V();
PureState D();
PureState A();
PureState R();
PureState L();
// (|HH> + e^{i phase}|VV>)/sqrt(2)
PureState phi_plus(double phase_rad = 0.0);
// v*|phi+><phi+| + (1-v)*I/4
DensityMatrix werner(double visibility, double phase_rad = 0.0);
}  // namespace states

}  // namespace qlink
