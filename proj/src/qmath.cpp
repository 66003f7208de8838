#include "qlink/qmath.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qlink {

namespace {

constexpr std::size_t kMaxKronDim = 256;
constexpr std::size_t kMaxEighDim = 16;

void require_same_shape(const CMatrix& a, const CMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(what) + ": shape mismatch");
    }
}

}  // namespace

CMatrix::CMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0}) {}

CMatrix::CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("CMatrix: entry count does not match rows*cols");
    }
    if (!is_finite()) {
        throw DimensionError("CMatrix: non-finite entry");
    }
}

CMatrix::CMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw DimensionError("CMatrix: ragged initializer");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
    if (!is_finite()) {
        throw DimensionError("CMatrix: non-finite entry");
    }
}

CMatrix CMatrix::identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

CMatrix CMatrix::column(std::span<const cplx> v) {
    return CMatrix(v.size(), 1, std::vector<cplx>(v.begin(), v.end()));
}

CMatrix CMatrix::diagonal(std::span<const cplx> d) {
    CMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

CMatrix CMatrix::adjoint() const {
    CMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
}

CMatrix CMatrix::transpose() const {
    CMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
}

cplx CMatrix::trace() const {
    if (!is_square()) throw DimensionError("trace: matrix is not square");
    cplx t = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
    return t;
}

bool CMatrix::is_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](const cplx& z) {
        return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
}

double CMatrix::frobenius_norm() const {
    double s = 0.0;
    for (const auto& z : data_) s += std::norm(z);
    return std::sqrt(s);
}

double CMatrix::max_abs_diff(const CMatrix& other) const {
    require_same_shape(*this, other, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) m = std::max(m, std::abs(data_[i] - other.data_[i]));
    return m;
}

CMatrix& CMatrix::operator+=(const CMatrix& rhs) {
    require_same_shape(*this, rhs, "operator+");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

CMatrix& CMatrix::operator-=(const CMatrix& rhs) {
    require_same_shape(*this, rhs, "operator-");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

CMatrix& CMatrix::operator*=(cplx s) {
    for (auto& z : data_) z *= s;
    return *this;
}

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("operator*: inner dimensions differ");
    CMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx{0.0, 0.0}) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    const std::size_t rows = a.rows() * b.rows();
    const std::size_t cols = a.cols() * b.cols();
    if (rows > kMaxKronDim || cols > kMaxKronDim) {
        throw DimensionError("kron: result exceeds 256x256");
    }
    CMatrix out(rows, cols);
    for (std::size_t ar = 0; ar < a.rows(); ++ar)
        for (std::size_t ac = 0; ac < a.cols(); ++ac)
            for (std::size_t br = 0; br < b.rows(); ++br)
                for (std::size_t bc = 0; bc < b.cols(); ++bc)
                    out(ar * b.rows() + br, ac * b.cols() + bc) = a(ar, ac) * b(br, bc);
    return out;
}

CMatrix conjugate(const CMatrix& op, const CMatrix& rho) { return op * rho * op.adjoint(); }

// ---------------------------------------------------------------------------

PureState::PureState(std::vector<cplx> amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.empty()) throw DimensionError("PureState: empty amplitude vector");
    double n2 = 0.0;
    for (const auto& a : amps_) n2 += std::norm(a);
    if (!std::isfinite(n2) || std::abs(std::sqrt(n2) - 1.0) > 1e-12) {
        throw DimensionError("PureState: amplitudes are not unit norm");
    }
}

PureState PureState::normalized(std::vector<cplx> amplitudes) {
    double n2 = 0.0;
    for (const auto& a : amplitudes) n2 += std::norm(a);
    if (!(n2 > 0.0) || !std::isfinite(n2)) throw DimensionError("PureState: zero or non-finite vector");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& a : amplitudes) a *= inv;
    return PureState(std::move(amplitudes));
}

CMatrix PureState::projector() const {
    const std::size_t n = amps_.size();
    CMatrix p(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) p(i, j) = amps_[i] * std::conj(amps_[j]);
    return p;
}

PureState kron(const PureState& a, const PureState& b) {
    std::vector<cplx> out;
    out.reserve(a.dim() * b.dim());
    for (const auto& x : a.amplitudes())
        for (const auto& y : b.amplitudes()) out.push_back(x * y);
    return PureState::normalized(std::move(out));
}

// ---------------------------------------------------------------------------

DensityMatrix::DensityMatrix(CMatrix m) : m_(std::move(m)) {
    if (!m_.is_square() || m_.rows() == 0) throw DimensionError("DensityMatrix: matrix must be square");
    if (!m_.is_finite()) throw DimensionError("DensityMatrix: non-finite entry");
    const double scale = std::max(1.0, m_.frobenius_norm());
    if (m_.max_abs_diff(m_.adjoint()) > 1e-10 * scale) {
        throw DimensionError("DensityMatrix: matrix is not Hermitian");
    }
    // Remove round-off asymmetry so downstream eigen-solves see an exact Hermitian.
    const std::size_t n = m_.rows();
    for (std::size_t i = 0; i < n; ++i) {
        m_(i, i) = m_(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j) {
            const cplx avg = 0.5 * (m_(i, j) + std::conj(m_(j, i)));
            m_(i, j) = avg;
            m_(j, i) = std::conj(avg);
        }
    }
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) { return DensityMatrix(psi.projector()); }

DensityMatrix DensityMatrix::maximally_mixed(std::size_t dim) {
    return DensityMatrix(CMatrix::identity(dim) * cplx{1.0 / static_cast<double>(dim), 0.0});
}

DensityMatrix DensityMatrix::normalized() const {
    const double t = trace();
    if (!(t > 0.0)) throw DimensionError("DensityMatrix::normalized: non-positive trace");
    return DensityMatrix(m_ * cplx{1.0 / t, 0.0});
}

// ---------------------------------------------------------------------------

EigenDecomposition eigh(const CMatrix& hermitian) {
    if (!hermitian.is_square()) throw DimensionError("eigh: matrix is not square");
    const std::size_t n = hermitian.rows();
    if (n > kMaxEighDim) throw DimensionError("eigh: dimension exceeds 16");

    CMatrix a = hermitian;
    CMatrix w = CMatrix::identity(n);

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += std::norm(a(i, j));
        return std::sqrt(s);
    };
    const double scale = std::max(a.frobenius_norm(), 1e-300);

    for (int sweep = 0; sweep < 100 && off_norm() > 1e-15 * scale; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double mag = std::abs(a(p, q));
                if (mag < 1e-300) continue;
                // Phase rotation makes the (p,q) element real, then a real
                // Jacobi rotation annihilates it.
                const cplx phase = std::conj(a(p, q)) / mag;  // e^{-i alpha}
                const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const cplx vpp = c, vpq = s, vqp = -s * phase, vqq = c * phase;

                for (std::size_t k = 0; k < n; ++k) {
                    const cplx akp = a(k, p), akq = a(k, q);
                    a(k, p) = akp * vpp + akq * vqp;
                    a(k, q) = akp * vpq + akq * vqq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx apk = a(p, k), aqk = a(q, k);
                    a(p, k) = std::conj(vpp) * apk + std::conj(vqp) * aqk;
                    a(q, k) = std::conj(vpq) * apk + std::conj(vqq) * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx wkp = w(k, p), wkq = w(k, q);
                    w(k, p) = wkp * vpp + wkq * vqp;
                    w(k, q) = wkp * vpq + wkq * vqq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });

    EigenDecomposition out{std::vector<double>(n), CMatrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]).real();
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = w(r, order[k]);
    }
    return out;
}

double fidelity_pure(const DensityMatrix& rho, const PureState& target) {
    if (rho.dim() != target.dim()) throw DimensionError("fidelity_pure: dimension mismatch");
    const double tr = rho.trace();
    if (!(tr > 0.0)) throw DimensionError("fidelity_pure: zero trace");
    cplx overlap = 0.0;
    const auto t = target.amplitudes();
    for (std::size_t i = 0; i < rho.dim(); ++i)
        for (std::size_t j = 0; j < rho.dim(); ++j) overlap += std::conj(t[i]) * rho(i, j) * t[j];
    return overlap.real() / tr;
}

DensityMatrix project_psd(const DensityMatrix& rho) {
    const auto eig = eigh(rho.matrix());
    const std::size_t n = rho.dim();
    const double tr_in = rho.trace();
    double tr_clamped = 0.0;
    for (double v : eig.values) tr_clamped += std::max(v, 0.0);
    if (!(tr_clamped > 0.0)) throw DimensionError("project_psd: no positive spectrum");
    const double rescale = tr_in / tr_clamped;

    CMatrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lam = std::max(eig.values[k], 0.0) * rescale;
        if (lam == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                out(i, j) += lam * eig.vectors(i, k) * std::conj(eig.vectors(j, k));
    }
    return DensityMatrix(std::move(out));
}

PhysicalityReport is_physical(const CMatrix& rho, double tol) {
    PhysicalityReport rep;
    if (!rho.is_square()) {
        rep.physical = false;
        rep.violations.emplace_back("matrix is not square");
        return rep;
    }
    rep.hermiticity_error = rho.max_abs_diff(rho.adjoint());
    if (rep.hermiticity_error > tol) rep.violations.emplace_back("not Hermitian");

    CMatrix herm = (rho + rho.adjoint()) * cplx{0.5, 0.0};
    rep.min_eigenvalue = eigh(herm).values.front();
    if (rep.min_eigenvalue < -tol) rep.violations.emplace_back("negative eigenvalue " + std::to_string(rep.min_eigenvalue));

    rep.trace = rho.trace().real();
    if (!(rep.trace > 0.0) || rep.trace > 1.0 + tol) rep.violations.emplace_back("trace outside (0, 1]");

    rep.physical = rep.violations.empty();
    return rep;
}

double trace_distance(const CMatrix& a, const CMatrix& b) {
    CMatrix d = a - b;
    d = (d + d.adjoint()) * cplx{0.5, 0.0};
    double s = 0.0;
    for (double v : eigh(d).values) s += std::abs(v);
    return 0.5 * s;
}

namespace states {

namespace {
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
}

PureState H() { return PureState({1.0, 0.0}); }
PureState V() { return PureState({0.0, 1.0}); }
PureState D() { return PureState({kInvSqrt2, kInvSqrt2}); }
PureState A() { return PureState({kInvSqrt2, -kInvSqrt2}); }
PureState R() { return PureState({kInvSqrt2, cplx{0.0, kInvSqrt2}}); }
PureState L() { return PureState({kInvSqrt2, cplx{0.0, -kInvSqrt2}}); }

PureState phi_plus(double phase_rad) {
    return PureState({kInvSqrt2, 0.0, 0.0, std::polar(kInvSqrt2, phase_rad)});
}

DensityMatrix werner(double visibility, double phase_rad) {
    if (visibility < 0.0 || visibility > 1.0) throw DimensionError("werner: visibility outside [0,1]");
    CMatrix m = phi_plus(phase_rad).projector() * cplx{visibility, 0.0};
    m += CMatrix::identity(4) * cplx{(1.0 - visibility) / 4.0, 0.0};
    return DensityMatrix(std::move(m));
}

}  // namespace states

}  // namespace qlink
