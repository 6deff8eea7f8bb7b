#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "avcqc/common.hpp"

namespace avcqc {

/// Finite-dimensional density operator: Hermitian, PSD, unit trace.
/// Construction validates against the library tolerances and then clips
/// in-tolerance negative eigenvalues to zero and renormalizes the trace.
class DensityOperator {
public:
    static DensityOperator make(const Matrix& entries) {
        if (entries.rows() != entries.cols())
            raise(errc::dimension_mismatch, "density matrix must be square");
        if (!is_hermitian(entries))
            raise(errc::not_hermitian,
                  "max |A - A^dagger| entry = " +
                      std::to_string((entries - entries.adjoint()).cwiseAbs().maxCoeff()));
        const double tr = entries.trace().real();
        if (std::abs(tr - 1.0) > kTolTrace)
            raise(errc::trace_not_one, "trace = " + std::to_string(tr));
        EigSystem es = eigh_sorted(entries);
        const double min_eig = es.values.minCoeff();
        if (min_eig < -kTolPsd)
            raise(errc::not_psd, "min eigenvalue = " + std::to_string(min_eig));

        for (int i = 0; i < es.values.size(); ++i)
            es.values(i) = std::max(es.values(i), 0.0);
        const double sum = es.values.sum();
        Matrix clean = Matrix::Zero(entries.rows(), entries.cols());
        for (int i = 0; i < es.values.size(); ++i)
            clean += (es.values(i) / sum) * es.vectors.col(i) * es.vectors.col(i).adjoint();
        clean = hermitize(clean);
        return DensityOperator(std::move(clean));
    }

    int dim() const { return static_cast<int>(entries_.rows()); }
    const Matrix& entries() const { return entries_; }

private:
    explicit DensityOperator(Matrix m) : entries_(std::move(m)) {}
    Matrix entries_;
};

inline DensityOperator make_density(const Matrix& entries) {
    return DensityOperator::make(entries);
}

/// Hermitian operator (projectors, POVM elements). Hermiticity enforced
/// on construction; PSD-ness is checked where contracts require it.
class HermitianOperator {
public:
    static HermitianOperator make(const Matrix& entries) {
        if (entries.rows() != entries.cols())
            raise(errc::dimension_mismatch, "operator must be square");
        if (!is_hermitian(entries))
            raise(errc::not_hermitian, "entries not Hermitian within tolerance");
        return HermitianOperator(hermitize(entries));
    }

    int dim() const { return static_cast<int>(entries_.rows()); }
    const Matrix& entries() const { return entries_; }

private:
    explicit HermitianOperator(Matrix m) : entries_(std::move(m)) {}
    Matrix entries_;
};

struct POVM {
    std::vector<std::string> outcomes;
    std::vector<HermitianOperator> elements;
};

class ProbabilityVector {
public:
    static ProbabilityVector make(std::vector<std::string> support, RealVector weights) {
        if (static_cast<int>(support.size()) != weights.size())
            raise(errc::dimension_mismatch, "support/weight size mismatch");
        double sum = 0.0;
        for (int i = 0; i < weights.size(); ++i) {
            if (weights(i) < -kTolTrace)
                raise(errc::domain_error,
                      "negative weight " + std::to_string(weights(i)));
            weights(i) = std::max(weights(i), 0.0);
            sum += weights(i);
        }
        if (std::abs(sum - 1.0) > kTolTrace)
            raise(errc::trace_not_one, "weights sum to " + std::to_string(sum));
        weights /= sum;
        return ProbabilityVector(std::move(support), std::move(weights));
    }

    static ProbabilityVector uniform(int n) {
        std::vector<std::string> labels(n);
        for (int i = 0; i < n; ++i) labels[i] = std::to_string(i);
        return make(std::move(labels), RealVector::Constant(n, 1.0 / n));
    }

    int size() const { return static_cast<int>(weights_.size()); }
    const std::vector<std::string>& support() const { return support_; }
    const RealVector& weights() const { return weights_; }
    double operator()(int i) const { return weights_(i); }

private:
    ProbabilityVector(std::vector<std::string> s, RealVector w)
        : support_(std::move(s)), weights_(std::move(w)) {}
    std::vector<std::string> support_;
    RealVector weights_;
};

/// Spectrum entropy, base 2, with 0 log 0 = 0. Eigenvalues inside the
/// PSD tolerance band below zero are clipped first.
inline double entropy_of_spectrum(const RealVector& values) {
    double h = 0.0;
    for (int i = 0; i < values.size(); ++i) {
        double lam = values(i);
        if (lam < 0.0) {
            if (lam < -kTolPsd) raise(errc::not_psd, "negative eigenvalue in spectrum");
            lam = 0.0;
        }
        if (lam > 0.0) h -= lam * std::log2(lam);
    }
    return h;
}

inline double von_neumann_entropy(const DensityOperator& rho) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho.entries());
    return entropy_of_spectrum(es.eigenvalues());
}

inline double shannon_entropy(const ProbabilityVector& p) {
    return entropy_of_spectrum(p.weights());
}

inline DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
    const std::int64_t d = static_cast<std::int64_t>(a.dim()) * b.dim();
    if (d > dim_cap())
        raise(errc::dimension_overflow,
              "tensor dim " + std::to_string(d) + " exceeds cap " + std::to_string(dim_cap()));
    return make_density(kron(a.entries(), b.entries()));
}

enum class Subsystem { P, Q };

inline DensityOperator partial_trace(const DensityOperator& rho, int dim_p, int dim_q,
                                     Subsystem over) {
    if (static_cast<std::int64_t>(dim_p) * dim_q != rho.dim())
        raise(errc::dimension_mismatch,
              "bipartite dims " + std::to_string(dim_p) + "x" + std::to_string(dim_q) +
                  " do not factor dim " + std::to_string(rho.dim()));
    const Matrix& m = rho.entries();
    if (over == Subsystem::P) {
        Matrix out = Matrix::Zero(dim_q, dim_q);
        for (int p = 0; p < dim_p; ++p)
            out += m.block(p * dim_q, p * dim_q, dim_q, dim_q);
        return make_density(out);
    }
    Matrix out = Matrix::Zero(dim_p, dim_p);
    for (int p1 = 0; p1 < dim_p; ++p1)
        for (int p2 = 0; p2 < dim_p; ++p2) {
            Complex acc = 0.0;
            for (int q = 0; q < dim_q; ++q) acc += m(p1 * dim_q + q, p2 * dim_q + q);
            out(p1, p2) = acc;
        }
    return make_density(out);
}

/// S(P|Q) = S(PQ) - S(Q); may be negative.
inline double conditional_entropy(const DensityOperator& rho_pq, int dim_p, int dim_q) {
    const DensityOperator rho_q = partial_trace(rho_pq, dim_p, dim_q, Subsystem::P);
    return von_neumann_entropy(rho_pq) - von_neumann_entropy(rho_q);
}

struct PovmReport {
    bool valid = false;
    double completeness_residual = 0.0;          // ||sum - I|| (operator norm)
    std::vector<double> element_min_eigenvalues; // one per element
};

inline PovmReport povm_validate(const POVM& m) {
    PovmReport report;
    if (m.elements.empty()) {
        report.completeness_residual = 1.0;
        return report;
    }
    const int d = m.elements.front().dim();
    Matrix sum = Matrix::Zero(d, d);
    bool all_psd = true;
    for (const auto& e : m.elements) {
        if (e.dim() != d) raise(errc::dimension_mismatch, "POVM element dim mismatch");
        const double me = min_eigenvalue(e.entries());
        report.element_min_eigenvalues.push_back(me);
        if (me < -kTolPsd) all_psd = false;
        sum += e.entries();
    }
    report.completeness_residual = operator_norm(sum - Matrix::Identity(d, d));
    report.valid = all_psd && report.completeness_residual <= kTolPovm;
    return report;
}

}  // namespace avcqc
