#pragma once

#include <complex>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace avcqc {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

// Numerical tolerances used across the library. Eigendecomposition of
// Hermitian matrices in double precision is the only linear-algebra
// primitive, so these are calibrated for dims up to the configured cap.
inline constexpr double kTolHermitian = 1e-9;
inline constexpr double kTolPsd = 1e-9;
inline constexpr double kTolTrace = 1e-9;
inline constexpr double kTolPovm = 1e-8;

// Floor for eigenvalues fed to logarithms; removes NaNs from roundoff.
inline constexpr double kEigLogFloor = 1e-18;

inline constexpr double kLn2 = 0.6931471805599453094172321214581766;

enum class errc {
    not_hermitian,
    not_psd,
    trace_not_one,
    dimension_overflow,
    dimension_mismatch,
    length_mismatch,
    alphabet_mismatch,
    schema_error,
    not_density,
    incomplete_index,
    not_stochastic,
    enumeration_overflow,
    permutation_changes_word,
    non_convergence,
    infeasible_plan,
    resample_budget_exceeded,
    partition_error,
    numerical_rank_failure,
    domain_error,
    precondition_violated,
    word_not_in_code,
    budget_exceeded,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::not_hermitian: return "NotHermitian";
        case errc::not_psd: return "NotPSD";
        case errc::trace_not_one: return "TraceNotOne";
        case errc::dimension_overflow: return "DimensionOverflow";
        case errc::dimension_mismatch: return "DimensionMismatch";
        case errc::length_mismatch: return "LengthMismatch";
        case errc::alphabet_mismatch: return "AlphabetMismatch";
        case errc::schema_error: return "SchemaError";
        case errc::not_density: return "NotDensity";
        case errc::incomplete_index: return "IncompleteIndex";
        case errc::not_stochastic: return "NotStochastic";
        case errc::enumeration_overflow: return "EnumerationOverflow";
        case errc::permutation_changes_word: return "PermutationChangesWord";
        case errc::non_convergence: return "NonConvergence";
        case errc::infeasible_plan: return "InfeasiblePlan";
        case errc::resample_budget_exceeded: return "ResampleBudgetExceeded";
        case errc::partition_error: return "PartitionError";
        case errc::numerical_rank_failure: return "NumericalRankFailure";
        case errc::domain_error: return "DomainError";
        case errc::precondition_violated: return "PreconditionViolated";
        case errc::word_not_in_code: return "WordNotInCode";
        case errc::budget_exceeded: return "BudgetExceeded";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(errc code, std::string message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message),
          code_(code) {}

    errc code() const { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
    throw Error(code, message);
}

// d^n cap for materialized operators. AVCQC_BUDGET_DIM overrides.
inline std::int64_t dim_cap() {
    static const std::int64_t cap = [] {
        if (const char* env = std::getenv("AVCQC_BUDGET_DIM")) {
            const long long v = std::atoll(env);
            if (v > 0) return static_cast<std::int64_t>(v);
        }
        return static_cast<std::int64_t>(4096);
    }();
    return cap;
}

// |X|^n / |S|^n cap for exhaustive enumerations.
inline constexpr std::int64_t kEnumerationCap = 1'000'000;

inline std::int64_t checked_pow(std::int64_t base, int exp, std::int64_t cap,
                                errc code, const std::string& what) {
    std::int64_t v = 1;
    for (int i = 0; i < exp; ++i) {
        if (v > cap / base)
            raise(code, what + " exceeds cap " + std::to_string(cap));
        v *= base;
    }
    return v;
}

inline bool is_hermitian(const Matrix& m, double tol = kTolHermitian) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline Matrix hermitize(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

struct EigSystem {
    RealVector values;   // descending
    Matrix vectors;      // columns aligned with values
};

// Hermitian eigendecomposition with a deterministic convention:
// eigenvalues descending; each eigenvector's phase fixed so its first
// nonzero component is positive real; ties in eigenvalue broken by
// lexicographic comparison of the phase-fixed vectors.
inline EigSystem eigh_sorted(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(m));
    const int d = static_cast<int>(m.rows());
    std::vector<int> order(d);
    for (int i = 0; i < d; ++i) order[i] = i;

    Matrix vecs = es.eigenvectors();
    for (int c = 0; c < d; ++c) {
        for (int r = 0; r < d; ++r) {
            const Complex z = vecs(r, c);
            if (std::abs(z) > 1e-12) {
                vecs.col(c) *= std::conj(z) / std::abs(z);
                break;
            }
        }
    }

    auto lex_less = [&](int a, int b) {
        for (int r = 0; r < d; ++r) {
            const Complex za = vecs(r, a), zb = vecs(r, b);
            if (za.real() != zb.real()) return za.real() < zb.real();
            if (za.imag() != zb.imag()) return za.imag() < zb.imag();
        }
        return false;
    };
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double la = es.eigenvalues()(a), lb = es.eigenvalues()(b);
        if (la != lb) return la > lb;
        return lex_less(a, b);
    });

    EigSystem out;
    out.values.resize(d);
    out.vectors.resize(d, d);
    for (int i = 0; i < d; ++i) {
        out.values(i) = es.eigenvalues()(order[i]);
        out.vectors.col(i) = vecs.col(order[i]);
    }
    return out;
}

inline double operator_norm(const Matrix& m) {
    if (is_hermitian(m, 1e-7)) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(m));
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

inline double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(m));
    return es.eigenvalues().minCoeff();
}

// Matrix function of a Hermitian operator through its spectrum.
template <typename F>
Matrix hermitian_function(const Matrix& m, F&& f) {
    const EigSystem es = eigh_sorted(m);
    const int d = static_cast<int>(m.rows());
    Matrix out = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i)
        out += f(es.values(i)) * es.vectors.col(i) * es.vectors.col(i).adjoint();
    return out;
}

// log2 of a PSD operator on its support; off-support eigenvalues are
// floored so traces against supported states stay finite.
inline Matrix log2_on_support(const Matrix& m, double floor_val = kEigLogFloor) {
    return hermitian_function(m, [floor_val](double lam) {
        return std::log2(std::max(lam, floor_val));
    });
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline double real_trace(const Matrix& m) { return m.trace().real(); }

}  // namespace avcqc
