#pragma once

#include "avcqc/channel_model.hpp"
#include "avcqc/common.hpp"
#include "avcqc/operator_core.hpp"

namespace avcqc {

/// Holevo quantity split into its two entropy terms; solvers reuse the
/// terms in subgradients without re-diagonalizing.
struct ChiValue {
    double value = 0.0;
    double ensemble_entropy = 0.0;
    double mean_state_entropy = 0.0;
};

inline void check_alphabet(const ProbabilityVector& p, const CQChannel& v) {
    if (p.support() != v.inputs())
        raise(errc::alphabet_mismatch, "input distribution alphabet does not match channel");
}

inline ChiValue holevo_chi(const ProbabilityVector& p, const CQChannel& v) {
    check_alphabet(p, v);
    Matrix avg = Matrix::Zero(v.dim(), v.dim());
    double mean_entropy = 0.0;
    for (int x = 0; x < v.num_inputs(); ++x) {
        avg += p(x) * v.state(x).entries();
        if (p(x) > 0.0) mean_entropy += p(x) * von_neumann_entropy(v.state(x));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(avg));
    ChiValue out;
    out.ensemble_entropy = entropy_of_spectrum(es.eigenvalues());
    out.mean_state_entropy = mean_entropy;
    out.value = out.ensemble_entropy - out.mean_state_entropy;
    return out;
}

/// S(V|P) = sum_x P(x) S(V(x)).
inline double channel_conditional_entropy(const ProbabilityVector& p, const CQChannel& v) {
    check_alphabet(p, v);
    double h = 0.0;
    for (int x = 0; x < v.num_inputs(); ++x)
        if (p(x) > 0.0) h += p(x) * von_neumann_entropy(v.state(x));
    return h;
}

/// Quantum relative entropy D(rho || sigma) in bits. Off-support mass of
/// rho relative to sigma would be +infinity; the eigenvalue floor keeps
/// values finite but very large, which the solvers rely on.
inline double relative_entropy(const Matrix& rho, const Matrix& sigma) {
    const Matrix log_rho = log2_on_support(rho);
    const Matrix log_sigma = log2_on_support(sigma);
    return (rho * (log_rho - log_sigma)).trace().real();
}

inline double relative_entropy(const DensityOperator& rho, const DensityOperator& sigma) {
    return relative_entropy(rho.entries(), sigma.entries());
}

}  // namespace avcqc
