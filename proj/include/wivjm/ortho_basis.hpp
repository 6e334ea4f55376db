#ifndef WIVJM_ORTHO_BASIS_HPP
#define WIVJM_ORTHO_BASIS_HPP

#include <stdexcept>

#include <Eigen/Dense>

#include "wivjm/bspline.hpp"
#include "wivjm/errors.hpp"
#include "wivjm/penalty.hpp"

namespace wivjm {

// Decomposition of a rich B-spline space into the unpenalized null space
// (constant + linear, carried by subject intercept/slope terms) and a small
// set of penalized basis functions orthogonal to it. The penalized functions
// are eigenfunctions of the prior covariance operator B P^- B' tabulated on a
// dense grid, deflated of constant/linear content, and scaled by the square
// root of their eigenvalues so rougher components have smaller amplitude.
// Each retained function is also an exact element of span(B); `coef` holds
// its coefficients in the raw basis, which makes pointwise derivatives and
// curvature integrals exact spline algebra.
struct OrthoBasis {
    KnotConfig raw;               // K0-dimensional generating basis
    Eigen::VectorXd grid;         // dense tabulation grid on [lo, hi]
    Eigen::MatrixXd null_design;  // grid x 2, columns [1, t]
    Eigen::MatrixXd penalized;    // grid x K tabulated values
    Eigen::MatrixXd penalized_dd; // grid x K second derivatives
    Eigen::MatrixXd coef;         // K0 x K raw-basis coefficients
    Eigen::VectorXd eigenvalues;  // K, positive nonincreasing
    double pve_achieved = 0.0;

    int K() const { return int(coef.cols()); }

    double eval(int k, double t, int deriv = 0) const { return eval_spline(raw, coef.col(k), t, deriv); }

    // All K penalized functions (or derivatives) at t.
    Eigen::VectorXd eval_all(double t, int deriv = 0) const {
        BasisSpan s = eval_basis_local(raw, t, deriv);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(K());
        for (int j = 0; j <= raw.degree; ++j) out += s.v[std::size_t(j)] * coef.row(s.first + j).transpose();
        return out;
    }
};

inline OrthoBasis build_ortho_basis(const KnotConfig& raw, int grid_size = 401, double pve = 0.999) {
    raw.validate();
    const int K0 = raw.size();
    if (grid_size < 10 * K0)
        throw std::invalid_argument("build_ortho_basis: grid_size must be at least 10x the basis dimension");
    if (!(pve > 0.0 && pve <= 1.0)) throw std::invalid_argument("build_ortho_basis: pve must lie in (0,1]");

    OrthoBasis ob;
    ob.raw = raw;
    ob.grid = Eigen::VectorXd::LinSpaced(grid_size, raw.lo, raw.hi);
    Eigen::MatrixXd B = design_matrix(raw, ob.grid, 0);

    // pseudo-inverse of the second-order difference penalty
    Eigen::MatrixXd P = PenaltyMatrix::make(2, K0, 0.0).mat;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pes(P);
    const Eigen::VectorXd& pw = pes.eigenvalues();
    double thresh = 1e-10 * pw.maxCoeff();
    Eigen::VectorXd pinv = (pw.array() > thresh).select(pw.array().inverse(), 0.0);
    Eigen::MatrixXd Pminus = pes.eigenvectors() * pinv.asDiagonal() * pes.eigenvectors().transpose();

    Eigen::MatrixXd S = B * Pminus * B.transpose();

    // deflate exact constant/linear function content in the grid inner product
    Eigen::MatrixXd X(grid_size, 2);
    X.col(0).setOnes();
    X.col(1) = ob.grid;
    ob.null_design = X;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(grid_size, 2);
    Eigen::MatrixXd QtS = Q.transpose() * S;
    S.noalias() -= Q * QtS;                       // (I - QQ')S
    Eigen::MatrixXd SQ = S * Q;
    S.noalias() -= SQ * Q.transpose();            // (I - QQ')S(I - QQ')
    S = 0.5 * (S + S.transpose().eval());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success) throw numeric_error("build_ortho_basis: eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues().reverse();
    Eigen::MatrixXd V = es.eigenvectors().rowwise().reverse();

    double lam_max = lam[0];
    if (!(lam_max > 0.0)) throw numeric_error("build_ortho_basis: penalized operator has no positive spectrum");
    int n_pos = 0;
    double total = 0.0;
    for (int i = 0; i < lam.size(); ++i) {
        if (lam[i] > 1e-12 * lam_max) {
            ++n_pos;
            total += lam[i];
        } else
            break;
    }
    int Kret = n_pos;
    double cum = 0.0;
    for (int i = 0; i < n_pos; ++i) {
        cum += lam[i];
        if (cum >= pve * total) {
            Kret = i + 1;
            break;
        }
    }
    ob.eigenvalues = lam.head(Kret);
    ob.pve_achieved = ob.eigenvalues.sum() / total;

    // scale eigenvectors to functions and re-express in the raw basis
    Eigen::MatrixXd F(grid_size, Kret);
    for (int k = 0; k < Kret; ++k) F.col(k) = std::sqrt(lam[k]) * V.col(k);
    Eigen::LDLT<Eigen::MatrixXd> gram(B.transpose() * B);
    ob.coef = gram.solve(B.transpose() * F);
    ob.penalized = B * ob.coef;
    ob.penalized_dd = design_matrix(raw, ob.grid, 2) * ob.coef;
    return ob;
}

}  // namespace wivjm

#endif
