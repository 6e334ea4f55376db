#ifndef WIVJM_PENALTY_HPP
#define WIVJM_PENALTY_HPP

#include <stdexcept>

#include <Eigen/Dense>

namespace wivjm {

// Forward difference operator of the given order: (dim-order) x dim.
// order=2, dim=4 gives rows [1,-2,1,0] and [0,1,-2,1].
inline Eigen::MatrixXd difference_matrix(int order, int dim) {
    if (order < 1) throw std::invalid_argument("difference_matrix: order must be >= 1");
    if (dim <= order) throw std::invalid_argument("difference_matrix: dim must exceed order");
    Eigen::MatrixXd D = Eigen::MatrixXd::Identity(dim, dim);
    for (int r = 0; r < order; ++r) {
        Eigen::MatrixXd next(D.rows() - 1, dim);
        for (int i = 0; i + 1 < D.rows(); ++i) next.row(i) = D.row(i + 1) - D.row(i);
        D = next;
    }
    return D;
}

// Difference penalty D'D, optionally ridge-stabilized. The order-2 penalty
// annihilates coefficient vectors affine in the index; the ridge restores
// full rank.
struct PenaltyMatrix {
    int order = 2;
    int dim = 0;
    double ridge = 0.0;
    Eigen::MatrixXd mat;  // D'D + ridge*I

    static PenaltyMatrix make(int order, int dim, double ridge = 0.0) {
        PenaltyMatrix p;
        p.order = order;
        p.dim = dim;
        p.ridge = ridge;
        Eigen::MatrixXd D = difference_matrix(order, dim);
        p.mat = D.transpose() * D;
        if (ridge > 0.0) p.mat += ridge * Eigen::MatrixXd::Identity(dim, dim);
        return p;
    }

    // The second-order penalty with the stabilizing ridge used for the
    // structured normal prior on population spline coefficients.
    static PenaltyMatrix rw2(int dim, double ridge = 1e-6) { return make(2, dim, ridge); }
};

}  // namespace wivjm

#endif
