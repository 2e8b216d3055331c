#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace alg {

struct PcaResult {
    // Centered data projected onto the top-k principal directions, then each
    // column min-max rescaled to [0,1] for rendering (degenerate columns -> 0).
    Eigen::MatrixXd projection01;
    // Raw (un-rescaled) projection, useful for quantitative checks.
    Eigen::MatrixXd projection;
    // Top-k eigenvalues of the sample covariance, descending.
    Eigen::VectorXd explained_variance;
    // True when the centered data has rank < k.
    bool degenerate = false;
};

// PCA of a (tokens x dims) feature matrix onto k components.  Covariance uses
// the sample (n-1) divisor; eigen decomposition runs in double precision.
inline PcaResult pca_project(const Eigen::MatrixXd& features, int k = 3) {
    const auto n = features.rows();
    const auto d = features.cols();
    if (k < 1) throw std::invalid_argument("pca_project: k must be >= 1");
    if (n < 2) throw std::invalid_argument("pca_project: need at least 2 tokens");
    if (d < k) throw std::invalid_argument("pca_project: need at least k dims");

    Eigen::MatrixXd centered = features.rowwise() - features.colwise().mean();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("pca_project: eigen decomposition failed");

    PcaResult out;
    out.projection.resize(n, k);
    out.projection01.resize(n, k);
    out.explained_variance.resize(k);

    // Eigen returns eigenvalues ascending; take the top k in descending order.
    const double largest = std::max(solver.eigenvalues()(d - 1), 0.0);
    const double tol = std::max(1e-12, largest * 1e-12);
    for (int j = 0; j < k; ++j) {
        double ev = solver.eigenvalues()(d - 1 - j);
        if (ev < tol) {
            out.degenerate = true;
            out.explained_variance(j) = std::max(ev, 0.0);
            out.projection.col(j).setZero();
            out.projection01.col(j).setZero();
            continue;
        }
        out.explained_variance(j) = ev;
        out.projection.col(j) = centered * solver.eigenvectors().col(d - 1 - j);
        double lo = out.projection.col(j).minCoeff();
        double hi = out.projection.col(j).maxCoeff();
        if (hi - lo < 1e-300) {
            out.degenerate = true;
            out.projection01.col(j).setZero();
        } else {
            out.projection01.col(j) =
                (out.projection.col(j).array() - lo) / (hi - lo);
        }
    }
    return out;
}

}  // namespace alg
