#include <Eigen/Eigenvalues>

#include "gen1s/analysis.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

PcaResult pca_project(const Matrix& samples, Eigen::Index components) {
    const Eigen::Index d = samples.rows();
    const Eigen::Index n = samples.cols();
    if (n < 2) throw DataError("pca needs at least two samples");
    if (components < 1 || d < components) throw ConfigError("pca: components must lie in [1, dim]");

    PcaResult out;
    out.mean = samples.rowwise().mean();
    const Matrix centered = samples.colwise() - out.mean;
    const Matrix cov = centered * centered.transpose() / static_cast<double>(n - 1);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("pca: eigendecomposition failed");

    // Eigen returns ascending eigenvalues.
    const Vector values = eig.eigenvalues().reverse().cwiseMax(0.0);
    const double total = values.sum();
    out.components.resize(d, components);
    out.explained_variance_ratio.resize(components);
    for (Eigen::Index j = 0; j < components; ++j) {
        Vector axis = eig.eigenvectors().col(d - 1 - j);
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis[arg] < 0.0) axis = -axis;
        out.components.col(j) = axis;
        out.explained_variance_ratio[j] = total > 0.0 ? values[j] / total : 0.0;
    }
    out.coordinates = out.components.transpose() * centered;
    return out;
}

}  // namespace gen1s
