#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gen1s/core/mlp.hpp"

namespace gen1s::testing {

// Every trainable scalar of `p`, in layer order (weights column-major, then bias).
inline std::vector<double*> parameters_of(MlpParams& p) {
    std::vector<double*> out;
    for (auto& l : p.layers) {
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
    }
    return out;
}

inline Vector flatten(const MlpParams& p) {
    Vector v(static_cast<Eigen::Index>(p.parameter_count()));
    Eigen::Index k = 0;
    for (const auto& l : p.layers) {
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) v[k++] = l.weight.data()[i];
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) v[k++] = l.bias.data()[i];
    }
    return v;
}

// Central differences of `loss` with respect to every entry of `p`.
inline Vector numeric_gradient(MlpParams& p, const std::function<double()>& loss, double h = 1e-5) {
    const auto ptrs = parameters_of(p);
    Vector g(static_cast<Eigen::Index>(ptrs.size()));
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
        const double saved = *ptrs[i];
        *ptrs[i] = saved + h;
        const double up = loss();
        *ptrs[i] = saved - h;
        const double down = loss();
        *ptrs[i] = saved;
        g[static_cast<Eigen::Index>(i)] = (up - down) / (2.0 * h);
    }
    return g;
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const Vector& a, const Vector& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("gen1s_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace gen1s::testing
