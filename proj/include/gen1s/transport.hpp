#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "gen1s/data/dataset.hpp"
#include "gen1s/prototypes.hpp"

namespace gen1s {

inline constexpr Eigen::Index kMaxTransportSize = 512;

struct Assignment {
    std::vector<Eigen::Index> column_of_row;
    double cost = 0.0;
};

// Exact minimum-cost perfect matching on a square cost matrix (Hungarian method with potentials).
Assignment solve_assignment(const Matrix& cost);

// Point sets as columns, equal sizes M <= kMaxTransportSize:
// min over permutations of sqrt(mean ||a_i - b_pi(i)||^2).
double wasserstein(const Matrix& a, const Matrix& b);

struct TransportClass {
    ClassId novel_class = 0;
    double base = 0.0;  // minimum over base classes
    ClassId nearest_base = 0;
    double gauss = 0.0;  // minimum over the Gaussian draws
    bool base_closer = false;
};

struct TransportReport {
    std::vector<TransportClass> classes;
    double mean_base = 0.0;
    double mean_gauss = 0.0;
    double fraction_base_closer = 0.0;
    Eigen::Index sample_size = 0;
    std::size_t gauss_draws = 0;
};

struct TransportOptions {
    Eigen::Index sample_size = 64;
    std::size_t gauss_draws = 0;  // 0: one draw per base class
    std::uint64_t seed = 0;
    double shrinkage_factor = 1e-4;
};

// For each novel class, subsample M query residuals (against the mean of all that class's records)
// and compare them with M-subsamples of every base class's base_train residuals and with M-sample
// draws from a full-covariance Gaussian fitted to the pooled base residuals.
TransportReport base_vs_gauss(const EmbeddingDataset& ds, const PrototypeTable& base_prototypes,
                              const TransportOptions& options);

nlohmann::json to_json(const TransportReport& report);

}  // namespace gen1s
