#pragma once

#include <string>
#include <vector>

#include "gen1s/data/dataset.hpp"
#include "gen1s/prototypes.hpp"

namespace gen1s {

// Equal-width bins over [lo, hi]; a value equal to hi lands in the last bin.
struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::size_t> counts;

    double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
    std::size_t total() const;
    void add(double value);
};

struct ResidualNormReport {
    Histogram correct;    // ||x - c_y||
    Histogram incorrect;  // ||x - c_k||, k != y
    double mean_correct = 0.0;
    double mean_incorrect = 0.0;
    // sum over bins of min(p_correct, p_incorrect) on normalized histograms
    double overlap = 0.0;
};

// Norms for every record whose class has a prototype, against every prototype in the table.
// Both histograms share bins over [0, max norm].
ResidualNormReport residual_norm_histogram(const EmbeddingDataset& ds, const PrototypeTable& prototypes,
                                           std::size_t bins = 50);

// bin_lo,bin_hi,count,density
std::string histogram_csv(const Histogram& h);

struct PcaResult {
    Vector mean;
    Matrix components;  // d x k, unit columns, largest-magnitude loading positive
    Vector explained_variance_ratio;
    Matrix coordinates;  // k x n
};

// Samples as columns. Needs n >= 2 and d >= k.
PcaResult pca_project(const Matrix& samples, Eigen::Index components = 2);

// Minimal SVG documents for external inspection.
struct ScatterSeries {
    std::string label;
    Matrix points;  // 2 x n
};
std::string svg_scatter(const std::vector<ScatterSeries>& series, const std::string& title);
std::string svg_histograms(const std::vector<std::pair<std::string, Histogram>>& hists, const std::string& title);

}  // namespace gen1s
