#include <algorithm>
#include <cmath>
#include <sstream>

#include "gen1s/analysis.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

std::size_t Histogram::total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
}

void Histogram::add(double value) {
    if (counts.empty()) throw ConfigError("histogram has no bins");
    const double pos = (value - lo) / bin_width();
    auto bin = static_cast<std::ptrdiff_t>(std::floor(pos));
    bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(counts.size()) - 1);
    ++counts[static_cast<std::size_t>(bin)];
}

ResidualNormReport residual_norm_histogram(const EmbeddingDataset& ds, const PrototypeTable& prototypes,
                                           std::size_t bins) {
    if (bins == 0) throw ConfigError("histogram needs at least one bin");
    if (prototypes.empty()) throw DataError("residual_norm_histogram: no prototypes");
    const auto ids = prototypes.class_ids();
    const Matrix centers = prototypes.as_matrix();
    std::vector<double> correct, incorrect;
    for (const Record& r : ds.records) {
        if (!prototypes.contains(r.class_id)) continue;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const double n = (r.embedding - centers.col(static_cast<Eigen::Index>(k))).norm();
            (ids[k] == r.class_id ? correct : incorrect).push_back(n);
        }
    }
    if (correct.empty()) throw DataError("residual_norm_histogram: no records with prototypes");

    double hi = 0.0;
    for (double v : correct) hi = std::max(hi, v);
    for (double v : incorrect) hi = std::max(hi, v);
    if (hi == 0.0) hi = 1.0;

    ResidualNormReport rep;
    rep.correct = Histogram{0.0, hi, std::vector<std::size_t>(bins, 0)};
    rep.incorrect = rep.correct;
    for (double v : correct) rep.correct.add(v);
    for (double v : incorrect) rep.incorrect.add(v);
    auto mean = [](const std::vector<double>& xs) {
        double s = 0.0;
        for (double x : xs) s += x;
        return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
    };
    rep.mean_correct = mean(correct);
    rep.mean_incorrect = mean(incorrect);
    if (!incorrect.empty()) {
        const double nc = static_cast<double>(correct.size());
        const double ni = static_cast<double>(incorrect.size());
        for (std::size_t b = 0; b < bins; ++b)
            rep.overlap += std::min(static_cast<double>(rep.correct.counts[b]) / nc,
                                    static_cast<double>(rep.incorrect.counts[b]) / ni);
    }
    return rep;
}

std::string histogram_csv(const Histogram& h) {
    std::ostringstream out;
    out.precision(17);
    out << "bin_lo,bin_hi,count,density\n";
    const double total = static_cast<double>(std::max<std::size_t>(h.total(), 1));
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double lo = h.lo + static_cast<double>(b) * h.bin_width();
        out << lo << ',' << lo + h.bin_width() << ',' << h.counts[b] << ','
            << static_cast<double>(h.counts[b]) / (total * h.bin_width()) << '\n';
    }
    return out.str();
}

}  // namespace gen1s
