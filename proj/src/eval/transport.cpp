#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>

#include "gen1s/core/rng.hpp"
#include "gen1s/error.hpp"
#include "gen1s/transport.hpp"

namespace gen1s {

double wasserstein(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("wasserstein: point sets differ in shape");
    const Eigen::Index m = a.cols();
    if (m < 1) throw ShapeError("wasserstein: empty point sets");
    if (m > kMaxTransportSize)
        throw ConfigError("wasserstein: M = " + std::to_string(m) + " exceeds " + std::to_string(kMaxTransportSize) +
                          "; subsample first");
    const Eigen::RowVectorXd na = a.colwise().squaredNorm();
    const Eigen::RowVectorXd nb = b.colwise().squaredNorm();
    Matrix cost = (-2.0 * a.transpose() * b).colwise() + na.transpose();
    cost.rowwise() += nb;
    cost = cost.cwiseMax(0.0);
    const Assignment asg = solve_assignment(cost);
    // Recompute matched costs directly so the result carries no cancellation error.
    double total = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) total += (a.col(i) - b.col(asg.column_of_row[static_cast<std::size_t>(i)])).squaredNorm();
    return std::sqrt(total / static_cast<double>(m));
}

namespace {

Matrix subsample(const Matrix& pool, Eigen::Index m, Rng& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(pool.cols()));
    std::iota(idx.begin(), idx.end(), 0);
    Matrix out(pool.rows(), m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto j = rng.uniform_int(i, pool.cols() - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        out.col(i) = pool.col(idx[static_cast<std::size_t>(i)]);
    }
    return out;
}

Matrix residual_matrix(const EmbeddingDataset& ds, const std::vector<std::size_t>& records, const Vector& center) {
    Matrix out(ds.dim, static_cast<Eigen::Index>(records.size()));
    for (std::size_t j = 0; j < records.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) = ds.records[records[j]].embedding - center;
    return out;
}

}  // namespace

TransportReport base_vs_gauss(const EmbeddingDataset& ds, const PrototypeTable& base_prototypes,
                              const TransportOptions& options) {
    const Eigen::Index m = options.sample_size;
    if (m < 1 || m > kMaxTransportSize) throw ConfigError("transport sample size must lie in [1, 512]");
    const auto base = ds.classes(ClassRole::base);
    const auto novel = ds.classes(ClassRole::novel);
    if (base.empty() || novel.empty()) throw DataError("base_vs_gauss needs base and novel classes");

    std::vector<Matrix> base_res;
    Eigen::Index pooled_n = 0;
    for (ClassId k : base) {
        base_res.push_back(residual_matrix(ds, ds.indices(Split::base_train, k), base_prototypes.at(k)));
        if (base_res.back().cols() < m)
            throw DataError("base class " + std::to_string(k) + " has fewer than M residuals");
        pooled_n += base_res.back().cols();
    }

    Matrix pooled(ds.dim, pooled_n);
    Eigen::Index col = 0;
    for (const auto& r : base_res) {
        pooled.middleCols(col, r.cols()) = r;
        col += r.cols();
    }
    const Vector mu = pooled.rowwise().mean();
    const Matrix centered = pooled.colwise() - mu;
    Matrix cov = centered * centered.transpose() / static_cast<double>(pooled_n);
    cov.diagonal().array() += options.shrinkage_factor * cov.trace() / static_cast<double>(ds.dim);
    const Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericError("base residual covariance is not positive definite");
    const Matrix chol = llt.matrixL();

    const std::size_t draws = options.gauss_draws == 0 ? base.size() : options.gauss_draws;
    TransportReport rep;
    rep.sample_size = m;
    rep.gauss_draws = draws;
    std::size_t closer = 0;
    for (ClassId k : novel) {
        Rng rng(derive_seed(derive_seed(options.seed, "transport"), static_cast<std::uint64_t>(k)));
        std::vector<std::size_t> all = ds.indices(Split::novel_support, k);
        const auto query = ds.indices(Split::novel_query, k);
        all.insert(all.end(), query.begin(), query.end());
        if (static_cast<Eigen::Index>(query.size()) < m)
            throw DataError("novel class " + std::to_string(k) + " has fewer than M query residuals");
        const Matrix novel_res = subsample(residual_matrix(ds, query, mean_embedding(ds, all)), m, rng);

        TransportClass tc;
        tc.novel_class = k;
        tc.base = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < base.size(); ++b) {
            const double w = wasserstein(novel_res, subsample(base_res[b], m, rng));
            if (w < tc.base) {
                tc.base = w;
                tc.nearest_base = base[b];
            }
        }
        tc.gauss = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < draws; ++g) {
            const Matrix sample = (chol * rng.normal_matrix(ds.dim, m)).colwise() + mu;
            tc.gauss = std::min(tc.gauss, wasserstein(novel_res, sample));
        }
        tc.base_closer = tc.base < tc.gauss;
        closer += tc.base_closer ? 1 : 0;
        rep.mean_base += tc.base;
        rep.mean_gauss += tc.gauss;
        rep.classes.push_back(tc);
    }
    const auto n = static_cast<double>(rep.classes.size());
    rep.mean_base /= n;
    rep.mean_gauss /= n;
    rep.fraction_base_closer = static_cast<double>(closer) / n;
    return rep;
}

nlohmann::json to_json(const TransportReport& r) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : r.classes)
        classes.push_back({{"novel_class", c.novel_class},
                           {"base", c.base},
                           {"nearest_base", c.nearest_base},
                           {"gauss", c.gauss},
                           {"base_closer", c.base_closer}});
    return {{"sample_size", r.sample_size},
            {"gauss_draws", r.gauss_draws},
            {"mean_base", r.mean_base},
            {"mean_gauss", r.mean_gauss},
            {"fraction_base_closer", r.fraction_base_closer},
            {"classes", classes}};
}

}  // namespace gen1s
