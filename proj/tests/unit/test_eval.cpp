#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"

#include "gen1s/analysis.hpp"
#include "gen1s/error.hpp"
#include "gen1s/eval.hpp"
#include "gen1s/synth.hpp"
#include "gen1s/transport.hpp"

using namespace gen1s;

namespace {

// Uniformly random label, reproducible per query key.
class RandomClassifier final : public Classifier {
public:
    explicit RandomClassifier(std::vector<ClassId> ids) : ids_(std::move(ids)) {}
    ClassifierKind kind() const override { return ClassifierKind::ncm_euclidean; }
    Prediction predict(const Vector&, std::uint64_t key) const override {
        Rng rng(derive_seed(99, key));
        Vector s = Vector::Zero(static_cast<Eigen::Index>(ids_.size()));
        s[rng.uniform_int(0, static_cast<std::int64_t>(ids_.size()) - 1)] = 1.0;
        return argmax_prediction(ids_, s);
    }
    std::vector<ClassId> classes() const override { return ids_; }

private:
    std::vector<ClassId> ids_;
};

// Fixed answer per record index.
class TableClassifier final : public Classifier {
public:
    explicit TableClassifier(std::map<std::uint64_t, ClassId> answers) : answers_(std::move(answers)) {}
    ClassifierKind kind() const override { return ClassifierKind::ncm_cosine; }
    Prediction predict(const Vector&, std::uint64_t key) const override {
        Vector s = Vector::Zero(3);
        s[answers_.at(key)] = 1.0;
        return argmax_prediction({0, 1, 2}, s);
    }
    std::vector<ClassId> classes() const override { return {0, 1, 2}; }

private:
    std::map<std::uint64_t, ClassId> answers_;
};

double brute_force_assignment(const Matrix& cost) {
    std::vector<int> perm(static_cast<std::size_t>(cost.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) c += cost(static_cast<Eigen::Index>(i), perm[i]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("BCR, NCR and AVG from a known set of answers") {
    EmbeddingDataset ds;
    ds.dim = 1;
    ds.n_classes = 3;
    ds.shots = 1;
    ds.registry = {{0, ClassRole::base}, {1, ClassRole::base}, {2, ClassRole::novel}};
    auto add = [&](ClassId k, Split s) { ds.records.push_back({Vector::Zero(1), k, s, 0}); };
    add(0, Split::base_test);    // 0
    add(0, Split::base_test);    // 1
    add(1, Split::base_test);    // 2
    add(1, Split::base_test);    // 3
    add(2, Split::novel_support);  // 4
    add(2, Split::novel_query);  // 5
    add(2, Split::novel_query);  // 6
    add(0, Split::base_train);   // 7
    const TableClassifier clf({{0, 0}, {1, 0}, {2, 1}, {3, 2}, {5, 2}, {6, 0}});
    std::vector<PredictionRow> rows;
    const EvalReport r = evaluate(clf, ds, 4, &rows);
    CHECK(r.bcr == doctest::Approx(0.75));
    CHECK(r.ncr == doctest::Approx(0.5));
    CHECK(r.avg == doctest::Approx(0.625));
    CHECK(r.n_base_test == 4);
    CHECK(r.n_novel_query == 2);
    CHECK(r.per_class_accuracy.at(1) == doctest::Approx(0.5));
    CHECK(r.confusion.at({1, 2}) == 1);
    CHECK(r.confusion.at({2, 0}) == 1);
    CHECK(rows.size() == 6);
    CHECK(rows[4].query_index == 5);

    const auto j = to_json(r);
    CHECK(j["classifier"] == "ncm_cosine");
    CHECK(j["per_class"]["2"]["count"] == 2);
}

TEST_CASE("evaluation needs both splits") {
    EmbeddingDataset ds;
    ds.dim = 1;
    ds.n_classes = 1;
    ds.registry = {{0, ClassRole::base}};
    ds.records.push_back({Vector::Zero(1), 0, Split::base_test, 0});
    CHECK_THROWS_AS(evaluate(RandomClassifier({0}), ds), DataError);
}

TEST_CASE("a uniformly random classifier scores 1/K within three standard errors") {
    const SynthSpec spec = synth_preset("fig1-bimodal", 3);
    const EmbeddingDataset ds = apply_split(generate(spec).pool, synth_split(spec));
    const RandomClassifier clf(ds.classes());
    const EvalReport r = evaluate(clf, ds);
    const double p = 1.0 / static_cast<double>(ds.classes().size());
    CHECK(std::abs(r.ncr - p) < 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(r.n_novel_query)));
    CHECK(std::abs(r.bcr - p) < 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(r.n_base_test)));
}

TEST_CASE("assignment matches brute force on small matrices") {
    Rng rng(1);
    for (int trial = 0; trial < 60; ++trial) {
        const Eigen::Index n = 1 + trial % 6;
        Matrix cost = rng.normal_matrix(n, n).cwiseAbs();
        if (trial % 5 == 0) cost = cost.array().round();  // many ties
        const Assignment a = solve_assignment(cost);
        CHECK(a.cost == doctest::Approx(brute_force_assignment(cost)));
        std::vector<Eigen::Index> cols = a.column_of_row;
        std::sort(cols.begin(), cols.end());
        for (Eigen::Index i = 0; i < n; ++i) CHECK(cols[static_cast<std::size_t>(i)] == i);
    }
    CHECK_THROWS_AS(solve_assignment(Matrix::Zero(2, 3)), ShapeError);
}

TEST_CASE("assignment handles the maximum transport size") {
    Rng rng(2);
    const Matrix a = rng.normal_matrix(4, kMaxTransportSize);
    Matrix b = a;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(kMaxTransportSize));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    for (Eigen::Index i = 0; i < kMaxTransportSize; ++i) b.col(perm[static_cast<std::size_t>(i)]) = a.col(i);
    CHECK(wasserstein(a, b) < 1e-12);
    CHECK_THROWS_AS(wasserstein(rng.normal_matrix(2, 513), rng.normal_matrix(2, 513)), ConfigError);
}

TEST_CASE("wasserstein of a translated set is the translation length") {
    Rng rng(3);
    const Matrix a = rng.normal_matrix(3, 40);
    const Vector s = (Vector(3) << 0.3, -1.2, 2.0).finished();
    CHECK(wasserstein(a, a.colwise() + s) == doctest::Approx(s.norm()).epsilon(1e-12));
}

TEST_CASE("wasserstein is a symmetric metric on equal-size point sets") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = rng.normal_matrix(2, 12), b = rng.normal_matrix(2, 12) * 2.0, c = rng.normal_matrix(2, 12);
        const double ab = wasserstein(a, b), ba = wasserstein(b, a);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab <= wasserstein(a, c) + wasserstein(c, b) + 1e-12);
        CHECK(wasserstein(a, a) == 0.0);
    }
}

TEST_CASE("base versus Gaussian transport report") {
    SynthSpec spec = synth_preset("fig1-bimodal", 5);
    spec.samples_per_class = 120;
    const EmbeddingDataset ds = apply_split(generate(spec).pool, synth_split(spec));
    const PrototypeTable protos = compute_prototypes(ds, PrototypeSource::base_train);
    TransportOptions opts;
    opts.sample_size = 32;
    opts.seed = 1;
    const TransportReport a = base_vs_gauss(ds, protos, opts);
    const TransportReport b = base_vs_gauss(ds, protos, opts);
    REQUIRE(a.classes.size() == 4);
    CHECK(a.gauss_draws == 8);
    for (std::size_t i = 0; i < a.classes.size(); ++i) {
        CHECK(a.classes[i].base == b.classes[i].base);
        CHECK(a.classes[i].gauss == b.classes[i].gauss);
        CHECK(a.classes[i].base > 0.0);
        CHECK(a.classes[i].base_closer == (a.classes[i].base < a.classes[i].gauss));
        CHECK(ds.registry.at(a.classes[i].nearest_base) == ClassRole::base);
    }
    CHECK(to_json(a)["classes"].size() == 4);

    opts.sample_size = 200;
    CHECK_THROWS_AS(base_vs_gauss(ds, protos, opts), DataError);
    opts.sample_size = 0;
    CHECK_THROWS_AS(base_vs_gauss(ds, protos, opts), ConfigError);
}

TEST_CASE("histogram binning") {
    Histogram h{0.0, 1.0, std::vector<std::size_t>(4, 0)};
    for (double v : {0.0, 0.1, 0.25, 0.5, 0.99, 1.0, 1.5, -0.2}) h.add(v);
    CHECK(h.counts == std::vector<std::size_t>{3, 1, 1, 3});
    CHECK(h.total() == 8);
    const std::string csv = histogram_csv(h);
    CHECK(csv.rfind("bin_lo,bin_hi,count,density\n", 0) == 0);
}

TEST_CASE("residual norm histograms split correct and incorrect prototypes") {
    EmbeddingDataset ds;
    ds.dim = 1;
    ds.n_classes = 2;
    ds.records = {{Vector::Constant(1, 0.0), 0, std::nullopt, 0}, {Vector::Constant(1, 4.0), 1, std::nullopt, 0}};
    PrototypeTable t(1);
    t.set(0, {Vector::Constant(1, 1.0), 1});
    t.set(1, {Vector::Constant(1, 3.0), 1});
    const ResidualNormReport r = residual_norm_histogram(ds, t, 3);
    CHECK(r.mean_correct == doctest::Approx(1.0));
    CHECK(r.mean_incorrect == doctest::Approx(3.0));
    CHECK(r.correct.hi == 3.0);
    CHECK(r.correct.counts == std::vector<std::size_t>{0, 2, 0});
    CHECK(r.incorrect.counts == std::vector<std::size_t>{0, 0, 2});
    CHECK(r.overlap == doctest::Approx(0.0));
}

TEST_CASE("PCA recovers a dominant direction with a fixed sign") {
    Rng rng(6);
    const Vector dir = (Vector(3) << -1.0, 2.0, 2.0).finished() / 3.0;
    Matrix x(3, 200);
    for (Eigen::Index j = 0; j < 200; ++j) x.col(j) = 5.0 * rng.normal() * dir + 0.05 * rng.normal_vector(3);
    x.colwise() += Vector::Constant(3, 7.0);
    const PcaResult p = pca_project(x, 2);
    CHECK(std::abs(p.components.col(0).dot(dir)) > 0.999);
    CHECK(p.components.col(0)[1] > 0.0);
    CHECK(p.explained_variance_ratio[0] > 0.99);
    CHECK(std::abs(p.components.col(0).dot(p.components.col(1))) < 1e-10);
    CHECK(p.coordinates.rows() == 2);
    CHECK(std::abs(p.coordinates.row(0).mean()) < 1e-10);
    CHECK_THROWS_AS(pca_project(x, 4), ConfigError);
    CHECK_THROWS_AS(pca_project(x.leftCols(1), 1), DataError);
}

TEST_CASE("SVG output is a self-contained document") {
    ScatterSeries s{"a", Matrix::Random(2, 5)};
    const std::string svg = svg_scatter({s}, "title");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    Histogram h{0.0, 1.0, {1, 2, 3}};
    CHECK(svg_histograms({{"h", h}}, "t").find("<rect") != std::string::npos);
}
