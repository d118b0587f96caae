#include "doctest.h"
#include "gradcheck.hpp"

#include "gen1s/core/rng.hpp"
#include "gen1s/error.hpp"
#include "gen1s/prototypes.hpp"

using namespace gen1s;

namespace {

EmbeddingDataset split_pool(std::uint64_t seed) {
    Rng rng(seed);
    EmbeddingDataset pool;
    pool.dim = 3;
    pool.n_classes = 4;
    for (ClassId k = 0; k < 4; ++k)
        for (int i = 0; i < 10; ++i)
            pool.records.push_back({(rng.normal_vector(3) + Vector::Constant(3, 4.0 * k)).eval(), k, std::nullopt, 0});
    return apply_split(pool, SplitSpec{3, 1, 2, 0.3, seed, false});
}

}  // namespace

TEST_CASE("prototype is the arithmetic mean of base_train records") {
    const EmbeddingDataset ds = split_pool(1);
    const PrototypeTable t = compute_prototypes(ds, PrototypeSource::base_train);
    CHECK(t.class_ids() == std::vector<ClassId>{0, 1, 2});
    for (ClassId k : t.class_ids()) {
        Vector sum = Vector::Zero(3);
        const auto idx = ds.indices(Split::base_train, k);
        for (auto i : idx) sum += ds.records[i].embedding;
        CHECK((t.at(k) - sum / static_cast<double>(idx.size())).norm() < 1e-12);
        CHECK(t.entry(k).sample_count == idx.size());
    }
}

TEST_CASE("one-shot novel prototype equals its support embedding") {
    Rng rng(2);
    EmbeddingDataset pool;
    pool.dim = 2;
    pool.n_classes = 2;
    for (ClassId k = 0; k < 2; ++k)
        for (int i = 0; i < 6; ++i) pool.records.push_back({rng.normal_vector(2), k, std::nullopt, 0});
    const EmbeddingDataset ds = apply_split(pool, SplitSpec{1, 1, 1, 0.2, 9, false});
    const PrototypeTable t = compute_prototypes(ds, PrototypeSource::novel_support);
    const auto s = ds.indices(Split::novel_support, 1);
    REQUIRE(s.size() == 1);
    CHECK(t.at(1) == ds.records[s[0]].embedding);
}

TEST_CASE("registering all prototypes covers both roles") {
    const EmbeddingDataset ds = split_pool(3);
    const PrototypeTable t = register_all_prototypes(ds);
    CHECK(t.size() == 4);
    const Matrix m = t.as_matrix();
    CHECK(m.cols() == 4);
    CHECK(m.col(3) == t.at(3));
    CHECK_THROWS(t.at(7));
}

TEST_CASE("residual against a candidate prototype") {
    const Vector x = (Vector(3) << 1.0, 2.0, 3.0).finished();
    const Vector c = (Vector(3) << 0.5, 2.0, -1.0).finished();
    const Residual r = residual(x, c, 5);
    CHECK(r.v == (Vector(3) << 0.5, 0.0, 4.0).finished());
    CHECK(r.candidate_class == 5);
    CHECK_THROWS_AS(residual(x, Vector::Zero(2)), ShapeError);
}

TEST_CASE("translating every embedding by a dyadic constant leaves residuals bit-identical") {
    EmbeddingDataset ds = split_pool(4);
    const Vector shift = (Vector(3) << 0.5, -2.0, 8.0).finished();
    EmbeddingDataset moved = ds;
    for (auto& r : moved.records) r.embedding += shift;
    const PrototypeTable a = register_all_prototypes(ds);
    const PrototypeTable b = register_all_prototypes(moved);
    for (ClassId k : a.class_ids()) CHECK((b.at(k) - a.at(k) - shift).norm() < 1e-12);
    for (std::size_t i = 0; i < ds.records.size(); i += 7) {
        const Vector ra = residual(ds.records[i].embedding, a.at(0)).v;
        const Vector rb = residual(moved.records[i].embedding, b.at(0)).v;
        CHECK((ra - rb).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("empty class or empty source is an error") {
    const EmbeddingDataset ds = split_pool(5);
    const ClassId missing[] = {9};
    CHECK_THROWS_AS(compute_prototypes(ds, PrototypeSource::base_train, missing), DataError);
}

TEST_CASE("prototype table save and load") {
    const EmbeddingDataset ds = split_pool(6);
    const PrototypeTable t = register_all_prototypes(ds);
    const auto dir = testing::scratch_dir("protos");
    save_prototypes(t, dir / "p.g1se");
    const PrototypeTable back = load_prototypes(dir / "p.g1se");
    CHECK(back.class_ids() == t.class_ids());
    for (ClassId k : t.class_ids()) {
        CHECK((back.at(k) - t.at(k)).cwiseAbs().maxCoeff() < 1e-5);
        CHECK(back.entry(k).sample_count == t.entry(k).sample_count);
    }
}

TEST_CASE("merge overwrites shared ids") {
    PrototypeTable a(2), b(2);
    a.set(0, {Vector::Ones(2), 1});
    a.set(1, {Vector::Ones(2), 1});
    b.set(1, {Vector::Zero(2), 3});
    a.merge(b);
    CHECK(a.size() == 2);
    CHECK(a.at(1) == Vector::Zero(2));
    CHECK(a.entry(1).sample_count == 3);
}
