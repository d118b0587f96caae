#include "gen1s/core/rng.hpp"

#include <cmath>
#include <string>

#include "gen1s/error.hpp"

namespace gen1s {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
    return splitmix64(splitmix64(root) ^ fnv1a(stream));
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    return splitmix64(splitmix64(root) + splitmix64(index ^ 0x5851f42d4c957f2dULL));
}

double Rng::normal() { return normal_(engine_); }

double Rng::uniform() { return std::generate_canonical<double, 53>(engine_); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ConfigError("uniform_int: empty range");
    std::uniform_int_distribution<std::int64_t> dist(lo, hi);
    return dist(engine_);
}

Vector Rng::normal_vector(Eigen::Index dim) {
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal();
    return v;
}

Matrix Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    // column-major fill: one column per sample
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
}

Vector make_vector(std::span<const double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw DataError("make_vector: non-finite entry at index " + std::to_string(i));
        v[static_cast<Eigen::Index>(i)] = values[i];
    }
    return v;
}

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_same_dim(const Vector& a, const Vector& b, const char* where) {
    if (a.size() != b.size())
        throw ShapeError(std::string(where) + ": dimension mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
}

const char* to_string(LoadErrorKind kind) {
    switch (kind) {
        case LoadErrorKind::io: return "io";
        case LoadErrorKind::bad_magic: return "bad_magic";
        case LoadErrorKind::unsupported_version: return "unsupported_version";
        case LoadErrorKind::truncated: return "truncated";
        case LoadErrorKind::checksum_mismatch: return "checksum_mismatch";
        case LoadErrorKind::non_finite: return "non_finite";
        case LoadErrorKind::invalid_class_id: return "invalid_class_id";
        case LoadErrorKind::malformed: return "malformed";
    }
    return "unknown";
}

}  // namespace gen1s
