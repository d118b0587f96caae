#include "gen1s/synth.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/QR>

#include "gen1s/core/rng.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

void SynthSpec::validate() const {
    if (dim < 1) throw ConfigError("synth: dim must be positive");
    if (n_base < 1 || n_novel < 1) throw ConfigError("synth: need at least one base and one novel class");
    if (samples_per_class < 2) throw ConfigError("synth: need at least two samples per class");
    if (modes.empty()) throw ConfigError("synth: residual mixture is empty");
    double wsum = 0.0, max_scale = 0.0;
    for (const auto& m : modes) {
        if (m.offset.size() != dim) throw ConfigError("synth: mode offset dimension mismatch");
        if (!(m.scale > 0.0) || !(m.weight > 0.0)) throw ConfigError("synth: mode scale and weight must be positive");
        wsum += m.weight;
        max_scale = std::max(max_scale, m.scale);
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw ConfigError("synth: mode weights must sum to 1");
    if (!(prototype_dispersion > 4.0 * max_scale))
        throw ConfigError("synth: prototype dispersion must exceed 4x the largest mode scale");
    if (!(prototype_scale > 0.0)) throw ConfigError("synth: prototype scale must be positive");
}

SynthSpec synth_preset(std::string_view name, std::uint64_t seed) {
    SynthSpec s;
    s.seed = seed;
    const Vector u = Vector::Ones(s.dim) / std::sqrt(static_cast<double>(s.dim));
    if (name == "fig1-bimodal" || name == "fig1-null") {
        s.modes = {{3.0 * u, 0.5, 0.5}, {-3.0 * u, 0.5, 0.5}};
        s.shared_structure = name == "fig1-bimodal";
        return s;
    }
    if (name == "unimodal") {
        s.n_novel = 40;
        s.modes = {{Vector::Zero(s.dim), 0.5, 1.0}};
        return s;
    }
    throw ConfigError("unknown synth preset '" + std::string(name) + "'");
}

namespace {

Matrix random_rotation(Eigen::Index d, Rng& rng) {
    const Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(d, d));
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR();
    for (Eigen::Index j = 0; j < d; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

std::size_t pick_mode(const std::vector<ResidualMode>& modes, Rng& rng) {
    double u = rng.uniform();
    for (std::size_t m = 0; m + 1 < modes.size(); ++m) {
        if (u < modes[m].weight) return m;
        u -= modes[m].weight;
    }
    return modes.size() - 1;
}

Vector draw_residual(const std::vector<ResidualMode>& modes, Eigen::Index d, Rng& rng) {
    const ResidualMode& m = modes[pick_mode(modes, rng)];
    return m.offset + m.scale * rng.normal_vector(d);
}

Vector to_binary32(const Vector& v) { return v.cast<float>().cast<double>(); }

Vector expected_residual(const std::vector<ResidualMode>& modes) {
    Vector mean = Vector::Zero(modes.front().offset.size());
    for (const auto& m : modes) mean += m.weight * m.offset;
    return mean;
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
    spec.validate();
    const Eigen::Index d = spec.dim;
    const std::uint32_t K = spec.n_classes();
    SynthResult out;
    out.oracle.spec = spec;
    out.oracle.prototypes.resize(d, K);

    Rng proto_rng(spec.seed, "synth-prototypes");
    constexpr int kMaxAttempts = 10000;
    for (std::uint32_t k = 0; k < K; ++k) {
        int attempt = 0;
        for (;; ++attempt) {
            if (attempt == kMaxAttempts)
                throw ConfigError("synth: prototype dispersion infeasible for this dim and class count");
            const Vector mu = spec.prototype_scale * proto_rng.normal_vector(d);
            bool ok = true;
            for (std::uint32_t j = 0; j < k && ok; ++j)
                ok = (mu - out.oracle.prototypes.col(j)).norm() >= spec.prototype_dispersion;
            if (ok) {
                out.oracle.prototypes.col(k) = mu;
                break;
            }
        }
    }

    Rng mix_rng(spec.seed, "synth-mixtures");
    for (std::uint32_t k = 0; k < K; ++k) {
        if (spec.shared_structure) {
            out.oracle.class_modes.push_back(spec.modes);
            continue;
        }
        const Matrix rot = random_rotation(d, mix_rng);
        std::vector<ResidualMode> modes = spec.modes;
        for (auto& m : modes) m.offset = rot * m.offset;
        out.oracle.class_modes.push_back(std::move(modes));
    }

    Rng sample_rng(spec.seed, "synth-samples");
    EmbeddingDataset& pool = out.pool;
    pool.dim = d;
    pool.n_classes = K;
    pool.manifest.source = "synth";
    for (std::uint32_t k = 0; k < K; ++k) {
        for (std::uint32_t i = 0; i < spec.samples_per_class; ++i) {
            Record r;
            r.embedding = to_binary32(out.oracle.prototypes.col(k) + draw_residual(out.oracle.class_modes[k], d, sample_rng));
            r.class_id = k;
            r.origin = pool.records.size();
            pool.records.push_back(std::move(r));
        }
    }
    return out;
}

SplitSpec synth_split(const SynthSpec& spec, std::uint32_t shots) {
    SplitSpec s;
    s.n_base_classes = spec.n_base;
    s.n_novel_classes = spec.n_novel;
    s.shots = shots;
    s.seed = spec.seed;
    return s;
}

namespace {

double log_mixture_density(const std::vector<ResidualMode>& modes, const Vector& v) {
    const double d = static_cast<double>(v.size());
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    for (const auto& m : modes) {
        const double s2 = m.scale * m.scale;
        const double t = std::log(m.weight) - (v - m.offset).squaredNorm() / (2.0 * s2) -
                         0.5 * d * std::log(2.0 * std::numbers::pi * s2);
        terms.push_back(t);
        best = std::max(best, t);
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - best);
    return best + std::log(sum);
}

}  // namespace

OraclePosterior bayes_oracle(const SynthOracle& oracle, const Vector& x, std::span<const ClassId> candidates) {
    if (x.size() != oracle.prototypes.rows()) throw ShapeError("bayes_oracle: dimension mismatch");
    OraclePosterior out;
    if (candidates.empty()) {
        for (ClassId k = 0; k < oracle.prototypes.cols(); ++k) out.classes.push_back(k);
    } else {
        out.classes.assign(candidates.begin(), candidates.end());
    }
    Vector logp(static_cast<Eigen::Index>(out.classes.size()));
    for (std::size_t i = 0; i < out.classes.size(); ++i) {
        const ClassId k = out.classes[i];
        if (k >= oracle.prototypes.cols()) throw DataError("bayes_oracle: unknown class");
        logp[static_cast<Eigen::Index>(i)] =
            log_mixture_density(oracle.class_modes[k], x - oracle.prototypes.col(static_cast<Eigen::Index>(k)));
    }
    Eigen::Index arg = 0;
    const double top = logp.maxCoeff(&arg);
    out.posterior = (logp.array() - top).exp();
    out.posterior /= out.posterior.sum();
    out.map = out.classes[static_cast<std::size_t>(arg)];
    return out;
}

double bayes_oracle_accuracy(const SynthOracle& oracle, const EmbeddingDataset& ds, Split split) {
    const auto idx = ds.indices(split);
    if (idx.empty()) throw DataError("bayes_oracle_accuracy: split is empty");
    const auto classes = ds.classes();
    std::size_t hits = 0;
    for (std::size_t i : idx)
        hits += bayes_oracle(oracle, ds.records[i].embedding, classes).map == ds.records[i].class_id ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(idx.size());
}

double oracle_ncm_accuracy(const SynthOracle& oracle, std::uint32_t shots, std::size_t trials,
                           std::size_t queries_per_class, std::uint64_t seed) {
    if (shots < 1 || trials < 1 || queries_per_class < 1) throw ConfigError("oracle_ncm_accuracy: counts must be >= 1");
    const SynthSpec& spec = oracle.spec;
    const Eigen::Index d = spec.dim;
    const std::uint32_t K = spec.n_classes();
    Rng rng(seed, "oracle-ncm");
    Matrix centers(d, K);
    for (std::uint32_t k = 0; k < spec.n_base; ++k)
        centers.col(k) = oracle.prototypes.col(k) + expected_residual(oracle.class_modes[k]);

    std::size_t hits = 0, total = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::uint32_t k = spec.n_base; k < K; ++k) {
            Vector c = Vector::Zero(d);
            for (std::uint32_t s = 0; s < shots; ++s) c += draw_residual(oracle.class_modes[k], d, rng);
            centers.col(k) = oracle.prototypes.col(k) + c / static_cast<double>(shots);
        }
        for (std::uint32_t k = spec.n_base; k < K; ++k) {
            for (std::size_t q = 0; q < queries_per_class; ++q) {
                const Vector x = oracle.prototypes.col(k) + draw_residual(oracle.class_modes[k], d, rng);
                Eigen::Index arg = 0;
                (centers.colwise() - x).colwise().squaredNorm().minCoeff(&arg);
                hits += static_cast<std::uint32_t>(arg) == k ? 1 : 0;
                ++total;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

namespace {

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const nlohmann::json& j) {
    const auto xs = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

nlohmann::json modes_json(const std::vector<ResidualMode>& modes) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& m : modes) out.push_back({{"offset", vec_json(m.offset)}, {"scale", m.scale}, {"weight", m.weight}});
    return out;
}

std::vector<ResidualMode> json_modes(const nlohmann::json& j) {
    std::vector<ResidualMode> out;
    for (const auto& m : j) out.push_back({json_vec(m.at("offset")), m.at("scale").get<double>(), m.at("weight").get<double>()});
    return out;
}

}  // namespace

nlohmann::json to_json(const SynthOracle& o) {
    const SynthSpec& s = o.spec;
    nlohmann::json protos = nlohmann::json::array();
    for (Eigen::Index k = 0; k < o.prototypes.cols(); ++k) protos.push_back(vec_json(o.prototypes.col(k)));
    nlohmann::json class_modes = nlohmann::json::array();
    for (const auto& m : o.class_modes) class_modes.push_back(modes_json(m));
    return {{"spec",
             {{"dim", s.dim},
              {"n_base", s.n_base},
              {"n_novel", s.n_novel},
              {"samples_per_class", s.samples_per_class},
              {"prototype_dispersion", s.prototype_dispersion},
              {"prototype_scale", s.prototype_scale},
              {"modes", modes_json(s.modes)},
              {"shared_structure", s.shared_structure},
              {"seed", s.seed}}},
            {"prototypes", protos},
            {"class_modes", class_modes}};
}

SynthOracle oracle_from_json(const nlohmann::json& j) {
    SynthOracle o;
    const auto& s = j.at("spec");
    o.spec.dim = s.at("dim").get<Eigen::Index>();
    o.spec.n_base = s.at("n_base").get<std::uint32_t>();
    o.spec.n_novel = s.at("n_novel").get<std::uint32_t>();
    o.spec.samples_per_class = s.at("samples_per_class").get<std::uint32_t>();
    o.spec.prototype_dispersion = s.at("prototype_dispersion").get<double>();
    o.spec.prototype_scale = s.at("prototype_scale").get<double>();
    o.spec.modes = json_modes(s.at("modes"));
    o.spec.shared_structure = s.at("shared_structure").get<bool>();
    o.spec.seed = s.at("seed").get<std::uint64_t>();
    const auto& protos = j.at("prototypes");
    o.prototypes.resize(o.spec.dim, static_cast<Eigen::Index>(protos.size()));
    for (std::size_t k = 0; k < protos.size(); ++k) o.prototypes.col(static_cast<Eigen::Index>(k)) = json_vec(protos[k]);
    for (const auto& m : j.at("class_modes")) o.class_modes.push_back(json_modes(m));
    if (o.class_modes.size() != protos.size()) throw DataError("oracle: class mode list does not match prototypes");
    return o;
}

}  // namespace gen1s
