#include "gen1s/classifier.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

NcmClassifier::NcmClassifier(PrototypeTable prototypes, NcmMetric metric)
    : metric_(metric), ids_(prototypes.class_ids()), centers_(prototypes.as_matrix()) {
    if (ids_.empty()) throw DataError("ncm classifier needs at least one prototype");
}

ClassifierKind NcmClassifier::kind() const {
    return metric_ == NcmMetric::euclidean ? ClassifierKind::ncm_euclidean : ClassifierKind::ncm_cosine;
}

Prediction NcmClassifier::predict(const Vector& x, std::uint64_t) const {
    if (x.size() != centers_.rows()) throw ShapeError("ncm: query dimension mismatch");
    Vector scores(centers_.cols());
    if (metric_ == NcmMetric::euclidean) {
        for (Eigen::Index k = 0; k < centers_.cols(); ++k) scores[k] = -(x - centers_.col(k)).squaredNorm();
    } else {
        const double nx = x.norm();
        for (Eigen::Index k = 0; k < centers_.cols(); ++k) {
            const double nc = centers_.col(k).norm();
            scores[k] = (nx == 0.0 || nc == 0.0) ? 0.0 : x.dot(centers_.col(k)) / (nx * nc);
        }
    }
    return argmax_prediction(ids_, std::move(scores));
}

SimpleShotClassifier::SimpleShotClassifier(const PrototypeTable& prototypes, Vector base_mean)
    : base_mean_(std::move(base_mean)), ids_(prototypes.class_ids()) {
    if (ids_.empty()) throw DataError("simpleshot classifier needs at least one prototype");
    if (base_mean_.size() != prototypes.dim()) throw ShapeError("simpleshot: base mean dimension mismatch");
    const Matrix raw = prototypes.as_matrix();
    centers_.resize(raw.rows(), raw.cols());
    for (Eigen::Index k = 0; k < raw.cols(); ++k) centers_.col(k) = transform(raw.col(k));
}

Vector SimpleShotClassifier::transform(const Vector& u) const {
    Vector centered = u - base_mean_;
    const double n = centered.norm();
    if (n > 0.0) centered /= n;
    return centered;
}

Prediction SimpleShotClassifier::predict(const Vector& x, std::uint64_t) const {
    if (x.size() != centers_.rows()) throw ShapeError("simpleshot: query dimension mismatch");
    const Vector t = transform(x);
    Vector scores(centers_.cols());
    for (Eigen::Index k = 0; k < centers_.cols(); ++k) scores[k] = -(t - centers_.col(k)).squaredNorm();
    return argmax_prediction(ids_, std::move(scores));
}

std::unique_ptr<Classifier> build_classifier(ClassifierKind kind, const EmbeddingDataset& ds,
                                             const GenerativeHead* head, std::uint64_t seed) {
    if (!ds.is_split()) throw DataError("classifiers need a split dataset");
    switch (kind) {
        case ClassifierKind::gen1s_vae:
        case ClassifierKind::gen1s_diffusion: {
            if (!head) throw ConfigError(std::string(to_string(kind)) + " needs a trained head");
            const bool want_vae = kind == ClassifierKind::gen1s_vae;
            if (want_vae != std::holds_alternative<VaeHead>(*head))
                throw ConfigError(std::string(to_string(kind)) + " was given a " + head_kind(*head) + " head");
            return std::make_unique<Gen1sClassifier>(*head, register_all_prototypes(ds), seed);
        }
        case ClassifierKind::ncm_euclidean:
            return std::make_unique<NcmClassifier>(register_all_prototypes(ds), NcmMetric::euclidean);
        case ClassifierKind::ncm_cosine:
            return std::make_unique<NcmClassifier>(register_all_prototypes(ds), NcmMetric::cosine);
        case ClassifierKind::simpleshot:
            return std::make_unique<SimpleShotClassifier>(register_all_prototypes(ds),
                                                          mean_embedding(ds, ds.indices(Split::base_train)));
        case ClassifierKind::slda:
        case ClassifierKind::slda_fixed_sigma: {
            const bool fixed = kind == ClassifierKind::slda_fixed_sigma;
            SldaState state = slda_fit(ds);
            for (std::size_t i : ds.indices(Split::novel_support))
                slda_update(state, ds.records[i].embedding, ds.records[i].class_id, !fixed);
            return std::make_unique<SldaClassifier>(std::move(state), fixed);
        }
    }
    throw ConfigError("unhandled classifier kind");
}

}  // namespace gen1s
