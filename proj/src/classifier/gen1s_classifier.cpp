#include "gen1s/classifier.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

Gen1sClassifier::Gen1sClassifier(GenerativeHead head, PrototypeTable prototypes, std::uint64_t seed)
    : head_(std::move(head)),
      prototypes_(std::move(prototypes)),
      ids_(prototypes_.class_ids()),
      centers_(prototypes_.as_matrix()),
      noise_root_(derive_seed(seed, "inference-noise")) {
    if (prototypes_.empty()) throw DataError("gen1s classifier needs at least one prototype");
    if (prototypes_.dim() != head_dim(head_)) throw ShapeError("prototype and head dimensions differ");
}

ClassifierKind Gen1sClassifier::kind() const {
    return std::holds_alternative<VaeHead>(head_) ? ClassifierKind::gen1s_vae : ClassifierKind::gen1s_diffusion;
}

Prediction Gen1sClassifier::predict(const Vector& x, std::uint64_t query_key) const {
    if (x.size() != centers_.rows()) throw ShapeError("gen1s: query dimension mismatch");
    const Matrix residuals = (-centers_).colwise() + x;
    Rng rng(derive_seed(noise_root_, query_key));
    Vector scores;
    if (const auto* v = std::get_if<VaeHead>(&head_)) {
        const auto eps = draw_vae_noise(*v, rng);
        scores = vae_score_batch(*v, residuals, centers_, eps);
        evaluations_ += static_cast<std::uint64_t>(centers_.cols()) * eps.size();
    } else {
        const auto& d = std::get<DiffusionHead>(head_);
        const InferenceNoise noise = draw_inference_noise(d, rng);
        scores = diffusion_score_batch(d, residuals, centers_, noise);
        evaluations_ += static_cast<std::uint64_t>(centers_.cols()) * noise.eps.size();
    }
    return argmax_prediction(ids_, std::move(scores));
}

}  // namespace gen1s
