#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>

#include "gen1s/data/dataset.hpp"
#include "gen1s/heads.hpp"
#include "gen1s/prototypes.hpp"

namespace gen1s {

enum class ClassifierKind { gen1s_vae, gen1s_diffusion, ncm_euclidean, ncm_cosine, simpleshot, slda, slda_fixed_sigma };

ClassifierKind parse_classifier_kind(std::string_view name);
const char* to_string(ClassifierKind kind);

struct Prediction {
    ClassId predicted = 0;
    std::vector<ClassId> classes;  // ascending; scores[i] belongs to classes[i]
    Vector scores;
    bool tie_broken = false;
};

// Highest score wins; among exactly equal maxima the lowest class id wins and tie_broken is set.
// NaN scores never win.
Prediction argmax_prediction(std::vector<ClassId> classes, Vector scores);

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual ClassifierKind kind() const = 0;
    // `query_key` selects the inference-noise stream for stochastic heads; ignored otherwise.
    virtual Prediction predict(const Vector& x, std::uint64_t query_key = 0) const = 0;
    virtual std::vector<ClassId> classes() const = 0;
};

// Algorithm 2: score x - c_k under the frozen head for every candidate k with shared noise.
class Gen1sClassifier final : public Classifier {
public:
    Gen1sClassifier(GenerativeHead head, PrototypeTable prototypes, std::uint64_t seed);

    ClassifierKind kind() const override;
    Prediction predict(const Vector& x, std::uint64_t query_key = 0) const override;
    std::vector<ClassId> classes() const override { return ids_; }

    const GenerativeHead& head() const { return head_; }
    const PrototypeTable& prototypes() const { return prototypes_; }
    // Columns pushed through the head network so far (candidates x noise draws).
    std::uint64_t head_evaluations() const { return evaluations_.load(); }

private:
    GenerativeHead head_;
    PrototypeTable prototypes_;
    std::vector<ClassId> ids_;
    Matrix centers_;
    std::uint64_t noise_root_;
    mutable std::atomic<std::uint64_t> evaluations_{0};
};

enum class NcmMetric { euclidean, cosine };

class NcmClassifier final : public Classifier {
public:
    NcmClassifier(PrototypeTable prototypes, NcmMetric metric);

    ClassifierKind kind() const override;
    Prediction predict(const Vector& x, std::uint64_t query_key = 0) const override;
    std::vector<ClassId> classes() const override { return ids_; }

private:
    NcmMetric metric_;
    std::vector<ClassId> ids_;
    Matrix centers_;
};

// Subtract the base mean and L2-normalize both queries and prototypes, then euclidean NCM.
// Vectors equal to the base mean stay unnormalized.
class SimpleShotClassifier final : public Classifier {
public:
    SimpleShotClassifier(const PrototypeTable& prototypes, Vector base_mean);

    ClassifierKind kind() const override { return ClassifierKind::simpleshot; }
    Prediction predict(const Vector& x, std::uint64_t query_key = 0) const override;
    std::vector<ClassId> classes() const override { return ids_; }
    Vector transform(const Vector& u) const;

private:
    Vector base_mean_;
    std::vector<ClassId> ids_;
    Matrix centers_;
};

// Class means with one covariance shared across classes.
struct SldaState {
    Eigen::Index dim = 0;
    std::map<ClassId, Vector> means;
    std::map<ClassId, std::size_t> counts;
    Matrix covariance;           // before shrinkage
    std::size_t n_updates = 0;   // samples absorbed into `covariance`
    double shrinkage_factor = 1e-4;

    // covariance + (shrinkage_factor * trace / d) I
    Matrix regularized_covariance() const;
};

// Pooled within-class covariance over base_train (normalized by sample count).
SldaState slda_fit(const EmbeddingDataset& ds, double shrinkage_factor = 1e-4);

// Streaming update with one labeled sample. With update_covariance the shared covariance takes the
// rank-1 step against the class's current mean (zero for an unseen class) before the mean moves.
void slda_update(SldaState& state, const Vector& x, ClassId k, bool update_covariance);

class SldaClassifier final : public Classifier {
public:
    SldaClassifier(SldaState state, bool fixed_sigma);

    ClassifierKind kind() const override;
    // score_k = c_k' S^-1 x - c_k' S^-1 c_k / 2
    Prediction predict(const Vector& x, std::uint64_t query_key = 0) const override;
    std::vector<ClassId> classes() const override { return ids_; }
    const SldaState& state() const { return state_; }

private:
    SldaState state_;
    bool fixed_sigma_;
    std::vector<ClassId> ids_;
    Matrix weights_;  // S^-1 C, one column per class
    Vector bias_;
};

// Builds a classifier registered for every class of a split dataset: base prototypes over base_train,
// novel ones from the support set. Gen1S kinds need a head of the matching family.
std::unique_ptr<Classifier> build_classifier(ClassifierKind kind, const EmbeddingDataset& ds,
                                             const GenerativeHead* head, std::uint64_t seed);

struct PredictionRow {
    std::size_t query_index = 0;
    ClassId true_class = 0;
    Prediction prediction;
};

// Header: query_index,true_class,predicted_class[,score_<id>...]
std::string predictions_csv(const std::vector<PredictionRow>& rows, bool with_scores);

}  // namespace gen1s
