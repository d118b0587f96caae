#include <cmath>
#include <sstream>

#include "gen1s/classifier.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

namespace {

constexpr std::pair<ClassifierKind, const char*> kKindNames[] = {
    {ClassifierKind::gen1s_vae, "gen1s_vae"},
    {ClassifierKind::gen1s_diffusion, "gen1s_diffusion"},
    {ClassifierKind::ncm_euclidean, "ncm_euclidean"},
    {ClassifierKind::ncm_cosine, "ncm_cosine"},
    {ClassifierKind::simpleshot, "simpleshot"},
    {ClassifierKind::slda, "slda"},
    {ClassifierKind::slda_fixed_sigma, "slda_fixed_sigma"},
};

}  // namespace

ClassifierKind parse_classifier_kind(std::string_view name) {
    for (const auto& [kind, text] : kKindNames)
        if (name == text) return kind;
    throw ConfigError("unknown classifier '" + std::string(name) + "'");
}

const char* to_string(ClassifierKind kind) {
    for (const auto& [k, text] : kKindNames)
        if (k == kind) return text;
    return "?";
}

Prediction argmax_prediction(std::vector<ClassId> classes, Vector scores) {
    if (classes.empty() || static_cast<Eigen::Index>(classes.size()) != scores.size())
        throw ShapeError("argmax: scores and classes disagree");
    Prediction p;
    std::optional<std::size_t> best;
    std::size_t n_best = 0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const double s = scores[static_cast<Eigen::Index>(i)];
        if (std::isnan(s)) continue;
        if (!best) {
            best = i;
            n_best = 1;
            continue;
        }
        const double b = scores[static_cast<Eigen::Index>(*best)];
        if (s > b) {
            best = i;
            n_best = 1;
        } else if (s == b) {
            ++n_best;
            if (classes[i] < classes[*best]) best = i;
        }
    }
    if (!best) throw NumericError("argmax: every score is NaN");
    p.predicted = classes[*best];
    p.tie_broken = n_best > 1;
    p.classes = std::move(classes);
    p.scores = std::move(scores);
    return p;
}

std::string predictions_csv(const std::vector<PredictionRow>& rows, bool with_scores) {
    std::ostringstream out;
    out.precision(17);
    out << "query_index,true_class,predicted_class";
    if (with_scores && !rows.empty())
        for (ClassId k : rows.front().prediction.classes) out << ",score_" << k;
    out << '\n';
    for (const auto& r : rows) {
        out << r.query_index << ',' << r.true_class << ',' << r.prediction.predicted;
        if (with_scores)
            for (Eigen::Index i = 0; i < r.prediction.scores.size(); ++i) out << ',' << r.prediction.scores[i];
        out << '\n';
    }
    return out.str();
}

}  // namespace gen1s
