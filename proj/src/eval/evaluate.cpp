#include "gen1s/eval.hpp"

#include "gen1s/error.hpp"

namespace gen1s {

EvalReport evaluate(const Classifier& classifier, const EmbeddingDataset& ds, std::uint64_t seed,
                    std::vector<PredictionRow>* rows) {
    const auto base = ds.indices(Split::base_test);
    const auto novel = ds.indices(Split::novel_query);
    if (base.empty()) throw DataError("evaluate: base_test split is empty");
    if (novel.empty()) throw DataError("evaluate: novel_query split is empty");

    EvalReport rep;
    rep.classifier = to_string(classifier.kind());
    rep.seed = seed;
    rep.n_base_test = base.size();
    rep.n_novel_query = novel.size();
    std::map<ClassId, std::size_t> correct;

    auto run = [&](const std::vector<std::size_t>& split) {
        std::size_t hits = 0;
        for (std::size_t i : split) {
            const Record& r = ds.records[i];
            Prediction p = classifier.predict(r.embedding, static_cast<std::uint64_t>(i));
            ++rep.per_class_count[r.class_id];
            if (p.predicted == r.class_id) {
                ++hits;
                ++correct[r.class_id];
            } else {
                ++rep.confusion[{r.class_id, p.predicted}];
            }
            if (rows) rows->push_back({i, r.class_id, std::move(p)});
        }
        return static_cast<double>(hits) / static_cast<double>(split.size());
    };
    rep.bcr = run(base);
    rep.ncr = run(novel);
    rep.avg = (rep.bcr + rep.ncr) / 2.0;
    for (const auto& [k, n] : rep.per_class_count)
        rep.per_class_accuracy[k] = static_cast<double>(correct[k]) / static_cast<double>(n);
    return rep;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [k, acc] : r.per_class_accuracy)
        per_class[std::to_string(k)] = {{"accuracy", acc}, {"count", r.per_class_count.at(k)}};
    nlohmann::json confusion = nlohmann::json::array();
    for (const auto& [key, n] : r.confusion)
        confusion.push_back({{"true", key.first}, {"predicted", key.second}, {"count", n}});
    return {{"classifier", r.classifier},
            {"seed", r.seed},
            {"bcr", r.bcr},
            {"ncr", r.ncr},
            {"avg", r.avg},
            {"counts", {{"base_test", r.n_base_test}, {"novel_query", r.n_novel_query}}},
            {"per_class", per_class},
            {"confusion", confusion}};
}

}  // namespace gen1s
