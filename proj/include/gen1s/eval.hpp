#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "gen1s/classifier.hpp"
#include "gen1s/data/dataset.hpp"

namespace gen1s {

struct EvalReport {
    std::string classifier;
    std::uint64_t seed = 0;
    double bcr = 0.0;
    double ncr = 0.0;
    double avg = 0.0;
    std::size_t n_base_test = 0;
    std::size_t n_novel_query = 0;
    std::map<ClassId, double> per_class_accuracy;
    std::map<ClassId, std::size_t> per_class_count;
    std::map<std::pair<ClassId, ClassId>, std::size_t> confusion;  // (true, predicted) for errors only
};

// BCR over base_test, NCR over novel_query, AVG = (BCR + NCR) / 2. Each query is scored with
// query_key = its record index. Throws DataError when either split is empty.
EvalReport evaluate(const Classifier& classifier, const EmbeddingDataset& ds, std::uint64_t seed = 0,
                    std::vector<PredictionRow>* rows = nullptr);

nlohmann::json to_json(const EvalReport& report);

}  // namespace gen1s
