#include "gen1s/classifier.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

Matrix SldaState::regularized_covariance() const {
    const double lambda = shrinkage_factor * covariance.trace() / static_cast<double>(dim);
    Matrix s = covariance;
    s.diagonal().array() += lambda;
    return s;
}

SldaState slda_fit(const EmbeddingDataset& ds, double shrinkage_factor) {
    const auto train = ds.indices(Split::base_train);
    if (train.size() < 2) throw DataError("slda_fit needs at least two base_train samples");
    SldaState st;
    st.dim = ds.dim;
    st.shrinkage_factor = shrinkage_factor;
    for (std::size_t i : train) {
        const Record& r = ds.records[i];
        auto [it, fresh] = st.means.try_emplace(r.class_id, Vector::Zero(ds.dim));
        it->second += r.embedding;
        ++st.counts[r.class_id];
    }
    for (auto& [k, m] : st.means) m /= static_cast<double>(st.counts[k]);
    st.covariance = Matrix::Zero(ds.dim, ds.dim);
    for (std::size_t i : train) {
        const Record& r = ds.records[i];
        const Vector d = r.embedding - st.means[r.class_id];
        st.covariance.selfadjointView<Eigen::Lower>().rankUpdate(d);
    }
    st.covariance = st.covariance.selfadjointView<Eigen::Lower>();
    st.n_updates = train.size();
    st.covariance /= static_cast<double>(st.n_updates);
    return st;
}

void slda_update(SldaState& st, const Vector& x, ClassId k, bool update_covariance) {
    if (x.size() != st.dim) throw ShapeError("slda_update: dimension mismatch");
    auto [it, fresh] = st.means.try_emplace(k, Vector::Zero(st.dim));
    std::size_t& count = st.counts[k];
    const Vector delta = x - it->second;
    if (update_covariance) {
        const double n = static_cast<double>(st.n_updates);
        st.covariance = (n * st.covariance + (n / (n + 1.0)) * (delta * delta.transpose())) / (n + 1.0);
        ++st.n_updates;
    }
    it->second += delta / static_cast<double>(count + 1);
    ++count;
}

SldaClassifier::SldaClassifier(SldaState state, bool fixed_sigma) : state_(std::move(state)), fixed_sigma_(fixed_sigma) {
    if (state_.means.empty()) throw DataError("slda classifier has no classes");
    const Eigen::LLT<Matrix> llt(state_.regularized_covariance());
    if (llt.info() != Eigen::Success) throw NumericError("slda covariance is not positive definite");
    Matrix centers(state_.dim, static_cast<Eigen::Index>(state_.means.size()));
    Eigen::Index col = 0;
    for (const auto& [k, m] : state_.means) {
        ids_.push_back(k);
        centers.col(col++) = m;
    }
    weights_ = llt.solve(centers);
    bias_ = -0.5 * (centers.array() * weights_.array()).colwise().sum().transpose();
}

ClassifierKind SldaClassifier::kind() const {
    return fixed_sigma_ ? ClassifierKind::slda_fixed_sigma : ClassifierKind::slda;
}

Prediction SldaClassifier::predict(const Vector& x, std::uint64_t) const {
    if (x.size() != state_.dim) throw ShapeError("slda: query dimension mismatch");
    Vector scores = weights_.transpose() * x + bias_;
    return argmax_prediction(ids_, std::move(scores));
}

}  // namespace gen1s
