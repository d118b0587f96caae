#include "gen1s/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "gen1s/error.hpp"

namespace gen1s {

void EpisodeSpec::validate() const {
    if (classes_per_episode < 1) throw ConfigError("classes_per_episode must be >= 1");
    if (support_per_class < 1) throw ConfigError("support_per_class must be >= 1");
    if (batch_size < classes_per_episode || batch_size % classes_per_episode != 0)
        throw ConfigError("batch_size must be a positive multiple of classes_per_episode");
    if (n_episodes < 0) throw ConfigError("n_episodes must be >= 0");
}

void EpisodeSpec::validate_for(const EmbeddingDataset& ds) const {
    validate();
    const auto base = ds.classes(ClassRole::base);
    if (static_cast<std::size_t>(classes_per_episode) > base.size())
        throw DataError("classes_per_episode exceeds the number of base classes");
    const std::size_t need = static_cast<std::size_t>(support_per_class + query_per_class());
    for (ClassId k : base) {
        if (ds.indices(Split::base_train, k).size() < need)
            throw DataError("base class " + std::to_string(k) + " has fewer than " + std::to_string(need) +
                            " base_train samples for one episode");
    }
}

EpisodeSampler::EpisodeSampler(const EmbeddingDataset& ds, const EpisodeSpec& spec) : spec_(spec) {
    spec.validate_for(ds);
    classes_ = ds.classes(ClassRole::base);
    for (ClassId k : classes_) members_.push_back(ds.indices(Split::base_train, k));
}

namespace {

// First `k` entries of a partial Fisher-Yates shuffle of `items`.
template <class T>
std::vector<T> choose(std::vector<T> items, std::size_t k, Rng& rng) {
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                                static_cast<std::int64_t>(items.size() - 1)));
        std::swap(items[i], items[j]);
    }
    items.resize(k);
    return items;
}

}  // namespace

Episode EpisodeSampler::next(Rng& rng) const {
    std::vector<std::size_t> slots(classes_.size());
    std::iota(slots.begin(), slots.end(), 0);
    const auto picked = choose(std::move(slots), static_cast<std::size_t>(spec_.classes_per_episode), rng);
    const auto s = static_cast<std::size_t>(spec_.support_per_class);
    const auto q = static_cast<std::size_t>(spec_.query_per_class());
    Episode ep;
    for (std::size_t slot : picked) {
        auto drawn = choose(members_[slot], s + q, rng);
        EpisodeClass ec;
        ec.class_id = classes_[slot];
        ec.support.assign(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(s));
        ec.query.assign(drawn.begin() + static_cast<std::ptrdiff_t>(s), drawn.end());
        ep.classes.push_back(std::move(ec));
    }
    return ep;
}

Episode sample_episode(const EmbeddingDataset& ds, const EpisodeSpec& spec, Rng& rng) {
    return EpisodeSampler(ds, spec).next(rng);
}

double base_residual_rms(const EmbeddingDataset& ds, const PrototypeTable& prototypes) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i : ds.indices(Split::base_train)) {
        const Record& r = ds.records[i];
        sum += (r.embedding - prototypes.at(r.class_id)).squaredNorm();
        count += static_cast<std::size_t>(ds.dim);
    }
    if (count == 0) throw DataError("base_train is empty");
    return std::sqrt(sum / static_cast<double>(count));
}

namespace {

struct Batch {
    Matrix residuals;
    Matrix prototypes;
};

Batch episode_batch(const EmbeddingDataset& ds, const Episode& ep) {
    std::size_t n = 0;
    for (const auto& ec : ep.classes) n += ec.query.size();
    Batch b{Matrix(ds.dim, static_cast<Eigen::Index>(n)), Matrix(ds.dim, static_cast<Eigen::Index>(n))};
    Eigen::Index col = 0;
    for (const auto& ec : ep.classes) {
        const Vector c = mean_embedding(ds, ec.support);
        for (std::size_t i : ec.query) {
            b.residuals.col(col) = ds.records[i].embedding - c;
            b.prototypes.col(col) = c;
            ++col;
        }
    }
    return b;
}

// Optimizer state and one step for either head kind.
struct HeadOptimizer {
    std::vector<AdamState> states;

    HeadOptimizer(const GenerativeHead& head, const AdamConfig& cfg) {
        if (const auto* v = std::get_if<VaeHead>(&head)) {
            states.emplace_back(v->encoder, cfg);
            states.emplace_back(v->decoder, cfg);
        } else {
            states.emplace_back(std::get<DiffusionHead>(head).noise_net, cfg);
        }
    }

    double step(GenerativeHead& head, const Batch& b, Rng& noise_rng) {
        if (auto* v = std::get_if<VaeHead>(&head)) {
            const Matrix eps = noise_rng.normal_matrix(v->latent_dim, b.residuals.cols());
            VaeLoss l = vae_loss_batch(*v, b.residuals, b.prototypes, eps);
            if (!std::isfinite(l.loss)) return l.loss;
            adam_update(states[0], v->encoder, l.grads.encoder);
            adam_update(states[1], v->decoder, l.grads.decoder);
            return l.loss;
        }
        auto& d = std::get<DiffusionHead>(head);
        std::vector<std::int64_t> ts(static_cast<std::size_t>(b.residuals.cols()));
        for (auto& t : ts) t = noise_rng.uniform_int(1, d.schedule.T);
        const Matrix eps = noise_rng.normal_matrix(d.dim, b.residuals.cols());
        DiffusionLoss l = ddpm_loss_batch(d, b.residuals, b.prototypes, ts, eps);
        if (!std::isfinite(l.loss)) return l.loss;
        adam_update(states[0], d.noise_net, l.grads);
        return l.loss;
    }
};

}  // namespace

TrainResult train_head(const EmbeddingDataset& ds, const EpisodeSpec& spec, GenerativeHead head,
                       const TrainOptions& options) {
    if (head_dim(head) != ds.dim) throw ShapeError("head dimension does not match the dataset");
    spec.validate();
    if (options.log_window < 1) throw ConfigError("log_window must be >= 1");

    TrainResult result;
    result.prototypes = compute_prototypes(ds, PrototypeSource::base_train);
    if (spec.n_episodes == 0) {
        result.head = std::move(head);
        return result;
    }

    if (auto* d = std::get_if<DiffusionHead>(&head)) calibrate_residual_scale(*d, base_residual_rms(ds, result.prototypes));

    const EpisodeSampler sampler(ds, spec);
    Rng episode_rng(spec.seed, "episodes");
    Rng noise_rng(spec.seed, "train-noise");
    HeadOptimizer opt(head, options.adam);
    const auto t0 = std::chrono::steady_clock::now();
    const bool checkpointing = !options.checkpoint_dir.empty();
    TrainLog& log = result.log;
    double window_sum = 0.0;

    for (std::int64_t ep = 0; ep < spec.n_episodes; ++ep) {
        const Batch batch = episode_batch(ds, sampler.next(episode_rng));
        const double loss = opt.step(head, batch, noise_rng);
        if (!std::isfinite(loss)) {
            if (checkpointing) save_head(head, options.checkpoint_dir / "last_good.ckpt");
            throw TrainingError(ep, "non-finite training loss");
        }
        log.episode_losses.push_back(loss);
        window_sum += loss;
        const auto done = ep + 1;
        if (done > options.log_window) window_sum -= log.episode_losses[static_cast<std::size_t>(done - options.log_window - 1)];

        const bool at_checkpoint = options.checkpoint_every > 0 && done % options.checkpoint_every == 0;
        if (at_checkpoint || done == spec.n_episodes) {
            const auto width = std::min<std::int64_t>(done, options.log_window);
            TrainLogEntry entry{done, window_sum / static_cast<double>(width),
                                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
            log.entries.push_back(entry);
            const bool best = log.best_episode < 0 || entry.window_loss < log.best_window_loss;
            if (best) {
                log.best_episode = done;
                log.best_window_loss = entry.window_loss;
            }
            if (checkpointing) {
                save_head(head, options.checkpoint_dir / "last.ckpt");
                if (best) save_head(head, options.checkpoint_dir / "best.ckpt");
            }
            if (options.on_log) options.on_log(entry);
        }
    }
    result.head = std::move(head);
    return result;
}

double evaluate_head_loss(const GenerativeHead& head, const EmbeddingDataset& ds, const PrototypeTable& prototypes,
                          std::span<const std::size_t> records, std::uint64_t seed) {
    if (records.empty()) throw DataError("evaluate_head_loss: no records");
    Batch b{Matrix(ds.dim, static_cast<Eigen::Index>(records.size())),
            Matrix(ds.dim, static_cast<Eigen::Index>(records.size()))};
    for (std::size_t j = 0; j < records.size(); ++j) {
        const Record& r = ds.records[records[j]];
        const Vector& c = prototypes.at(r.class_id);
        b.residuals.col(static_cast<Eigen::Index>(j)) = r.embedding - c;
        b.prototypes.col(static_cast<Eigen::Index>(j)) = c;
    }
    Rng rng(seed, "heldout-noise");
    if (const auto* v = std::get_if<VaeHead>(&head))
        return vae_loss_batch(*v, b.residuals, b.prototypes, rng.normal_matrix(v->latent_dim, b.residuals.cols()), false)
            .loss;
    const auto& d = std::get<DiffusionHead>(head);
    std::vector<std::int64_t> ts(records.size());
    for (auto& t : ts) t = rng.uniform_int(1, d.schedule.T);
    return ddpm_loss_batch(d, b.residuals, b.prototypes, ts, rng.normal_matrix(d.dim, b.residuals.cols()), false).loss;
}

}  // namespace gen1s
