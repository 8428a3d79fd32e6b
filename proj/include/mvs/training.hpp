#pragma once

// Training loop over frozen embeddings: seeded shuffle per epoch, fixed-size
// batches, in-batch negatives, Adam on the fusion parameters only.

#include "mvs/adam.hpp"
#include "mvs/config.hpp"
#include "mvs/fusion.hpp"
#include "mvs/loss.hpp"
#include "mvs/random.hpp"
#include "mvs/retrieval.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

namespace mvs {

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    std::optional<RecallReport> recalls;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    double wall_seconds = 0.0;
    nlohmann::ordered_json config;
    std::size_t empty_instance_samples = 0;
};

/// A sample with its selection outputs and target embedding resolved. The
/// streams are constants of the data: no gradient ever reaches them.
struct PreparedSample {
    const QuerySample* sample = nullptr;
    QueryStreams streams;
    Vector target;
};

inline std::vector<PreparedSample> prepare_samples(std::span<const QuerySample* const> samples,
                                                   std::span<const GalleryEntry> gallery, double eps = 1e-12) {
    std::unordered_map<std::string, const GalleryEntry*> by_id;
    for (const auto& g : gallery) by_id.emplace(g.id, &g);
    std::vector<PreparedSample> out;
    out.reserve(samples.size());
    for (const auto* s : samples) {
        const auto it = by_id.find(s->target_id);
        if (it == by_id.end()) {
            throw Error(ErrorCode::MissingTarget, "sample " + s->id + " targets unknown gallery id " + s->target_id);
        }
        out.push_back({s, compute_streams(*s, eps), it->second->embedding});
    }
    return out;
}

/// Loss of one batch (given as indices into `data`), accumulating parameter
/// gradients into `grads` when it is non-null.
inline double batch_step(const FusionModel& model, std::span<const PreparedSample> data,
                         std::span<const std::size_t> batch, double tau, FusionGrads* grads) {
    std::vector<FusionTrace> traces;
    std::vector<Vector> queries, targets;
    traces.reserve(batch.size());
    for (auto idx : batch) {
        traces.push_back(fusion_forward(model, data[idx].streams));
        queries.push_back(traces.back().q);
        targets.push_back(data[idx].target);
    }
    const auto loss = batch_loss(queries, targets, tau);
    if (grads) {
        for (std::size_t i = 0; i < batch.size(); ++i) fusion_backward(model, traces[i], loss.d_queries[i], *grads);
    }
    return loss.loss;
}

/// Sample-weighted mean loss over the data in its stored order, cut into
/// consecutive batches of `batch_size`.
inline double dataset_loss(const FusionModel& model, std::span<const PreparedSample> data, double tau,
                           int batch_size) {
    if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no samples");
    double total = 0.0;
    std::vector<std::size_t> batch;
    for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
        batch.clear();
        for (auto i = start; i < end; ++i) batch.push_back(i);
        total += batch_step(model, data, batch, tau, nullptr) * static_cast<double>(batch.size());
    }
    return total / static_cast<double>(data.size());
}

struct TrainResult {
    FusionModel model;
    TrainLog log;
};

inline constexpr std::uint64_t kShuffleStream = 0x73687566666c65ULL;
inline constexpr std::uint64_t kInitStream = 0x696e6974ULL;

inline FusionModel init_model(const RunConfig& cfg, Index dim) {
    return init_fusion(cfg.variant, dim, cfg.hidden_for(dim), derive_seed(cfg.seed, kInitStream), cfg.init);
}

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains from `initial` over the prepared data. When `eval_data` is given and
/// cfg.eval_every > 0, recalls on cfg.eval_split are logged every
/// eval_every epochs.
inline TrainResult train(FusionModel initial, std::span<const PreparedSample> data, const RunConfig& cfg,
                         const Dataset* eval_data = nullptr, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (data.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
    const auto started = std::chrono::steady_clock::now();

    TrainResult result{std::move(initial), {}};
    result.log.config = to_json(cfg);
    for (const auto& s : data) result.log.empty_instance_samples += s.streams.empty_instances ? 1 : 0;

    AdamState state(result.model);
    const AdamHyper hp{cfg.learning_rate};
    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    const bool has_params = result.model.parameter_count() > 0;
    const std::vector<int> ks{1, 5, 10, 50};

    std::vector<std::size_t> order(data.size());
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(cfg.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);

        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const auto end = std::min(order.size(), start + batch_size);
            const std::span<const std::size_t> batch(order.data() + start, end - start);
            FusionGrads grads = result.model.zeros_like();
            total += batch_step(result.model, data, batch, cfg.tau, &grads) * static_cast<double>(batch.size());
            if (has_params) adam_step(result.model, grads, state, hp);
        }

        EpochLog entry{epoch, total / static_cast<double>(data.size()), std::nullopt};
        if (eval_data && cfg.eval_every > 0 && epoch % cfg.eval_every == 0) {
            entry.recalls = evaluate(*eval_data, cfg.eval_split, result.model, ks, cfg.minmax_eps).report;
        }
        result.log.epochs.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }

    result.log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

/// Full pipeline on a loaded dataset: resolve the training split, initialise
/// from the config, train.
inline TrainResult train(const Dataset& data, const RunConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (cfg.dim != 0 && cfg.dim != data.dim) {
        throw Error(ErrorCode::DimMismatch, "config dim " + std::to_string(cfg.dim) + " but data has " +
                                                std::to_string(data.dim));
    }
    const auto samples = data.split(cfg.train_split);
    if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "split '" + cfg.train_split + "' has no samples");
    const auto prepared = prepare_samples(samples, data.gallery, cfg.minmax_eps);
    return train(init_model(cfg, data.dim), prepared, cfg, &data, on_epoch);
}

}  // namespace mvs
