#pragma once

// Cosine ranking of fused queries against a gallery, and Recall@K.

#include "mvs/core.hpp"
#include "mvs/fusion.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace mvs {

struct Dataset {
    std::vector<QuerySample> samples;
    std::vector<GalleryEntry> gallery;
    Index dim = 0;

    std::vector<const QuerySample*> split(std::string_view name) const {
        std::vector<const QuerySample*> out;
        for (const auto& s : samples)
            if (s.split == name) out.push_back(&s);
        return out;
    }

    const GalleryEntry* find(const std::string& id) const {
        for (const auto& g : gallery)
            if (g.id == id) return &g;
        return nullptr;
    }
};

struct RankedResult {
    std::string query_id;
    std::vector<std::string> ordered_gallery_ids;
    std::vector<double> scores;
};

struct RecallReport {
    std::vector<int> ks;
    std::vector<double> recalls;
    double mean = 0.0;
    std::size_t query_count = 0;

    double at(int k) const {
        for (std::size_t i = 0; i < ks.size(); ++i)
            if (ks[i] == k) return recalls[i];
        throw Error(ErrorCode::BadConfig, "recall not computed at K=" + std::to_string(k));
    }
};

inline RankedResult rank(const std::string& query_id, const Vector& q, std::span<const GalleryEntry> gallery) {
    if (gallery.empty()) throw Error(ErrorCode::EmptyGallery, "cannot rank against an empty gallery");
    if (q.norm() == 0.0) throw Error(ErrorCode::ZeroVector, "zero-norm query " + query_id);

    std::vector<std::pair<double, const std::string*>> scored;
    scored.reserve(gallery.size());
    for (const auto& entry : gallery) scored.emplace_back(cosine(q, entry.embedding), &entry.id);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return *a.second < *b.second;
    });

    RankedResult r;
    r.query_id = query_id;
    r.ordered_gallery_ids.reserve(scored.size());
    r.scores.reserve(scored.size());
    for (const auto& [score, id] : scored) {
        r.ordered_gallery_ids.push_back(*id);
        r.scores.push_back(score);
    }
    return r;
}

inline RecallReport recall_at_k(std::span<const RankedResult> results,
                                const std::map<std::string, std::string>& truth, std::span<const int> ks) {
    RecallReport report;
    report.ks.assign(ks.begin(), ks.end());
    report.query_count = results.size();
    for (int k : ks) {
        if (k <= 0) throw Error(ErrorCode::BadConfig, "K must be positive");
    }

    std::vector<std::size_t> hits(ks.size(), 0);
    for (const auto& r : results) {
        const auto it = truth.find(r.query_id);
        if (it == truth.end()) throw Error(ErrorCode::MissingTruth, "no ground truth for query " + r.query_id);
        const auto pos = std::find(r.ordered_gallery_ids.begin(), r.ordered_gallery_ids.end(), it->second);
        if (pos == r.ordered_gallery_ids.end()) continue;
        const auto position = static_cast<std::size_t>(pos - r.ordered_gallery_ids.begin());
        for (std::size_t i = 0; i < ks.size(); ++i)
            if (position < static_cast<std::size_t>(ks[i])) ++hits[i];
    }

    const double n = results.empty() ? 1.0 : static_cast<double>(results.size());
    for (auto h : hits) report.recalls.push_back(static_cast<double>(h) / n);
    if (!report.recalls.empty()) {
        report.mean = std::accumulate(report.recalls.begin(), report.recalls.end(), 0.0) /
                      static_cast<double>(report.recalls.size());
    }
    return report;
}

/// Candidates for evaluating one split: the targets of that split plus every
/// gallery entry that no sample in the dataset targets (distractors).
inline std::vector<GalleryEntry> candidate_gallery(const Dataset& data, std::string_view split) {
    std::set<std::string> any_target, split_target;
    for (const auto& s : data.samples) {
        any_target.insert(s.target_id);
        if (s.split == split) split_target.insert(s.target_id);
    }
    std::vector<GalleryEntry> out;
    for (const auto& g : data.gallery) {
        if (split_target.count(g.id) || !any_target.count(g.id)) out.push_back(g);
    }
    return out;
}

struct Evaluation {
    RecallReport report;
    std::vector<RankedResult> results;
    std::size_t empty_instance_samples = 0;
};

inline Evaluation evaluate(std::span<const QuerySample* const> samples, std::span<const GalleryEntry> candidates,
                           const FusionModel& model, std::span<const int> ks, double eps = 1e-12) {
    Evaluation ev;
    std::map<std::string, std::string> truth;
    for (const auto* s : samples) {
        const auto streams = compute_streams(*s, eps);
        if (streams.empty_instances) ++ev.empty_instance_samples;
        const Vector q = fusion_forward(model, streams).q;
        ev.results.push_back(rank(s->id, q, candidates));
        truth[s->id] = s->target_id;
    }
    ev.report = recall_at_k(ev.results, truth, ks);
    return ev;
}

inline Evaluation evaluate(const Dataset& data, std::string_view split, const FusionModel& model,
                           std::span<const int> ks, double eps = 1e-12) {
    const auto samples = data.split(split);
    if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "split '" + std::string(split) + "' has no samples");
    for (const auto* s : samples) {
        if (!data.find(s->target_id)) throw Error(ErrorCode::MissingTarget, "target " + s->target_id + " not in gallery");
    }
    const auto candidates = candidate_gallery(data, split);
    return evaluate(samples, candidates, model, ks, eps);
}

}  // namespace mvs
