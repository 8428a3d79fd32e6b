#pragma once

// Intent-guided visual reference selection at two granularities.
//
// Patch level: each patch token is scored against the retained and deleted
// text embeddings; the retain-minus-delete weighted mean of the patches is
// averaged with the CLS token.
//
// Instance level: the same cosine scores over segmented object features, but
// each side is min-max normalized independently before taking the difference,
// and the result is a plain weighted mean.

#include "mvs/core.hpp"

#include <vector>

namespace mvs {

struct PatchAttention {
    std::vector<double> alpha_plus;
    std::vector<double> alpha_minus;

    double net(std::size_t i) const { return alpha_plus[i] - alpha_minus[i]; }
};

struct InstanceAttention {
    std::vector<double> alpha_plus_raw;
    std::vector<double> alpha_minus_raw;
    std::vector<double> alpha_plus_norm;
    std::vector<double> alpha_minus_norm;
    std::vector<double> net;
};

namespace detail {

inline void require_guidance(const Vector& r_rt, const Vector& r_dt, Index dim) {
    if (r_rt.size() != dim || r_dt.size() != dim) {
        throw Error(ErrorCode::DimMismatch, "guidance text embedding dimension differs from visual features");
    }
    if (r_rt.norm() == 0.0 || r_dt.norm() == 0.0) {
        throw Error(ErrorCode::ZeroVector, "zero-norm guidance text embedding");
    }
}

}  // namespace detail

inline PatchAttention pvrs_weights(const PatchSet& patch_set, const Vector& r_rt, const Vector& r_dt) {
    if (patch_set.patches.empty()) throw Error(ErrorCode::EmptyInput, "patch set has no patches");
    detail::require_guidance(r_rt, r_dt, patch_set.dim());

    PatchAttention att;
    att.alpha_plus.reserve(patch_set.patches.size());
    att.alpha_minus.reserve(patch_set.patches.size());
    for (const auto& patch : patch_set.patches) {
        att.alpha_plus.push_back(cosine(patch, r_rt));
        att.alpha_minus.push_back(cosine(patch, r_dt));
    }
    return att;
}

inline Vector pvrs_select(const PatchSet& patch_set, const PatchAttention& att) {
    const auto n = patch_set.patches.size();
    if (att.alpha_plus.size() != n || att.alpha_minus.size() != n) {
        throw Error(ErrorCode::ShapeMismatch, "patch attention does not match the patch set");
    }
    Vector acc = Vector::Zero(patch_set.dim());
    for (std::size_t i = 0; i < n; ++i) acc += att.net(i) * patch_set.patches[i];
    return (acc / static_cast<double>(n) + patch_set.cls) / 2.0;
}

inline Vector pvrs_select(const PatchSet& patch_set, const Vector& r_rt, const Vector& r_dt) {
    return pvrs_select(patch_set, pvrs_weights(patch_set, r_rt, r_dt));
}

inline InstanceAttention ivrs_weights(const InstanceSet& instance_set, const Vector& r_rt, const Vector& r_dt,
                                      double eps = 1e-12) {
    if (instance_set.empty()) throw Error(ErrorCode::EmptyInstanceSet, "no instances to weight");
    detail::require_guidance(r_rt, r_dt, instance_set.instances.front().size());

    InstanceAttention att;
    for (const auto& inst : instance_set.instances) {
        att.alpha_plus_raw.push_back(cosine(inst, r_rt));
        att.alpha_minus_raw.push_back(cosine(inst, r_dt));
    }
    att.alpha_plus_norm = minmax_normalize(att.alpha_plus_raw, eps);
    att.alpha_minus_norm = minmax_normalize(att.alpha_minus_raw, eps);
    att.net.resize(att.alpha_plus_norm.size());
    for (std::size_t i = 0; i < att.net.size(); ++i) att.net[i] = att.alpha_plus_norm[i] - att.alpha_minus_norm[i];
    return att;
}

inline Vector ivrs_select(const InstanceSet& instance_set, const InstanceAttention& att) {
    const auto m = instance_set.instances.size();
    if (att.net.size() != m) throw Error(ErrorCode::ShapeMismatch, "instance attention does not match the instance set");
    Vector acc = Vector::Zero(instance_set.instances.front().size());
    for (std::size_t i = 0; i < m; ++i) acc += att.net[i] * instance_set.instances[i];
    return acc / static_cast<double>(m);
}

/// An empty instance set yields the zero vector of dimension `dim`; callers
/// that care (training, evaluation) count such samples.
inline Vector ivrs_select(const InstanceSet& instance_set, const Vector& r_rt, const Vector& r_dt, Index dim,
                          double eps = 1e-12) {
    if (instance_set.empty()) return Vector::Zero(dim);
    if (instance_set.instances.front().size() != dim) {
        throw Error(ErrorCode::DimMismatch, "instance feature dimension differs from the query dimension");
    }
    return ivrs_select(instance_set, ivrs_weights(instance_set, r_rt, r_dt, eps));
}

inline Vector ivrs_select(const InstanceSet& instance_set, const Vector& r_rt, const Vector& r_dt) {
    return ivrs_select(instance_set, r_rt, r_dt, r_rt.size());
}

}  // namespace mvs
