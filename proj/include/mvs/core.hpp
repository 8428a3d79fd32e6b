#pragma once

// Record types and the small numeric kernels shared by every stage of the
// retrieval engine. Everything is computed in double precision.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mvs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorCode {
    ZeroVector,
    DimMismatch,
    EmptyInput,
    EmptyInstanceSet,
    ArityMismatch,
    StaleCache,
    ShapeMismatch,
    NonPositiveTau,
    MissingTarget,
    EmptyDataset,
    EmptyGallery,
    MissingTruth,
    BadMagic,
    UnsupportedVersion,
    TruncatedFile,
    TrailingData,
    NonFiniteValue,
    DanglingPath,
    DuplicateId,
    UnresolvedTarget,
    BadManifest,
    BadConfig,
    IoFailure,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::EmptyInstanceSet: return "EmptyInstanceSet";
        case ErrorCode::ArityMismatch: return "ArityMismatch";
        case ErrorCode::StaleCache: return "StaleCache";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonPositiveTau: return "NonPositiveTau";
        case ErrorCode::MissingTarget: return "MissingTarget";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::EmptyGallery: return "EmptyGallery";
        case ErrorCode::MissingTruth: return "MissingTruth";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::TrailingData: return "TrailingData";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::DanglingPath: return "DanglingPath";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::UnresolvedTarget: return "UnresolvedTarget";
        case ErrorCode::BadManifest: return "BadManifest";
        case ErrorCode::BadConfig: return "BadConfig";
        case ErrorCode::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

/// Every validation failure raised by the engine. The CLI maps these to exit
/// code 1; anything else escaping is treated as an internal error.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require_same_dim(const Vector& a, const Vector& b, std::string_view where) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimMismatch, std::string(where) + ": " + std::to_string(a.size()) +
                                                " vs " + std::to_string(b.size()));
    }
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Reference-image patch tokens: the global CLS token plus N local patches.
struct PatchSet {
    Vector cls;
    std::vector<Vector> patches;

    Index dim() const { return cls.size(); }
};

/// Segmented object features. An empty set is legal.
struct InstanceSet {
    std::vector<Vector> instances;

    bool empty() const { return instances.empty(); }
};

struct QuerySample {
    std::string id;
    std::string split;
    PatchSet patch_set;
    InstanceSet instance_set;
    Vector s_mt;  // modification text
    Vector r_rt;  // retained text
    Vector r_dt;  // deleted text
    Vector r_tt;  // reasoned target text
    std::string target_id;

    Index dim() const { return patch_set.dim(); }
};

struct GalleryEntry {
    std::string id;
    Vector embedding;
};

inline double cosine(const Vector& u, const Vector& v) {
    require_same_dim(u, v, "cosine");
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero-norm vector");
    return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

/// Numerically stable softmax (max subtraction).
inline Vector softmax(const Vector& logits) {
    if (logits.size() == 0) throw Error(ErrorCode::EmptyInput, "softmax of an empty sequence");
    const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
    return e / e.sum();
}

inline std::vector<double> softmax(std::span<const double> logits) {
    const Vector out = softmax(Vector(Eigen::Map<const Vector>(logits.data(), Index(logits.size()))));
    return {out.data(), out.data() + out.size()};
}

/// (x - min) / (max - min). A range narrower than eps maps every entry to 0.5.
inline std::vector<double> minmax_normalize(std::span<const double> values, double eps = 1e-12) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "minmax_normalize of an empty sequence");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    std::vector<double> out(values.size(), 0.5);
    if (range < eps) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
    return out;
}

inline Vector mean_vectors(std::span<const Vector> vs) {
    if (vs.empty()) throw Error(ErrorCode::EmptyInput, "mean of an empty vector set");
    Vector acc = Vector::Zero(vs.front().size());
    for (const auto& v : vs) {
        require_same_dim(acc, v, "mean_vectors");
        acc += v;
    }
    return acc / static_cast<double>(vs.size());
}

}  // namespace mvs
