#pragma once

// Query fusion under the ablation switchboard: full weighted hierarchical
// combination, a single combiner over the enabled streams, or a plain sum.
// Disabled streams are removed from the combiner arity. With both visual
// selections disabled the reference image enters through its CLS token.

#include "mvs/combiner.hpp"
#include "mvs/selection.hpp"
#include "mvs/whc.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace mvs {

enum class FusionKind { Whc, Sum, SingleCombiner };

inline std::string_view to_string(FusionKind kind) {
    switch (kind) {
        case FusionKind::Whc: return "whc";
        case FusionKind::Sum: return "sum";
        case FusionKind::SingleCombiner: return "single_combiner";
    }
    return "?";
}

inline FusionKind parse_fusion_kind(std::string_view s) {
    if (s == "whc") return FusionKind::Whc;
    if (s == "sum") return FusionKind::Sum;
    if (s == "single_combiner") return FusionKind::SingleCombiner;
    throw Error(ErrorCode::BadConfig, "unknown fusion kind '" + std::string(s) + "'");
}

struct AblationVariant {
    FusionKind fusion = FusionKind::Whc;
    bool use_mod_text = true;
    bool use_target_text = true;
    bool use_pvrs = true;
    bool use_ivrs = true;

    void validate() const {
        if (!use_mod_text && !use_target_text) {
            throw Error(ErrorCode::BadConfig, "variant needs at least one text stream");
        }
        if (fusion == FusionKind::Whc && !(use_mod_text && use_target_text)) {
            throw Error(ErrorCode::BadConfig, "whc fusion needs both the modification and the target text");
        }
    }

    Index visual_streams() const {
        const Index n = Index(use_pvrs) + Index(use_ivrs);
        return n == 0 ? 1 : n;
    }
    Index text_streams() const { return Index(use_mod_text) + Index(use_target_text); }

    std::string name() const {
        std::string s(to_string(fusion));
        if (use_mod_text) s += "+mt";
        if (use_target_text) s += "+tt";
        if (use_pvrs) s += "+pvrs";
        if (use_ivrs) s += "+ivrs";
        if (!use_pvrs && !use_ivrs) s += "+cls";
        return s;
    }

    bool operator==(const AblationVariant&) const = default;
};

/// The eight ablation rows (1-based): row 1 is the full model, row 2 swaps
/// the combiner hierarchy for a direct sum, rows 3-7 use one combiner over a
/// shrinking set of streams, row 8 sums the modification text and image.
inline AblationVariant ablation_row(int row) {
    using F = FusionKind;
    switch (row) {
        case 1: return {F::Whc, true, true, true, true};
        case 2: return {F::Sum, true, true, true, true};
        case 3: return {F::SingleCombiner, false, true, true, true};
        case 4: return {F::SingleCombiner, true, false, true, true};
        case 5: return {F::SingleCombiner, true, false, true, false};
        case 6: return {F::SingleCombiner, true, false, false, true};
        case 7: return {F::SingleCombiner, true, false, false, false};
        case 8: return {F::Sum, true, false, false, false};
        default: throw Error(ErrorCode::BadConfig, "ablation row must be 1..8, got " + std::to_string(row));
    }
}

/// Per-sample inputs of the fusion stage. These depend only on stored
/// embeddings, so with frozen encoders they are computed once.
struct QueryStreams {
    Vector v_p;
    Vector v_i;
    Vector cls;
    Vector s_mt;
    Vector r_tt;
    bool empty_instances = false;
};

inline QueryStreams compute_streams(const QuerySample& s, double eps = 1e-12) {
    QueryStreams q;
    q.v_p = pvrs_select(s.patch_set, s.r_rt, s.r_dt);
    q.v_i = ivrs_select(s.instance_set, s.r_rt, s.r_dt, s.dim(), eps);
    q.cls = s.patch_set.cls;
    q.s_mt = s.s_mt;
    q.r_tt = s.r_tt;
    q.empty_instances = s.instance_set.empty();
    return q;
}

inline std::vector<Vector> visual_streams(const AblationVariant& v, const QueryStreams& q) {
    std::vector<Vector> out;
    if (v.use_pvrs) out.push_back(q.v_p);
    if (v.use_ivrs) out.push_back(q.v_i);
    if (out.empty()) out.push_back(q.cls);
    return out;
}

inline std::vector<Vector> enabled_streams(const AblationVariant& v, const QueryStreams& q) {
    auto out = visual_streams(v, q);
    if (v.use_mod_text) out.push_back(q.s_mt);
    if (v.use_target_text) out.push_back(q.r_tt);
    return out;
}

inline Vector sum_fusion(std::span<const Vector> streams) {
    if (streams.empty()) throw Error(ErrorCode::EmptyInput, "sum fusion with no streams");
    Vector acc = Vector::Zero(streams.front().size());
    for (const auto& s : streams) {
        require_same_dim(acc, s, "sum_fusion");
        acc += s;
    }
    return acc;
}

inline Vector sum_fusion(const AblationVariant& v, const QueryStreams& q) {
    return sum_fusion(enabled_streams(v, q));
}

/// All trainable state of one configured fusion. Only the member matching
/// `variant.fusion` is populated; the sum fusion has no parameters.
struct FusionModel {
    AblationVariant variant;
    Index dim = 0;
    Index hidden = 0;
    std::optional<WhcParams> whc;
    std::optional<CombinerParams> single;

    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        if (self.whc) {
            f(std::string("mod"), self.whc->mod_combiner);
            f(std::string("tgt"), self.whc->tgt_combiner);
            f(std::string("final"), self.whc->final_combiner);
        }
        if (self.single) f(std::string("single"), *self.single);
    }
    template <class F>
    void for_each_combiner(F&& f) { visit(*this, std::forward<F>(f)); }
    template <class F>
    void for_each_combiner(F&& f) const { visit(*this, std::forward<F>(f)); }

    FusionModel zeros_like() const {
        FusionModel z{variant, dim, hidden, std::nullopt, std::nullopt};
        if (whc) z.whc = WhcParams::zeros_like(*whc);
        if (single) z.single = CombinerParams::zeros_like(*single);
        return z;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each_combiner([&](const std::string&, const CombinerParams& c) {
            c.for_each_tensor([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
        });
        return n;
    }
};

using FusionGrads = FusionModel;

inline FusionModel init_fusion(const AblationVariant& variant, Index dim, Index hidden, std::uint64_t seed,
                               InitMode mode = InitMode::Xavier) {
    variant.validate();
    FusionModel m{variant, dim, hidden, std::nullopt, std::nullopt};
    switch (variant.fusion) {
        case FusionKind::Whc:
            m.whc = init_whc(seed, dim, hidden, mode, variant.visual_streams());
            break;
        case FusionKind::SingleCombiner:
            m.single = init_combiner(derive_seed(seed, 4), variant.visual_streams() + variant.text_streams(), dim,
                                     hidden, mode);
            break;
        case FusionKind::Sum:
            break;
    }
    return m;
}

struct FusionTrace {
    Vector q;
    std::optional<WhcTrace> whc;
    std::optional<CombinerOutput> single;
};

inline FusionTrace fusion_forward(const FusionModel& model, const QueryStreams& streams) {
    FusionTrace t;
    const auto& v = model.variant;
    switch (v.fusion) {
        case FusionKind::Whc: {
            auto out = whc_forward(*model.whc, visual_streams(v, streams), streams.s_mt, streams.r_tt);
            t.q = std::move(out.q);
            t.whc = std::move(out.trace);
            break;
        }
        case FusionKind::SingleCombiner: {
            t.single = combiner_forward(*model.single, enabled_streams(v, streams));
            t.q = t.single->output;
            break;
        }
        case FusionKind::Sum:
            t.q = sum_fusion(v, streams);
            break;
    }
    return t;
}

inline void fusion_backward(const FusionModel& model, const FusionTrace& trace, const Vector& d_q,
                            FusionGrads& grads) {
    if (trace.whc) whc_backward(*model.whc, *trace.whc, d_q, *grads.whc);
    if (trace.single) combiner_backward(*model.single, trace.single->cache, d_q, *grads.single);
}

}  // namespace mvs
