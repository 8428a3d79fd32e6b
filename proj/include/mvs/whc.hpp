#pragma once

// Weighted hierarchical combination: a Modification combiner over the visual
// streams plus the modification text, a Target combiner over the visual
// streams plus the reasoned target text, and a Final combiner over their two
// outputs. The three combiners own independent parameters.

#include "mvs/combiner.hpp"

#include <vector>

namespace mvs {

struct WhcParams {
    CombinerParams mod_combiner;
    CombinerParams tgt_combiner;
    CombinerParams final_combiner;

    Index dim() const { return final_combiner.dim(); }

    static WhcParams zeros_like(const WhcParams& o) {
        return {CombinerParams::zeros_like(o.mod_combiner), CombinerParams::zeros_like(o.tgt_combiner),
                CombinerParams::zeros_like(o.final_combiner)};
    }
};

using WhcGrads = WhcParams;

/// `visual_streams` is the number of visual inputs each text combiner sees
/// (2 for patch + instance selection).
inline WhcParams init_whc(std::uint64_t seed, Index dim, Index hidden, InitMode mode = InitMode::Xavier,
                          Index visual_streams = 2) {
    return {init_combiner(derive_seed(seed, 1), visual_streams + 1, dim, hidden, mode),
            init_combiner(derive_seed(seed, 2), visual_streams + 1, dim, hidden, mode),
            init_combiner(derive_seed(seed, 3), 2, dim, hidden, mode)};
}

struct WhcTrace {
    CombinerOutput mod;
    CombinerOutput tgt;
    CombinerOutput final;
};

struct WhcOutput {
    Vector q;
    WhcTrace trace;
};

inline WhcOutput whc_forward(const WhcParams& whc, std::span<const Vector> visual, const Vector& s_mt,
                             const Vector& r_tt) {
    std::vector<Vector> mod_in(visual.begin(), visual.end());
    std::vector<Vector> tgt_in(visual.begin(), visual.end());
    mod_in.push_back(s_mt);
    tgt_in.push_back(r_tt);

    WhcOutput out;
    out.trace.mod = combiner_forward(whc.mod_combiner, mod_in);
    out.trace.tgt = combiner_forward(whc.tgt_combiner, tgt_in);
    out.trace.final = combiner_forward(whc.final_combiner, {out.trace.mod.output, out.trace.tgt.output});
    out.q = out.trace.final.output;
    return out;
}

inline WhcOutput whc_forward(const WhcParams& whc, const Vector& v_p, const Vector& v_i, const Vector& s_mt,
                             const Vector& r_tt) {
    const std::vector<Vector> visual{v_p, v_i};
    return whc_forward(whc, visual, s_mt, r_tt);
}

/// Accumulates parameter gradients of all three combiners into `grads`.
inline void whc_backward(const WhcParams& whc, const WhcTrace& trace, const Vector& d_q, WhcGrads& grads) {
    const auto d_streams = combiner_backward(whc.final_combiner, trace.final.cache, d_q, grads.final_combiner);
    combiner_backward(whc.mod_combiner, trace.mod.cache, d_streams[0], grads.mod_combiner);
    combiner_backward(whc.tgt_combiner, trace.tgt.cache, d_streams[1], grads.tgt_combiner);
}

inline WhcGrads whc_backward(const WhcParams& whc, const WhcTrace& trace, const Vector& d_q) {
    WhcGrads grads = WhcParams::zeros_like(whc);
    whc_backward(whc, trace, d_q, grads);
    return grads;
}

}  // namespace mvs
