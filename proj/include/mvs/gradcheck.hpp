#pragma once

// Central finite-difference verification of the hand-written reverse passes.
//
// Relative error of one entry: |analytic - numeric| / max(|analytic|, |numeric|, floor).
// The floor keeps entries whose true gradient is ~0 from dividing roundoff
// noise by roundoff noise.

#include "mvs/fusion.hpp"
#include "mvs/loss.hpp"
#include "mvs/random.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mvs {

struct GradcheckOptions {
    std::uint64_t seed = 124;
    Index dim = 8;
    Index hidden = 32;
    double step = 1e-5;
    double floor = 1e-3;
};

struct GradcheckCase {
    std::string name;
    std::size_t entries = 0;
    double max_rel_error = 0.0;
};

inline double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {

inline Vector random_vector(Rng& rng, Index dim, double scale = 1.0) {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v[i] = scale * rng.uniform(-1.0, 1.0);
    return v;
}

/// Fills biases with small random values so every path carries gradient.
inline void jitter_biases(CombinerParams& p, Rng& rng) {
    for (Index i = 0; i < p.trunk_bias.size(); ++i) p.trunk_bias[i] = rng.uniform(-0.1, 0.1);
    for (Index i = 0; i < p.attn_head_bias.size(); ++i) p.attn_head_bias[i] = rng.uniform(-0.1, 0.1);
    for (Index i = 0; i < p.res_head_bias.size(); ++i) p.res_head_bias[i] = rng.uniform(-0.1, 0.1);
}

/// Compares `analytic` against central differences of `loss` for every
/// scalar in `model`.
inline void compare_params(FusionModel& model, const FusionGrads& analytic, const std::function<double()>& loss,
                           double step, double floor, GradcheckCase& out) {
    std::vector<double*> p;
    std::vector<const double*> g;
    model.for_each_combiner([&](const std::string&, CombinerParams& c) {
        c.for_each_tensor([&](const std::string&, auto& t) {
            for (Index i = 0; i < t.size(); ++i) p.push_back(t.data() + i);
        });
    });
    analytic.for_each_combiner([&](const std::string&, const CombinerParams& c) {
        c.for_each_tensor([&](const std::string&, const auto& t) {
            for (Index i = 0; i < t.size(); ++i) g.push_back(t.data() + i);
        });
    });
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = *p[i];
        *p[i] = saved + step;
        const double up = loss();
        *p[i] = saved - step;
        const double down = loss();
        *p[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        out.max_rel_error = std::max(out.max_rel_error, relative_error(*g[i], numeric, floor));
        ++out.entries;
    }
}

}  // namespace detail

/// Probe L = 1/2 |q - t|^2 on a single fused query, for one configured model.
inline GradcheckCase gradcheck_probe(const std::string& name, FusionModel model, const QueryStreams& streams,
                                     const Vector& probe_target, const GradcheckOptions& opt) {
    auto loss = [&] { return 0.5 * (fusion_forward(model, streams).q - probe_target).squaredNorm(); };
    const auto trace = fusion_forward(model, streams);
    FusionGrads grads = model.zeros_like();
    fusion_backward(model, trace, trace.q - probe_target, grads);
    GradcheckCase c{name};
    detail::compare_params(model, grads, loss, opt.step, opt.floor, c);
    return c;
}

/// Batch loss over B fused queries, gradients through the loss and fusion.
inline GradcheckCase gradcheck_batch(const std::string& name, FusionModel model,
                                     const std::vector<QueryStreams>& streams, const std::vector<Vector>& targets,
                                     double tau, const GradcheckOptions& opt) {
    auto forward_queries = [&] {
        std::vector<Vector> q;
        for (const auto& s : streams) q.push_back(fusion_forward(model, s).q);
        return q;
    };
    auto loss = [&] { return batch_loss(forward_queries(), targets, tau).loss; };

    std::vector<FusionTrace> traces;
    std::vector<Vector> queries;
    for (const auto& s : streams) {
        traces.push_back(fusion_forward(model, s));
        queries.push_back(traces.back().q);
    }
    const auto bl = batch_loss(queries, targets, tau);
    FusionGrads grads = model.zeros_like();
    for (std::size_t i = 0; i < traces.size(); ++i) fusion_backward(model, traces[i], bl.d_queries[i], grads);

    GradcheckCase c{name};
    detail::compare_params(model, grads, loss, opt.step, opt.floor, c);

    // d loss / d query, directly
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (Index k = 0; k < queries[i].size(); ++k) {
            auto q = queries;
            q[i][k] += opt.step;
            const double up = batch_loss(q, targets, tau).loss;
            q[i][k] -= 2.0 * opt.step;
            const double down = batch_loss(q, targets, tau).loss;
            const double numeric = (up - down) / (2.0 * opt.step);
            c.max_rel_error = std::max(c.max_rel_error, relative_error(bl.d_queries[i][k], numeric, opt.floor));
            ++c.entries;
        }
    }
    return c;
}

inline QueryStreams random_streams(Rng& rng, Index dim) {
    QueryStreams s;
    s.v_p = detail::random_vector(rng, dim);
    s.v_i = detail::random_vector(rng, dim);
    s.cls = detail::random_vector(rng, dim);
    s.s_mt = detail::random_vector(rng, dim);
    s.r_tt = detail::random_vector(rng, dim);
    return s;
}

inline FusionModel random_model(const AblationVariant& variant, Index dim, Index hidden, std::uint64_t seed) {
    auto model = init_fusion(variant, dim, hidden, seed);
    Rng rng(derive_seed(seed, 99));
    model.for_each_combiner([&](const std::string&, CombinerParams& c) { detail::jitter_biases(c, rng); });
    return model;
}

/// The standard suite: a 2-input and a 3-input combiner, the full hierarchy,
/// and the hierarchy under the batch loss.
inline std::vector<GradcheckCase> run_gradcheck(const GradcheckOptions& opt) {
    Rng rng(derive_seed(opt.seed, 7));
    std::vector<GradcheckCase> cases;

    const auto k2 = ablation_row(7);  // cls + mod text
    const auto k3 = ablation_row(4);  // patch + instance + mod text
    const auto full = ablation_row(1);

    auto streams = random_streams(rng, opt.dim);
    cases.push_back(gradcheck_probe("combiner_k2", random_model(k2, opt.dim, opt.hidden, opt.seed + 1), streams,
                                    detail::random_vector(rng, opt.dim), opt));
    cases.push_back(gradcheck_probe("combiner_k3", random_model(k3, opt.dim, opt.hidden, opt.seed + 2), streams,
                                    detail::random_vector(rng, opt.dim), opt));
    cases.push_back(gradcheck_probe("whc", random_model(full, opt.dim, opt.hidden, opt.seed + 3), streams,
                                    detail::random_vector(rng, opt.dim), opt));

    std::vector<QueryStreams> batch;
    std::vector<Vector> targets;
    for (int i = 0; i < 4; ++i) {
        batch.push_back(random_streams(rng, opt.dim));
        targets.push_back(detail::random_vector(rng, opt.dim));
    }
    cases.push_back(gradcheck_batch("whc_batch_loss", random_model(full, opt.dim, opt.hidden, opt.seed + 4), batch,
                                    targets, 0.5, opt));
    return cases;
}

}  // namespace mvs
