#pragma once

// k-input Combiner block.
//
//   concat = [W_1 x_1 : ... : W_k x_k]
//   hidden = max(0, trunk * concat + trunk_bias)
//   beta   = softmax(attn_head * hidden + attn_head_bias)
//   output = sum_j beta_j x_j + res_head * hidden + res_head_bias
//
// The attention and residual heads share one trunk. The weighted sum runs
// over the raw inputs; projections only feed the trunk.

#include "mvs/core.hpp"
#include "mvs/random.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mvs {

enum class InitMode {
    Xavier,   // every matrix uniform(-a, a), a = sqrt(6 / (fan_in + fan_out))
    ZeroMlp,  // projections as Xavier, trunk and heads all zero
};

struct CombinerParams {
    std::vector<Matrix> projections;  // k matrices, D x D
    Matrix trunk_weights;             // H x kD
    Vector trunk_bias;                // H
    Matrix attn_head_weights;         // k x H
    Vector attn_head_bias;            // k
    Matrix res_head_weights;          // D x H
    Vector res_head_bias;             // D

    Index arity() const { return static_cast<Index>(projections.size()); }
    Index dim() const { return res_head_bias.size(); }
    Index hidden() const { return trunk_bias.size(); }

    static CombinerParams zeros(Index k, Index dim, Index hidden) {
        CombinerParams p;
        p.projections.assign(static_cast<std::size_t>(k), Matrix::Zero(dim, dim));
        p.trunk_weights = Matrix::Zero(hidden, k * dim);
        p.trunk_bias = Vector::Zero(hidden);
        p.attn_head_weights = Matrix::Zero(k, hidden);
        p.attn_head_bias = Vector::Zero(k);
        p.res_head_weights = Matrix::Zero(dim, hidden);
        p.res_head_bias = Vector::Zero(dim);
        return p;
    }

    static CombinerParams zeros_like(const CombinerParams& other) {
        return zeros(other.arity(), other.dim(), other.hidden());
    }

    /// Visits every tensor in a fixed order as f(name, tensor). Vectors and
    /// matrices are both passed as Eigen dense objects.
    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        for (std::size_t j = 0; j < self.projections.size(); ++j) {
            f("proj." + std::to_string(j), self.projections[j]);
        }
        f(std::string("trunk.weight"), self.trunk_weights);
        f(std::string("trunk.bias"), self.trunk_bias);
        f(std::string("attn.weight"), self.attn_head_weights);
        f(std::string("attn.bias"), self.attn_head_bias);
        f(std::string("res.weight"), self.res_head_weights);
        f(std::string("res.bias"), self.res_head_bias);
    }
    template <class F>
    void for_each_tensor(F&& f) { visit(*this, std::forward<F>(f)); }
    template <class F>
    void for_each_tensor(F&& f) const { visit(*this, std::forward<F>(f)); }

    bool same_shape(const CombinerParams& o) const {
        return arity() == o.arity() && dim() == o.dim() && hidden() == o.hidden();
    }
};

using CombinerGrads = CombinerParams;

namespace detail {

inline void fill_uniform(Matrix& m, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-a, a);
}

}  // namespace detail

inline CombinerParams init_combiner(std::uint64_t seed, Index k, Index dim, Index hidden,
                                    InitMode mode = InitMode::Xavier) {
    if (k < 2 || dim < 1 || hidden < 1) {
        throw Error(ErrorCode::ShapeMismatch, "combiner needs k >= 2, D >= 1, H >= 1");
    }
    CombinerParams p = CombinerParams::zeros(k, dim, hidden);
    Rng rng(seed);
    for (auto& w : p.projections) detail::fill_uniform(w, rng);
    if (mode == InitMode::Xavier) {
        detail::fill_uniform(p.trunk_weights, rng);
        detail::fill_uniform(p.attn_head_weights, rng);
        detail::fill_uniform(p.res_head_weights, rng);
    }
    return p;
}

struct CombinerCache {
    std::vector<Vector> inputs;
    Vector concat;
    Vector pre_activation;
    Vector hidden;
    Vector logits;
    Vector betas;
};

struct CombinerOutput {
    Vector output;
    Vector betas;
    CombinerCache cache;
};

inline CombinerOutput combiner_forward(const CombinerParams& params, std::span<const Vector> inputs) {
    const Index k = params.arity();
    const Index dim = params.dim();
    if (static_cast<Index>(inputs.size()) != k) {
        throw Error(ErrorCode::ArityMismatch,
                    "combiner expects " + std::to_string(k) + " inputs, got " + std::to_string(inputs.size()));
    }
    for (const auto& x : inputs) {
        if (x.size() != dim) throw Error(ErrorCode::DimMismatch, "combiner input dimension differs from D");
    }

    CombinerOutput out;
    auto& cache = out.cache;
    cache.inputs.assign(inputs.begin(), inputs.end());
    cache.concat.resize(k * dim);
    for (Index j = 0; j < k; ++j) {
        cache.concat.segment(j * dim, dim).noalias() = params.projections[j] * inputs[j];
    }
    cache.pre_activation = params.trunk_bias;
    cache.pre_activation.noalias() += params.trunk_weights * cache.concat;
    cache.hidden = cache.pre_activation.cwiseMax(0.0);
    cache.logits = params.attn_head_bias;
    cache.logits.noalias() += params.attn_head_weights * cache.hidden;
    cache.betas = softmax(cache.logits);

    out.output = params.res_head_bias;
    out.output.noalias() += params.res_head_weights * cache.hidden;
    for (Index j = 0; j < k; ++j) out.output += cache.betas[j] * inputs[j];
    out.betas = cache.betas;
    return out;
}

inline CombinerOutput combiner_forward(const CombinerParams& params, std::initializer_list<Vector> inputs) {
    return combiner_forward(params, std::span<const Vector>(inputs.begin(), inputs.size()));
}

/// Reverse pass. Parameter gradients are accumulated into `grads` (so a batch
/// can share one buffer); gradients w.r.t. the k inputs are returned.
inline std::vector<Vector> combiner_backward(const CombinerParams& params, const CombinerCache& cache,
                                             const Vector& d_output, CombinerGrads& grads) {
    const Index k = params.arity();
    const Index dim = params.dim();
    if (static_cast<Index>(cache.inputs.size()) != k || cache.concat.size() != k * dim ||
        cache.hidden.size() != params.hidden() || cache.betas.size() != k || d_output.size() != dim) {
        throw Error(ErrorCode::StaleCache, "combiner cache does not match the parameters");
    }
    if (!grads.same_shape(params)) throw Error(ErrorCode::ShapeMismatch, "gradient buffer shape");

    // output = sum beta_j x_j + residual
    Vector d_betas(k);
    for (Index j = 0; j < k; ++j) d_betas[j] = d_output.dot(cache.inputs[j]);
    const double mean_term = cache.betas.dot(d_betas);
    const Vector d_logits = cache.betas.cwiseProduct((d_betas.array() - mean_term).matrix());

    grads.res_head_weights.noalias() += d_output * cache.hidden.transpose();
    grads.res_head_bias += d_output;
    grads.attn_head_weights.noalias() += d_logits * cache.hidden.transpose();
    grads.attn_head_bias += d_logits;

    Vector d_hidden = params.res_head_weights.transpose() * d_output;
    d_hidden.noalias() += params.attn_head_weights.transpose() * d_logits;
    const Vector d_pre = (cache.pre_activation.array() > 0.0).select(d_hidden, 0.0);

    grads.trunk_weights.noalias() += d_pre * cache.concat.transpose();
    grads.trunk_bias += d_pre;
    const Vector d_concat = params.trunk_weights.transpose() * d_pre;

    std::vector<Vector> d_inputs(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j) {
        const auto d_proj = d_concat.segment(j * dim, dim);
        grads.projections[j].noalias() += d_proj * cache.inputs[j].transpose();
        d_inputs[j] = cache.betas[j] * d_output;
        d_inputs[j].noalias() += params.projections[j].transpose() * d_proj;
    }
    return d_inputs;
}

struct CombinerBackward {
    CombinerGrads d_params;
    std::vector<Vector> d_inputs;
};

inline CombinerBackward combiner_backward(const CombinerParams& params, const CombinerCache& cache,
                                          const Vector& d_output) {
    CombinerBackward out{CombinerParams::zeros_like(params), {}};
    out.d_inputs = combiner_backward(params, cache, d_output, out.d_params);
    return out;
}

}  // namespace mvs
