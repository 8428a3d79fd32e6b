#pragma once

#include "mvs/core.hpp"
#include "mvs/fusion.hpp"

#include <cmath>

namespace mvs {

struct AdamHyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update of a single dense tensor, elementwise.
/// `t` is the 1-based step count.
template <class P, class G, class M>
void adam_step(Eigen::DenseBase<P>& param, const Eigen::DenseBase<G>& grad, Eigen::DenseBase<M>& first,
               Eigen::DenseBase<M>& second, long t, const AdamHyper& hp) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols() || param.rows() != first.rows() ||
        param.cols() != first.cols() || param.rows() != second.rows() || param.cols() != second.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "adam_step tensor shapes differ");
    }
    if (t < 1) throw Error(ErrorCode::ShapeMismatch, "adam step count must be >= 1");
    const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
    for (Index r = 0; r < param.rows(); ++r) {
        for (Index c = 0; c < param.cols(); ++c) {
            const double g = grad(r, c);
            double& m = first(r, c);
            double& v = second(r, c);
            m = hp.beta1 * m + (1.0 - hp.beta1) * g;
            v = hp.beta2 * v + (1.0 - hp.beta2) * g * g;
            const double m_hat = m / c1;
            const double v_hat = v / c2;
            param(r, c) -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
        }
    }
}

/// Moment buffers for every tensor of a FusionModel.
struct AdamState {
    FusionModel first;
    FusionModel second;
    long step = 0;

    explicit AdamState(const FusionModel& model) : first(model.zeros_like()), second(model.zeros_like()) {}
};

inline void adam_step(FusionModel& model, const FusionGrads& grads, AdamState& state, const AdamHyper& hp) {
    ++state.step;
    std::vector<CombinerParams*> params, g1, g2;
    std::vector<const CombinerParams*> gs;
    model.for_each_combiner([&](const std::string&, CombinerParams& c) { params.push_back(&c); });
    grads.for_each_combiner([&](const std::string&, const CombinerParams& c) { gs.push_back(&c); });
    state.first.for_each_combiner([&](const std::string&, CombinerParams& c) { g1.push_back(&c); });
    state.second.for_each_combiner([&](const std::string&, CombinerParams& c) { g2.push_back(&c); });
    if (gs.size() != params.size() || g1.size() != params.size() || g2.size() != params.size()) {
        throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match the model");
    }

    for (std::size_t c = 0; c < params.size(); ++c) {
        std::vector<Eigen::Map<Eigen::ArrayXd>> p, m, v;
        std::vector<Eigen::Map<const Eigen::ArrayXd>> g;
        auto collect = [](auto& out) {
            return [&out](const std::string&, auto& t) { out.emplace_back(t.data(), t.size()); };
        };
        params[c]->for_each_tensor(collect(p));
        g1[c]->for_each_tensor(collect(m));
        g2[c]->for_each_tensor(collect(v));
        static_cast<const CombinerParams*>(gs[c])->for_each_tensor(collect(g));
        if (g.size() != p.size()) throw Error(ErrorCode::ShapeMismatch, "gradient tensor count");
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (g[i].size() != p[i].size()) throw Error(ErrorCode::ShapeMismatch, "gradient tensor size");
            adam_step(p[i], g[i], m[i], v[i], state.step, hp);
        }
    }
}

}  // namespace mvs
