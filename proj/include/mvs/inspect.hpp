#pragma once

// Attention dump for one query: per-patch retain/delete scores, per-instance
// raw and normalized scores, and the stream weights of every combiner.
//
// CSV columns:
//   kind,stream,index,alpha_plus,alpha_minus,alpha_plus_norm,alpha_minus_norm,net,beta_0..beta_3
// kind=patch rows leave the *_norm cells empty; kind=beta rows carry the
// combiner arity in `index` and its weights in beta_0..beta_{k-1}.

#include "mvs/fusion.hpp"
#include "mvs/selection.hpp"

#include <cstdio>
#include <ostream>
#include <string>

namespace mvs {

inline constexpr int kInspectBetaColumns = 4;

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline void write_inspect_csv(std::ostream& out, const QuerySample& sample, const FusionModel& model,
                              double eps = 1e-12) {
    out << "kind,stream,index,alpha_plus,alpha_minus,alpha_plus_norm,alpha_minus_norm,net";
    for (int j = 0; j < kInspectBetaColumns; ++j) out << ",beta_" << j;
    out << '\n';
    const std::string no_betas(kInspectBetaColumns, ',');

    const auto patches = pvrs_weights(sample.patch_set, sample.r_rt, sample.r_dt);
    for (std::size_t i = 0; i < patches.alpha_plus.size(); ++i) {
        out << "patch,pvrs," << i << ',' << detail::fmt(patches.alpha_plus[i]) << ','
            << detail::fmt(patches.alpha_minus[i]) << ",,," << detail::fmt(patches.net(i)) << no_betas << '\n';
    }
    if (!sample.instance_set.empty()) {
        const auto inst = ivrs_weights(sample.instance_set, sample.r_rt, sample.r_dt, eps);
        for (std::size_t i = 0; i < inst.net.size(); ++i) {
            out << "instance,ivrs," << i << ',' << detail::fmt(inst.alpha_plus_raw[i]) << ','
                << detail::fmt(inst.alpha_minus_raw[i]) << ',' << detail::fmt(inst.alpha_plus_norm[i]) << ','
                << detail::fmt(inst.alpha_minus_norm[i]) << ',' << detail::fmt(inst.net[i]) << no_betas << '\n';
        }
    }

    const auto trace = fusion_forward(model, compute_streams(sample, eps));
    auto beta_row = [&](const std::string& name, const Vector& betas) {
        if (betas.size() > kInspectBetaColumns) throw Error(ErrorCode::ShapeMismatch, "combiner arity exceeds CSV columns");
        out << "beta," << name << ',' << betas.size() << ",,,,,";
        for (Index j = 0; j < kInspectBetaColumns; ++j) out << ',' << (j < betas.size() ? detail::fmt(betas[j]) : "");
        out << '\n';
    };
    if (trace.whc) {
        beta_row("mod", trace.whc->mod.betas);
        beta_row("tgt", trace.whc->tgt.betas);
        beta_row("final", trace.whc->final.betas);
    }
    if (trace.single) beta_row("single", trace.single->betas);
}

}  // namespace mvs
