#pragma once

// Batch-based classification loss: each query is a B-way softmax over the
// cosine similarities to every target in its batch, scaled by 1/tau, with
// its own target as the correct class.

#include "mvs/core.hpp"

#include <span>
#include <vector>

namespace mvs {

struct BatchLoss {
    double loss = 0.0;
    std::vector<Vector> d_queries;
};

inline BatchLoss batch_loss(std::span<const Vector> queries, std::span<const Vector> targets, double tau) {
    if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTau, "temperature must be positive");
    const auto batch = queries.size();
    if (batch == 0) throw Error(ErrorCode::EmptyInput, "empty batch");
    if (targets.size() != batch) throw Error(ErrorCode::ShapeMismatch, "queries and targets differ in count");

    const Index dim = queries.front().size();
    std::vector<double> q_norm(batch), t_norm(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        if (queries[i].size() != dim || targets[i].size() != dim) {
            throw Error(ErrorCode::DimMismatch, "batch vectors differ in dimension");
        }
        q_norm[i] = queries[i].norm();
        t_norm[i] = targets[i].norm();
        if (q_norm[i] == 0.0 || t_norm[i] == 0.0) throw Error(ErrorCode::ZeroVector, "zero-norm vector in batch");
    }

    BatchLoss out;
    out.d_queries.assign(batch, Vector::Zero(dim));
    const double inv_batch = 1.0 / static_cast<double>(batch);
    Vector cos_row(static_cast<Index>(batch));
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < batch; ++j) {
            cos_row[Index(j)] = queries[i].dot(targets[j]) / (q_norm[i] * t_norm[j]);
        }
        const Vector logits = cos_row / tau;
        const double top = logits.maxCoeff();
        const Vector e = (logits.array() - top).exp().matrix();
        const double sum = e.sum();
        out.loss += (top + std::log(sum) - logits[Index(i)]) * inv_batch;

        // d loss / d logit_ij = (p_ij - [i == j]) / B; d cos_ij / d q_i =
        // t_j / (|q_i||t_j|) - cos_ij q_i / |q_i|^2
        Vector& dq = out.d_queries[i];
        double radial = 0.0;
        for (std::size_t j = 0; j < batch; ++j) {
            double g = e[Index(j)] / sum - (i == j ? 1.0 : 0.0);
            g *= inv_batch / tau;
            dq += (g / (q_norm[i] * t_norm[j])) * targets[j];
            radial += g * cos_row[Index(j)];
        }
        dq -= (radial / (q_norm[i] * q_norm[i])) * queries[i];
    }
    return out;
}

}  // namespace mvs
