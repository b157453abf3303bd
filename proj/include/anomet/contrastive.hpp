#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "anomet/linalg.hpp"

namespace anomet {

// One training batch in the contrastive space. All embeddings must already
// be unit norm (within 1e-6); the loss works on raw dot products.
struct MiniBatch {
    std::vector<Vec> normals;   // K >= 2 rows
    std::vector<Vec> anomalies; // M >= 0 rows, the negatives
    double temperature = 0.1;
};

// Loss gradients wrt every embedding in the batch, same layout as MiniBatch.
struct BatchGrads {
    std::vector<Vec> normals;
    std::vector<Vec> anomalies;
};

// Loss for the ordered pair (anchor i, positive j): softmax cross-entropy of
// the positive similarity against the anomaly similarities of the anchor,
// all scaled by 1/temperature.
double pair_loss(const MiniBatch& batch, size_t i, size_t j);

// Mean of pair_loss over all K(K-1) ordered pairs.
double batch_loss(const MiniBatch& batch);

// Analytic gradient of batch_loss wrt every embedding.
BatchGrads batch_loss_grad(const MiniBatch& batch);

// Weighted binary cross-entropy on raw logits; labels are 0 (normal) or
// 1 (anomalous) and class_weights[label] scales each term. Numerically
// stable for large |logit|.
double binary_ce_loss(const std::vector<double>& logits, const std::vector<int>& labels,
                      const std::array<double, 2>& class_weights);

// Balanced weights n/(2 n_c) for class counts (n0 normals, n1 anomalies).
std::array<double, 2> inverse_frequency_weights(size_t n0, size_t n1);

} // namespace anomet
