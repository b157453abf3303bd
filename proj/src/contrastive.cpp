#include "anomet/contrastive.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "anomet/errors.hpp"

namespace anomet {

namespace {

constexpr double kUnitNormTol = 1e-6;

void validate_batch(const MiniBatch& batch) {
    if (batch.normals.size() < 2) {
        throw ValidationError("mini-batch needs at least 2 normal embeddings, got " +
                              std::to_string(batch.normals.size()));
    }
    if (!(batch.temperature > 0.0)) {
        throw ValidationError("temperature must be positive, got " +
                              std::to_string(batch.temperature));
    }
    const size_t dim = batch.normals.front().size();
    auto check_rows = [&](const std::vector<Vec>& rows, const char* kind) {
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != dim) {
                throw ValidationError(std::string(kind) + " embedding " + std::to_string(i) +
                                      " has dim " + std::to_string(rows[i].size()) +
                                      ", batch uses " + std::to_string(dim));
            }
            const double n = l2_norm(rows[i]);
            if (std::abs(n - 1.0) > kUnitNormTol) {
                throw ValidationError(std::string(kind) + " embedding " + std::to_string(i) +
                                      " is not unit norm (|v| = " + std::to_string(n) + ")");
            }
        }
    };
    check_rows(batch.normals, "normal");
    check_rows(batch.anomalies, "anomaly");
}

void check_pair(const MiniBatch& batch, size_t i, size_t j) {
    const size_t k = batch.normals.size();
    if (i >= k || j >= k) {
        throw std::invalid_argument("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                                    ") out of range for " + std::to_string(k) + " normals");
    }
    if (i == j) throw std::invalid_argument("pair_loss needs two distinct normals");
}

// Numerically stable softplus, log(1 + e^x).
double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

} // namespace

double pair_loss(const MiniBatch& batch, size_t i, size_t j) {
    validate_batch(batch);
    check_pair(batch, i, j);

    const double inv_t = 1.0 / batch.temperature;
    const double l_pos = dot(batch.normals[i], batch.normals[j]) * inv_t;

    // Log-sum-exp over the positive logit and the anchor's anomaly logits,
    // shifted by the max so an anomaly-free batch yields exactly zero.
    double max_logit = l_pos;
    std::vector<double> l_anom(batch.anomalies.size());
    for (size_t m = 0; m < batch.anomalies.size(); ++m) {
        l_anom[m] = dot(batch.normals[i], batch.anomalies[m]) * inv_t;
        if (l_anom[m] > max_logit) max_logit = l_anom[m];
    }
    double z = std::exp(l_pos - max_logit);
    for (double l : l_anom) z += std::exp(l - max_logit);
    return -(l_pos - max_logit) + std::log(z);
}

double batch_loss(const MiniBatch& batch) {
    validate_batch(batch);
    const size_t k = batch.normals.size();
    double total = 0.0;
    for (size_t i = 0; i < k; ++i) {
        for (size_t j = 0; j < k; ++j) {
            if (i != j) total += pair_loss(batch, i, j);
        }
    }
    return total / static_cast<double>(k * (k - 1));
}

BatchGrads batch_loss_grad(const MiniBatch& batch) {
    validate_batch(batch);
    const size_t k = batch.normals.size();
    const size_t m_count = batch.anomalies.size();
    const size_t dim = batch.normals.front().size();

    BatchGrads grads;
    grads.normals.assign(k, Vec(dim, 0.0));
    grads.anomalies.assign(m_count, Vec(dim, 0.0));
    if (m_count == 0) return grads; // loss is identically zero

    const double inv_t = 1.0 / batch.temperature;
    const double inv_pairs = 1.0 / static_cast<double>(k * (k - 1));

    std::vector<double> l_anom(m_count);
    std::vector<double> e_anom(m_count);
    for (size_t i = 0; i < k; ++i) {
        const Vec& vi = batch.normals[i];

        // Anchor-side quantities shared by every pair (i, j): shifted
        // exponentials of the anomaly logits, their sum, and their
        // embedding-weighted sum.
        double max_anom = -std::numeric_limits<double>::infinity();
        for (size_t m = 0; m < m_count; ++m) {
            l_anom[m] = dot(vi, batch.anomalies[m]) * inv_t;
            if (l_anom[m] > max_anom) max_anom = l_anom[m];
        }
        double a_sum = 0.0;
        Vec s_sum(dim, 0.0);
        for (size_t m = 0; m < m_count; ++m) {
            e_anom[m] = std::exp(l_anom[m] - max_anom);
            a_sum += e_anom[m];
            add_scaled(s_sum, e_anom[m], batch.anomalies[m]);
        }

        double w_total = 0.0; // sum over j of the anomaly softmax scale
        for (size_t j = 0; j < k; ++j) {
            if (j == i) continue;
            const Vec& vj = batch.normals[j];
            const double l_pos = dot(vi, vj) * inv_t;
            const double m_all = std::max(l_pos, max_anom);
            const double denom = std::exp(l_pos - m_all) + std::exp(max_anom - m_all) * a_sum;
            const double p_pos = std::exp(l_pos - m_all) / denom;
            const double w = std::exp(max_anom - m_all) / denom;
            w_total += w;

            // dL/d(vi . vj) = (p_pos - 1) / t, split between both normals;
            // the anchor also feels every anomaly through the denominator.
            const double c_pair = (p_pos - 1.0) * inv_t * inv_pairs;
            add_scaled(grads.normals[i], c_pair, vj);
            add_scaled(grads.normals[j], c_pair, vi);
            add_scaled(grads.normals[i], w * inv_t * inv_pairs, s_sum);
        }

        const double c_anchor = w_total * inv_t * inv_pairs;
        for (size_t m = 0; m < m_count; ++m) {
            add_scaled(grads.anomalies[m], c_anchor * e_anom[m], vi);
        }
    }
    return grads;
}

double binary_ce_loss(const std::vector<double>& logits, const std::vector<int>& labels,
                      const std::array<double, 2>& class_weights) {
    if (logits.empty()) throw ValidationError("binary_ce_loss: empty batch");
    if (logits.size() != labels.size()) {
        throw std::invalid_argument("binary_ce_loss: " + std::to_string(logits.size()) +
                                    " logits vs " + std::to_string(labels.size()) + " labels");
    }
    double total = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw ValidationError("binary_ce_loss: label " + std::to_string(labels[i]) +
                                  " at index " + std::to_string(i) + " is not 0/1");
        }
        // -log sigmoid(s) for the positive class, -log(1 - sigmoid(s)) for
        // the negative one, both via softplus to survive large |s|.
        const double nll = labels[i] == 1 ? softplus(-logits[i]) : softplus(logits[i]);
        total += class_weights[static_cast<size_t>(labels[i])] * nll;
    }
    return total / static_cast<double>(logits.size());
}

std::array<double, 2> inverse_frequency_weights(size_t n0, size_t n1) {
    if (n0 == 0 || n1 == 0) {
        throw ValidationError("inverse_frequency_weights: both classes must be present (" +
                              std::to_string(n0) + ", " + std::to_string(n1) + ")");
    }
    const double n = static_cast<double>(n0 + n1);
    return {n / (2.0 * static_cast<double>(n0)), n / (2.0 * static_cast<double>(n1))};
}

} // namespace anomet
