#include "anomet/optimizer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "anomet/contrastive.hpp"
#include "anomet/text.hpp"

namespace anomet {

namespace {

// First k entries of a partial Fisher-Yates pass: a uniform draw without
// replacement.
std::vector<size_t> draw_without_replacement(Rng& rng, size_t pool, size_t k) {
    std::vector<size_t> indices(pool);
    std::iota(indices.begin(), indices.end(), size_t{0});
    for (size_t i = 0; i < k; ++i) {
        const size_t j = i + static_cast<size_t>(rng.below(pool - i));
        std::swap(indices[i], indices[j]);
    }
    indices.resize(k);
    return indices;
}

std::vector<size_t> draw_with_replacement(Rng& rng, size_t pool, size_t k) {
    std::vector<size_t> indices(k);
    for (size_t& idx : indices) idx = static_cast<size_t>(rng.below(pool));
    return indices;
}

std::vector<size_t> draw(Rng& rng, size_t pool, size_t k, const char* kind) {
    if (k == 0) return {};
    if (pool == 0) {
        throw ValidationError(std::string("cannot sample from an empty ") + kind + " pool");
    }
    return k <= pool ? draw_without_replacement(rng, pool, k)
                     : draw_with_replacement(rng, pool, k);
}

void check_finite(const Mat& m, const char* name) {
    if (!all_finite(m)) {
        throw NumericalError(std::string("non-finite gradient in ") + name);
    }
}

void check_finite(const Vec& v, const char* name) {
    if (!all_finite(v)) {
        throw NumericalError(std::string("non-finite gradient in ") + name);
    }
}

void momentum_update(Mat& w, const Mat& g, Mat& v, double lr, double momentum) {
    if (w.rows != g.rows || w.cols != g.cols || w.rows != v.rows || w.cols != v.cols) {
        throw std::invalid_argument("sgd_step: tensor shape mismatch");
    }
    for (size_t i = 0; i < w.data.size(); ++i) {
        v.data[i] = momentum * v.data[i] + g.data[i];
        w.data[i] -= lr * v.data[i];
    }
}

void momentum_update(Vec& w, const Vec& g, Vec& v, double lr, double momentum) {
    if (w.size() != g.size() || w.size() != v.size()) {
        throw std::invalid_argument("sgd_step: tensor shape mismatch");
    }
    for (size_t i = 0; i < w.size(); ++i) {
        v[i] = momentum * v[i] + g[i];
        w[i] -= lr * v[i];
    }
}

} // namespace

BatchSample sample_batch(Rng& rng, size_t normal_pool, size_t anomaly_pool, size_t k, size_t m) {
    if (k < 2) throw ValidationError("a batch needs at least 2 normals, got " + std::to_string(k));
    BatchSample sample;
    sample.normals = draw(rng, normal_pool, k, "normal");
    sample.anomalies = draw(rng, anomaly_pool, m, "anomaly");
    return sample;
}

void sgd_step(EncoderParams& params, const ParamTensors& grads, ParamTensors& velocity, double lr,
              double momentum) {
    if (grads.layers.size() != params.layers.size() ||
        velocity.layers.size() != params.layers.size()) {
        throw std::invalid_argument("sgd_step: layer count mismatch");
    }
    // Validate everything first so a bad gradient never half-applies.
    for (size_t l = 0; l < grads.layers.size(); ++l) {
        const std::string name = "layer " + std::to_string(l);
        check_finite(grads.layers[l].w, name.c_str());
        check_finite(grads.layers[l].b, name.c_str());
    }
    check_finite(grads.head_w1, "head_w1");
    check_finite(grads.head_w2, "head_w2");

    for (size_t l = 0; l < params.layers.size(); ++l) {
        momentum_update(params.layers[l].w, grads.layers[l].w, velocity.layers[l].w, lr, momentum);
        momentum_update(params.layers[l].b, grads.layers[l].b, velocity.layers[l].b, lr, momentum);
    }
    momentum_update(params.head_w1, grads.head_w1, velocity.head_w1, lr, momentum);
    momentum_update(params.head_w2, grads.head_w2, velocity.head_w2, lr, momentum);
}

double lr_at(size_t epoch, const TrainConfig& cfg) {
    const size_t decays = epoch / cfg.lr_decay_period;
    return cfg.lr0 * std::pow(cfg.lr_decay_factor, static_cast<double>(decays));
}

TrainResult train(const TrainConfig& cfg, const DatasetSplit& dataset) {
    validate_train_config(cfg);

    const DatasetSplit working = subset(dataset, cfg.lambda_n, cfg.lambda_a, cfg.seed, cfg.folds);
    const std::vector<ClipSample> stream = filter_stream(working.train, cfg.view, cfg.modality);

    std::vector<Vec> normal_pool;
    std::vector<Vec> anomaly_pool;
    for (const ClipSample& c : stream) {
        (c.label == Label::normal ? normal_pool : anomaly_pool).push_back(c.features);
    }
    if (normal_pool.size() < cfg.batch_normals) {
        throw ValidationError("training pool has " + std::to_string(normal_pool.size()) +
                              " normal clips for " + to_string(cfg.view) + ":" +
                              to_string(cfg.modality) + ", need at least " +
                              std::to_string(cfg.batch_normals));
    }
    if (cfg.batch_anomalies > 0 && anomaly_pool.empty()) {
        throw ValidationError("training pool has no anomalous clips for " + to_string(cfg.view) +
                              ":" + to_string(cfg.modality) +
                              " but batch_anomalies > 0");
    }

    EncoderDims dims = cfg.dims;
    const size_t data_dim = normal_pool.front().size();
    if (dims.input_dim == 0) {
        dims.input_dim = data_dim;
    } else if (dims.input_dim != data_dim) {
        throw ValidationError("config input_dim " + std::to_string(dims.input_dim) +
                              " does not match manifest feature dim " + std::to_string(data_dim));
    }

    Rng rng(cfg.seed);
    TrainResult result;
    result.params = init_encoder(dims, rng);
    result.params.seed = cfg.seed;

    ParamTensors velocity = zeros_like(result.params);
    const size_t batches_per_epoch =
        (normal_pool.size() + cfg.batch_normals - 1) / cfg.batch_normals;

    // One forward trace per batch member, consumed by the backward pass in
    // the same order.
    std::vector<ForwardTrace> traces(cfg.batch_normals + cfg.batch_anomalies);
    auto forward_into = [&](const Vec& features, ForwardTrace& trace) {
        Vec x = features;
        if (cfg.feature_noise_sigma > 0.0) {
            for (double& v : x) v += cfg.feature_noise_sigma * rng.gauss();
        }
        const Vec h = encode(result.params, x, &trace);
        return project(result.params, h, &trace);
    };

    size_t step = 0;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        for (size_t b = 0; b < batches_per_epoch; ++b, ++step) {
            const BatchSample sample = sample_batch(rng, normal_pool.size(), anomaly_pool.size(),
                                                    cfg.batch_normals, cfg.batch_anomalies);
            MiniBatch batch;
            batch.temperature = cfg.temperature;
            batch.normals.reserve(sample.normals.size());
            batch.anomalies.reserve(sample.anomalies.size());
            size_t t = 0;
            for (size_t idx : sample.normals) {
                batch.normals.push_back(forward_into(normal_pool[idx], traces[t++]));
            }
            for (size_t idx : sample.anomalies) {
                batch.anomalies.push_back(forward_into(anomaly_pool[idx], traces[t++]));
            }

            const double loss = batch_loss(batch);
            if (!std::isfinite(loss)) {
                throw TrainDivergenceError("loss became non-finite at step " + std::to_string(step) +
                                               " (epoch " + std::to_string(epoch) + ")",
                                           result.params, result.history);
            }
            const BatchGrads grad_v = batch_loss_grad(batch);

            ParamTensors grads = zeros_like(result.params);
            t = 0;
            for (size_t i = 0; i < batch.normals.size(); ++i) {
                backward(result.params, traces[t], grad_v.normals[i], grads);
                ++t;
            }
            for (size_t i = 0; i < batch.anomalies.size(); ++i) {
                backward(result.params, traces[t], grad_v.anomalies[i], grads);
                ++t;
            }

            try {
                sgd_step(result.params, grads, velocity, lr, cfg.momentum);
            } catch (const NumericalError& e) {
                throw TrainDivergenceError("aborting at step " + std::to_string(step) + ": " +
                                               e.what(),
                                           result.params, result.history);
            }
            result.history.push_back({step, epoch, lr, loss});
        }
    }
    return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& history) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + path.string() + " for writing");
    f << "step,epoch,lr,loss\n";
    for (const StepRecord& r : history) {
        f << r.step << ',' << r.epoch << ',' << fmt_real(r.lr) << ',' << fmt_real(r.loss) << '\n';
    }
    f.flush();
    if (!f) throw ValidationError("failed writing " + path.string());
}

} // namespace anomet
