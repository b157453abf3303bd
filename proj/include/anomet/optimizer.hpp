#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "anomet/config.hpp"
#include "anomet/data.hpp"
#include "anomet/encoder.hpp"
#include "anomet/errors.hpp"
#include "anomet/rng.hpp"

namespace anomet {

// Pool indices drawn for one step: K normals, M anomalies. Sampling is
// without replacement while the pool is large enough, with replacement
// otherwise (the anomaly pool is usually smaller than M).
struct BatchSample {
    std::vector<size_t> normals;
    std::vector<size_t> anomalies;
};

BatchSample sample_batch(Rng& rng, size_t normal_pool, size_t anomaly_pool, size_t k, size_t m);

// Classical momentum: v <- momentum v + g, w <- w - lr v. Shapes must
// conform; a non-finite gradient aborts before touching the parameters.
void sgd_step(EncoderParams& params, const ParamTensors& grads, ParamTensors& velocity, double lr,
              double momentum);

// Step decay: lr0 * factor^(epoch / period), integer division.
double lr_at(size_t epoch, const TrainConfig& cfg);

struct StepRecord {
    size_t step = 0;
    size_t epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    EncoderParams params;
    std::vector<StepRecord> history;
};

// Raised when the loss or a gradient stops being finite mid-run; carries the
// last healthy parameters and the history up to that point.
class TrainDivergenceError : public NumericalError {
  public:
    TrainDivergenceError(const std::string& msg, EncoderParams params,
                         std::vector<StepRecord> history)
        : NumericalError(msg), last_params(std::move(params)), history(std::move(history)) {}

    EncoderParams last_params;
    std::vector<StepRecord> history;
};

// Full training loop on one sensor stream of the dataset: subject-fold
// subsetting, batch sampling, optional feature noise, forward/backward,
// SGD with the step schedule. ceil(#normals / K) batches per epoch.
// Reproducible bit-for-bit from cfg.seed.
TrainResult train(const TrainConfig& cfg, const DatasetSplit& dataset);

// History as `step,epoch,lr,loss` CSV.
void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& history);

} // namespace anomet
