#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "anomet/data.hpp"
#include "anomet/encoder.hpp"

namespace anomet {

// Everything the training loop needs. input_dim = 0 means "take the feature
// dimension from the manifest".
struct TrainConfig {
    double lr0 = 0.01;
    double momentum = 0.9;
    size_t epochs = 250;
    double lr_decay_factor = 0.1;
    size_t lr_decay_period = 100; // epochs between decays
    size_t batch_normals = 10;    // anchors/positives per batch
    size_t batch_anomalies = 150; // negatives per batch
    double temperature = 0.1;
    uint64_t seed = 1;
    double lambda_n = 1.0; // fraction of normal training folds used
    double lambda_a = 1.0; // fraction of anomalous training folds used
    size_t folds = 5;
    double feature_noise_sigma = 0.01; // train-time additive augmentation
    View view = View::top;
    Modality modality = Modality::depth;
    EncoderDims dims{0, {}, 512, 512, 128};
};

// Ordered key/value pairs; later entries win so command-line overrides can
// simply be appended after the file contents.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

// Flat `key = value` UTF-8 text, '#' starts a comment, blank lines ignored.
ConfigEntries parse_config_file(const std::filesystem::path& path);

// Each override is one `key=value` token (the --set flag's payload).
ConfigEntries parse_overrides(const std::vector<std::string>& overrides);

// Schema application: unknown keys and unparseable values are usage errors,
// out-of-range values are validation errors.
TrainConfig make_train_config(const ConfigEntries& entries);
SynthConfig make_synth_config(const ConfigEntries& entries);

void validate_train_config(const TrainConfig& cfg);

} // namespace anomet
