#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "anomet/linalg.hpp"
#include "anomet/rng.hpp"

namespace anomet {

struct EncoderDims {
    size_t input_dim = 0;
    std::vector<size_t> hidden_dims; // encoder hidden widths, may be empty
    size_t embed_dim = 512;          // encoder output width (h)
    size_t head_hidden_dim = 512;    // projection head hidden width
    size_t proj_dim = 128;           // contrastive space width (v)

    bool operator==(const EncoderDims&) const = default;
};

struct DenseLayer {
    Mat w;
    Vec b;

    bool operator==(const DenseLayer&) const = default;
};

// Feed-forward encoder stack plus a one-hidden-layer ReLU projection head.
// The head carries no biases.
struct EncoderParams {
    EncoderDims dims;
    std::vector<DenseLayer> layers; // input_dim -> hidden... -> embed_dim
    Mat head_w1;                    // embed_dim -> head_hidden_dim
    Mat head_w2;                    // head_hidden_dim -> proj_dim
    uint64_t seed = 0;

    bool operator==(const EncoderParams&) const = default;
};

// Same tensor layout as the trainable parameters; used for gradients and
// for optimizer momentum.
struct ParamTensors {
    std::vector<DenseLayer> layers;
    Mat head_w1;
    Mat head_w2;
};

// Values cached by the forward pass; backward() replays them, so a trace is
// only valid against the exact parameters that produced it.
struct ForwardTrace {
    Vec input;
    std::vector<Vec> layer_pre; // z_l per encoder layer
    std::vector<Vec> layer_act; // activation after each layer (last one is h)
    Vec head_pre;               // w1 h
    Vec head_act;               // relu(w1 h)
    Vec pre_norm;               // w2 relu(w1 h)
    double pre_norm_len = 0.0;
    Vec projected;              // unit-norm v
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero. The rng
// overload draws from an existing stream; the seed overload owns its stream
// and records the seed in the result.
EncoderParams init_encoder(const EncoderDims& dims, Rng& rng);
EncoderParams init_encoder(const EncoderDims& dims, uint64_t seed);

ParamTensors zeros_like(const EncoderParams& params);

// h = f(x). Linear layers with ReLU between hidden layers; the output layer
// is linear. Rejects wrong-dimension and non-finite input.
Vec encode(const EncoderParams& params, const Vec& x, ForwardTrace* trace = nullptr);

// v = normalize(w2 relu(w1 h)), always unit norm. Throws DegenerateInputError
// when the head output collapses to zero.
Vec project(const EncoderParams& params, const Vec& h, ForwardTrace* trace = nullptr);

// Reverse-mode gradients of the full encode -> project -> normalize chain,
// including the normalization Jacobian (I/|u| - u u^T/|u|^3). grad_v is the
// loss gradient at the unit-norm output. Parameter gradients accumulate into
// grads; the return value is the gradient wrt the input vector.
Vec backward(const EncoderParams& params, const ForwardTrace& trace, const Vec& grad_v,
             ParamTensors& grads);

// Versioned binary container: magic, format version, dims, seed, then all
// matrices row-major as 64-bit little-endian reals. Round-trips bit-exactly.
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);

} // namespace anomet
