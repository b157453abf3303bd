#include "anomet/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "anomet/errors.hpp"

namespace anomet {

namespace {

Mat xavier_uniform(size_t rows, size_t cols, Rng& rng) {
    Mat m(rows, cols);
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& w : m.data) w = rng.uniform(-bound, bound);
    return m;
}

void check_dims(const EncoderDims& dims) {
    if (dims.input_dim == 0) throw ValidationError("encoder input_dim must be positive");
    if (dims.embed_dim == 0) throw ValidationError("encoder embed_dim must be positive");
    if (dims.head_hidden_dim == 0) throw ValidationError("encoder head_hidden_dim must be positive");
    if (dims.proj_dim == 0) throw ValidationError("encoder proj_dim must be positive");
    for (size_t h : dims.hidden_dims) {
        if (h == 0) throw ValidationError("encoder hidden widths must be positive");
    }
}

Vec relu(const Vec& z) {
    Vec a(z.size());
    for (size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
    return a;
}

} // namespace

EncoderParams init_encoder(const EncoderDims& dims, Rng& rng) {
    check_dims(dims);
    EncoderParams params;
    params.dims = dims;

    size_t fan_in = dims.input_dim;
    for (size_t width : dims.hidden_dims) {
        DenseLayer layer;
        layer.w = xavier_uniform(width, fan_in, rng);
        layer.b.assign(width, 0.0);
        params.layers.push_back(std::move(layer));
        fan_in = width;
    }
    DenseLayer out;
    out.w = xavier_uniform(dims.embed_dim, fan_in, rng);
    out.b.assign(dims.embed_dim, 0.0);
    params.layers.push_back(std::move(out));

    params.head_w1 = xavier_uniform(dims.head_hidden_dim, dims.embed_dim, rng);
    params.head_w2 = xavier_uniform(dims.proj_dim, dims.head_hidden_dim, rng);
    return params;
}

EncoderParams init_encoder(const EncoderDims& dims, uint64_t seed) {
    Rng rng(seed);
    EncoderParams params = init_encoder(dims, rng);
    params.seed = seed;
    return params;
}

ParamTensors zeros_like(const EncoderParams& params) {
    ParamTensors t;
    t.layers.reserve(params.layers.size());
    for (const DenseLayer& layer : params.layers) {
        DenseLayer z;
        z.w = Mat(layer.w.rows, layer.w.cols);
        z.b.assign(layer.b.size(), 0.0);
        t.layers.push_back(std::move(z));
    }
    t.head_w1 = Mat(params.head_w1.rows, params.head_w1.cols);
    t.head_w2 = Mat(params.head_w2.rows, params.head_w2.cols);
    return t;
}

Vec encode(const EncoderParams& params, const Vec& x, ForwardTrace* trace) {
    if (params.layers.empty()) throw std::invalid_argument("encode: encoder has no layers");
    if (x.size() != params.dims.input_dim) {
        throw std::invalid_argument("encode: input has dim " + std::to_string(x.size()) +
                                    ", encoder expects " + std::to_string(params.dims.input_dim));
    }
    if (!all_finite(x)) throw ValidationError("encode: input contains non-finite values");

    if (trace) {
        trace->input = x;
        trace->layer_pre.clear();
        trace->layer_act.clear();
    }

    Vec a = x;
    const size_t n_layers = params.layers.size();
    for (size_t l = 0; l < n_layers; ++l) {
        Vec z = matvec(params.layers[l].w, a);
        for (size_t i = 0; i < z.size(); ++i) z[i] += params.layers[l].b[i];
        // ReLU on hidden layers only; the embedding itself is linear.
        Vec act = (l + 1 < n_layers) ? relu(z) : z;
        if (trace) {
            trace->layer_pre.push_back(z);
            trace->layer_act.push_back(act);
        }
        a = std::move(act);
    }
    return a;
}

Vec project(const EncoderParams& params, const Vec& h, ForwardTrace* trace) {
    if (h.size() != params.dims.embed_dim) {
        throw std::invalid_argument("project: embedding has dim " + std::to_string(h.size()) +
                                    ", head expects " + std::to_string(params.dims.embed_dim));
    }
    Vec pre = matvec(params.head_w1, h);
    Vec act = relu(pre);
    Vec u = matvec(params.head_w2, act);

    const double len = l2_norm(u);
    if (len < 1e-12) {
        throw DegenerateInputError("project: head output is numerically zero (norm " +
                                   std::to_string(len) + "), cannot normalize");
    }
    Vec v(u.size());
    for (size_t i = 0; i < u.size(); ++i) v[i] = u[i] / len;

    if (trace) {
        trace->head_pre = std::move(pre);
        trace->head_act = std::move(act);
        trace->pre_norm = std::move(u);
        trace->pre_norm_len = len;
        trace->projected = v;
    }
    return v;
}

Vec backward(const EncoderParams& params, const ForwardTrace& trace, const Vec& grad_v,
             ParamTensors& grads) {
    const size_t n_layers = params.layers.size();
    if (trace.layer_act.size() != n_layers || trace.input.size() != params.dims.input_dim ||
        trace.projected.size() != params.dims.proj_dim || trace.pre_norm_len <= 0.0) {
        throw std::invalid_argument("backward: trace does not match encoder shape");
    }
    if (grad_v.size() != params.dims.proj_dim) {
        throw std::invalid_argument("backward: grad_v has dim " + std::to_string(grad_v.size()) +
                                    ", expected " + std::to_string(params.dims.proj_dim));
    }
    if (grads.layers.size() != n_layers) {
        throw std::invalid_argument("backward: gradient accumulator shape mismatch");
    }

    // Through v = u / |u|:  grad_u = (grad_v - v (v . grad_v)) / |u|.
    const double vg = dot(trace.projected, grad_v);
    Vec grad_u(grad_v.size());
    for (size_t i = 0; i < grad_u.size(); ++i) {
        grad_u[i] = (grad_v[i] - trace.projected[i] * vg) / trace.pre_norm_len;
    }

    // u = w2 a, a = relu(w1 h).
    add_outer(grads.head_w2, 1.0, grad_u, trace.head_act);
    Vec grad_act = matvec_t(params.head_w2, grad_u);
    for (size_t i = 0; i < grad_act.size(); ++i) {
        if (trace.head_pre[i] <= 0.0) grad_act[i] = 0.0;
    }
    add_outer(grads.head_w1, 1.0, grad_act, trace.layer_act.back());
    Vec grad = matvec_t(params.head_w1, grad_act);

    // Encoder stack, last layer linear, ReLU elsewhere.
    for (size_t l = n_layers; l-- > 0;) {
        if (l + 1 < n_layers) {
            for (size_t i = 0; i < grad.size(); ++i) {
                if (trace.layer_pre[l][i] <= 0.0) grad[i] = 0.0;
            }
        }
        const Vec& below = (l == 0) ? trace.input : trace.layer_act[l - 1];
        add_outer(grads.layers[l].w, 1.0, grad, below);
        add_scaled(grads.layers[l].b, 1.0, grad);
        grad = matvec_t(params.layers[l].w, grad);
    }
    return grad;
}

} // namespace anomet
