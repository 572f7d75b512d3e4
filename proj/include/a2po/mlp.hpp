#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "a2po/rng.hpp"

namespace a2po {

enum class Activation { relu, tanh_fn, identity };

// Fixed-topology fully connected network description. Parameters live in a
// flat array ordered layer by layer: row-major weights [out][in], then biases.
struct MlpSpec {
    int input_dim = 1;
    std::vector<int> hidden_dims;
    int output_dim = 1;
    Activation hidden_activation = Activation::relu;
    Activation output_activation = Activation::identity;

    void validate() const {
        if (input_dim < 1 || output_dim < 1)
            throw std::invalid_argument("MlpSpec: dims must be >= 1");
        if (hidden_dims.empty())
            throw std::invalid_argument("MlpSpec: at least one hidden layer required");
        for (int h : hidden_dims)
            if (h < 1) throw std::invalid_argument("MlpSpec: hidden dims must be >= 1");
    }

    int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }

    int layer_in(int l) const { return l == 0 ? input_dim : hidden_dims[l - 1]; }

    int layer_out(int l) const {
        return l == num_layers() - 1 ? output_dim : hidden_dims[l];
    }

    // Offset of layer l's weight block in the flat parameter array.
    std::size_t layer_offset(int l) const {
        std::size_t off = 0;
        for (int k = 0; k < l; ++k)
            off += static_cast<std::size_t>(layer_out(k)) * (layer_in(k) + 1);
        return off;
    }

    std::size_t param_count() const { return layer_offset(num_layers()); }

    bool operator==(const MlpSpec&) const = default;
};

// Flat parameter block plus Adam optimizer state. Value type: copying a
// ParamSet snapshots the network.
struct ParamSet {
    std::vector<double> weights;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    std::int64_t step_count = 0;

    bool all_finite() const {
        for (double w : weights)
            if (!std::isfinite(w)) return false;
        return true;
    }
};

// Cached activations from a forward pass, enough to run the exact backward
// pass. acts[0] is the input; acts[l+1] the post-activation of layer l.
struct Tape {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> pre;
};

struct GradBundle {
    std::vector<double> param_grads;
    std::vector<double> input_grad;
};

namespace detail {

inline double apply_act(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh_fn: return std::tanh(x);
        case Activation::identity: return x;
    }
    return x;
}

inline double act_grad(Activation a, double pre) {
    switch (a) {
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::tanh_fn: {
            const double t = std::tanh(pre);
            return 1.0 - t * t;
        }
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

}  // namespace detail

inline ParamSet init_params(const MlpSpec& spec, Rng& rng) {
    spec.validate();
    ParamSet p;
    p.weights.resize(spec.param_count());
    p.adam_m.assign(p.weights.size(), 0.0);
    p.adam_v.assign(p.weights.size(), 0.0);
    // Fan-in scaled uniform weights, zero biases.
    for (int l = 0; l < spec.num_layers(); ++l) {
        const int in = spec.layer_in(l);
        const int out = spec.layer_out(l);
        const double bound = std::sqrt(1.0 / in);
        double* w = p.weights.data() + spec.layer_offset(l);
        for (int i = 0; i < out * in; ++i) w[i] = rng.uniform(-bound, bound);
        for (int i = 0; i < out; ++i) w[out * in + i] = 0.0;
    }
    return p;
}

// Forward pass writing into a reusable tape (hot path: no allocations after
// the first call with the same spec).
inline void mlp_forward(const MlpSpec& spec, const ParamSet& params,
                        std::span<const double> x, std::vector<double>& y, Tape& tape) {
    if (static_cast<int>(x.size()) != spec.input_dim)
        throw std::invalid_argument("mlp_forward: input length " + std::to_string(x.size()) +
                                    " != input_dim " + std::to_string(spec.input_dim));
    if (params.weights.size() != spec.param_count())
        throw std::invalid_argument("mlp_forward: params do not match spec");

    const int L = spec.num_layers();
    tape.acts.resize(L + 1);
    tape.pre.resize(L);
    tape.acts[0].assign(x.begin(), x.end());

    for (int l = 0; l < L; ++l) {
        const int in = spec.layer_in(l);
        const int out = spec.layer_out(l);
        const double* w = params.weights.data() + spec.layer_offset(l);
        const double* b = w + static_cast<std::size_t>(out) * in;
        const Activation act = (l == L - 1) ? spec.output_activation : spec.hidden_activation;

        const std::vector<double>& prev = tape.acts[l];
        std::vector<double>& pre = tape.pre[l];
        std::vector<double>& next = tape.acts[l + 1];
        pre.resize(out);
        next.resize(out);
        for (int o = 0; o < out; ++o) {
            double s = b[o];
            const double* row = w + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) s += row[i] * prev[i];
            pre[o] = s;
            next[o] = detail::apply_act(act, s);
        }
    }
    y = tape.acts[L];
}

inline std::vector<double> mlp_forward(const MlpSpec& spec, const ParamSet& params,
                                       std::span<const double> x, Tape& tape) {
    std::vector<double> y;
    mlp_forward(spec, params, x, y, tape);
    return y;
}

// Exact reverse-mode pass. `upstream` is dL/dy; grads are accumulated into
// `out` when accumulate = true (batch loops reuse one bundle).
inline void mlp_backward(const MlpSpec& spec, const ParamSet& params, const Tape& tape,
                         std::span<const double> upstream, GradBundle& out,
                         bool accumulate = false) {
    const int L = spec.num_layers();
    if (static_cast<int>(tape.acts.size()) != L + 1 ||
        static_cast<int>(tape.acts[0].size()) != spec.input_dim)
        throw std::invalid_argument("mlp_backward: tape does not match spec");
    if (static_cast<int>(upstream.size()) != spec.output_dim)
        throw std::invalid_argument("mlp_backward: upstream length != output_dim");
    if (params.weights.size() != spec.param_count())
        throw std::invalid_argument("mlp_backward: params do not match spec");

    if (!accumulate) {
        out.param_grads.assign(spec.param_count(), 0.0);
        out.input_grad.assign(spec.input_dim, 0.0);
    } else {
        out.param_grads.resize(spec.param_count(), 0.0);
        out.input_grad.resize(spec.input_dim, 0.0);
    }

    // delta starts as dL/d(post-activation) of the output layer.
    std::vector<double> delta(upstream.begin(), upstream.end());
    std::vector<double> delta_prev;
    for (int l = L - 1; l >= 0; --l) {
        const int in = spec.layer_in(l);
        const int out_dim = spec.layer_out(l);
        const Activation act = (l == L - 1) ? spec.output_activation : spec.hidden_activation;
        const double* w = params.weights.data() + spec.layer_offset(l);
        double* gw = out.param_grads.data() + spec.layer_offset(l);
        double* gb = gw + static_cast<std::size_t>(out_dim) * in;
        const std::vector<double>& prev = tape.acts[l];
        const std::vector<double>& pre = tape.pre[l];

        delta_prev.assign(in, 0.0);
        for (int o = 0; o < out_dim; ++o) {
            const double d = delta[o] * detail::act_grad(act, pre[o]);
            if (d == 0.0) continue;
            double* grow = gw + static_cast<std::size_t>(o) * in;
            const double* row = w + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) {
                grow[i] += d * prev[i];
                delta_prev[i] += d * row[i];
            }
            gb[o] += d;
        }
        if (l > 0) {
            delta.swap(delta_prev);
        } else {
            for (int i = 0; i < in; ++i) out.input_grad[i] += delta_prev[i];
        }
    }
}

inline GradBundle mlp_backward(const MlpSpec& spec, const ParamSet& params, const Tape& tape,
                               std::span<const double> upstream) {
    GradBundle g;
    mlp_backward(spec, params, tape, upstream, g);
    return g;
}

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction, in place.
inline void adam_step(ParamSet& params, std::span<const double> grads, const AdamConfig& cfg) {
    if (grads.size() != params.weights.size())
        throw std::invalid_argument("adam_step: grad length != param length");
    for (double g : grads)
        if (!std::isfinite(g)) throw std::invalid_argument("adam_step: non-finite gradient");

    params.step_count += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(params.step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(params.step_count));
    for (std::size_t i = 0; i < params.weights.size(); ++i) {
        const double g = grads[i];
        params.adam_m[i] = cfg.beta1 * params.adam_m[i] + (1.0 - cfg.beta1) * g;
        params.adam_v[i] = cfg.beta2 * params.adam_v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = params.adam_m[i] / bc1;
        const double vhat = params.adam_v[i] / bc2;
        params.weights[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

// Polyak averaging of the weights; the target's optimizer state is untouched.
inline void soft_update(ParamSet& target, const ParamSet& online, double tau) {
    if (target.weights.size() != online.weights.size())
        throw std::invalid_argument("soft_update: shape mismatch");
    if (!(tau > 0.0 && tau <= 1.0))
        throw std::invalid_argument("soft_update: tau must be in (0, 1]");
    for (std::size_t i = 0; i < target.weights.size(); ++i)
        target.weights[i] = (1.0 - tau) * target.weights[i] + tau * online.weights[i];
}

}  // namespace a2po
