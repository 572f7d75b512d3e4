#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "a2po/env.hpp"
#include "a2po/mlp.hpp"
#include "a2po/rng.hpp"

namespace a2po {

constexpr double kLogStdMin = -4.0;
constexpr double kLogStdMax = 4.0;

// Advantage-conditioned VAE over actions. The encoder consumes (a || c) and
// emits a diagonal Gaussian over the latent; the decoder consumes (z || c)
// and emits a pre-squash action that is tanh-scaled into the action box.
// c = s || xi with xi in [-1, 1].
struct CvaeSpec {
    int obs_dim = 1;
    int act_dim = 1;
    int latent_dim = 2;
    std::vector<double> action_low;
    std::vector<double> action_high;
    MlpSpec encoder;
    MlpSpec decoder;

    int cond_dim() const { return obs_dim + 1; }
};

inline CvaeSpec make_cvae_spec(const EnvSpec& env, int hidden, int depth,
                               int latent_dim = 0) {
    CvaeSpec s;
    s.obs_dim = env.obs_dim;
    s.act_dim = env.act_dim;
    s.latent_dim = latent_dim > 0 ? latent_dim : 2 * env.act_dim;
    s.action_low = env.action_low;
    s.action_high = env.action_high;
    s.encoder.input_dim = env.act_dim + s.cond_dim();
    s.encoder.hidden_dims.assign(depth, hidden);
    s.encoder.output_dim = 2 * s.latent_dim;  // mean, raw log_std
    s.encoder.hidden_activation = Activation::relu;
    s.encoder.output_activation = Activation::identity;
    s.decoder.input_dim = s.latent_dim + s.cond_dim();
    s.decoder.hidden_dims.assign(depth, hidden);
    s.decoder.output_dim = env.act_dim;
    s.decoder.hidden_activation = Activation::relu;
    s.decoder.output_activation = Activation::identity;
    return s;
}

struct GaussianHead {
    std::vector<double> mean;
    std::vector<double> log_std;
};

inline std::vector<double> make_condition(std::span<const double> s, double xi) {
    if (!(xi >= -1.0 && xi <= 1.0))
        throw std::invalid_argument("make_condition: xi outside [-1, 1]");
    std::vector<double> c(s.begin(), s.end());
    c.push_back(xi);
    return c;
}

inline GaussianHead encode(const CvaeSpec& spec, const ParamSet& enc_params,
                           std::span<const double> a, std::span<const double> c) {
    if (static_cast<int>(a.size()) != spec.act_dim)
        throw std::invalid_argument("encode: action length != act_dim");
    if (static_cast<int>(c.size()) != spec.cond_dim())
        throw std::invalid_argument("encode: condition length != obs_dim + 1");
    std::vector<double> in(a.begin(), a.end());
    in.insert(in.end(), c.begin(), c.end());
    Tape tape;
    const std::vector<double> out = mlp_forward(spec.encoder, enc_params, in, tape);
    GaussianHead head;
    head.mean.assign(out.begin(), out.begin() + spec.latent_dim);
    head.log_std.resize(spec.latent_dim);
    for (int i = 0; i < spec.latent_dim; ++i)
        head.log_std[i] = std::clamp(out[spec.latent_dim + i], kLogStdMin, kLogStdMax);
    return head;
}

inline std::vector<double> reparameterize(const GaussianHead& head,
                                          std::span<const double> noise) {
    if (noise.size() != head.mean.size())
        throw std::invalid_argument("reparameterize: noise length != latent_dim");
    std::vector<double> z(head.mean.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = head.mean[i] + std::exp(head.log_std[i]) * noise[i];
    return z;
}

namespace detail {

// a = mid + half * tanh(u), elementwise into the action box.
inline void squash_to_box(const CvaeSpec& spec, std::span<const double> u,
                          std::vector<double>& a) {
    a.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double mid = 0.5 * (spec.action_low[i] + spec.action_high[i]);
        const double half = 0.5 * (spec.action_high[i] - spec.action_low[i]);
        a[i] = mid + half * std::tanh(u[i]);
    }
}

// dL/du from dL/da through the squash.
inline void squash_backward(const CvaeSpec& spec, std::span<const double> u,
                            std::span<const double> da, std::vector<double>& du) {
    du.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double half = 0.5 * (spec.action_high[i] - spec.action_low[i]);
        const double t = std::tanh(u[i]);
        du[i] = da[i] * half * (1.0 - t * t);
    }
}

}  // namespace detail

// Deterministic decoder mean, squashed so generated actions always lie in
// the action box.
inline std::vector<double> decode(const CvaeSpec& spec, const ParamSet& dec_params,
                                  std::span<const double> z, std::span<const double> c) {
    if (static_cast<int>(z.size()) != spec.latent_dim)
        throw std::invalid_argument("decode: latent length != latent_dim");
    if (static_cast<int>(c.size()) != spec.cond_dim())
        throw std::invalid_argument("decode: condition length != obs_dim + 1");
    std::vector<double> in(z.begin(), z.end());
    in.insert(in.end(), c.begin(), c.end());
    Tape tape;
    const std::vector<double> u = mlp_forward(spec.decoder, dec_params, in, tape);
    std::vector<double> a;
    detail::squash_to_box(spec, u, a);
    return a;
}

// KL( N(mean, diag(exp(log_std)^2)) || N(0, I) ), closed form.
inline double kl_to_standard_normal(const GaussianHead& head) {
    double kl = 0.0;
    for (std::size_t i = 0; i < head.mean.size(); ++i) {
        const double m = head.mean[i];
        const double ls = head.log_std[i];
        kl += 0.5 * (m * m + std::exp(2.0 * ls) - 1.0 - 2.0 * ls);
    }
    return kl;
}

struct CvaeLossResult {
    double loss = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
    std::vector<double> enc_grads;
    std::vector<double> dec_grads;
};

// ELBO loss over a minibatch with externally supplied reparameterization
// noise (one latent_dim block per sample): mean over samples of
//   sum_d (decode(z, c)_d - a_d)^2 + alpha_kl * KL(q(z|a,c) || N(0, I)),
// with gradients flowing through z into the encoder.
inline CvaeLossResult cvae_loss_with_noise(const CvaeSpec& spec, const ParamSet& enc_params,
                                           const ParamSet& dec_params,
                                           std::span<const std::vector<double>> states,
                                           std::span<const std::vector<double>> actions,
                                           std::span<const double> xi, double alpha_kl,
                                           std::span<const double> noise) {
    const std::size_t n = states.size();
    if (n == 0) throw std::invalid_argument("cvae_loss: empty batch");
    if (actions.size() != n || xi.size() != n)
        throw std::invalid_argument("cvae_loss: batch arrays disagree in length");
    if (noise.size() != n * static_cast<std::size_t>(spec.latent_dim))
        throw std::invalid_argument("cvae_loss: noise length != n * latent_dim");

    CvaeLossResult res;
    res.enc_grads.assign(enc_params.weights.size(), 0.0);
    res.dec_grads.assign(dec_params.weights.size(), 0.0);

    const int ld = spec.latent_dim;
    Tape enc_tape, dec_tape;
    GradBundle enc_g, dec_g;
    std::vector<double> enc_in, enc_out, dec_in, u, a_hat, da, du;
    std::vector<double> enc_upstream(2 * ld);
    const double inv_n = 1.0 / static_cast<double>(n);

    for (std::size_t k = 0; k < n; ++k) {
        if (!(xi[k] >= -1.0 && xi[k] <= 1.0))
            throw std::invalid_argument("cvae_loss: xi outside [-1, 1]");
        // encoder forward on (a || s || xi)
        enc_in.assign(actions[k].begin(), actions[k].end());
        enc_in.insert(enc_in.end(), states[k].begin(), states[k].end());
        enc_in.push_back(xi[k]);
        mlp_forward(spec.encoder, enc_params, enc_in, enc_out, enc_tape);

        const double* nz = noise.data() + k * ld;
        double kl = 0.0;
        dec_in.resize(ld + spec.cond_dim());
        std::vector<double> sigma(ld);
        std::vector<bool> clamped(ld);
        for (int i = 0; i < ld; ++i) {
            const double mean = enc_out[i];
            const double raw = enc_out[ld + i];
            const double ls = std::clamp(raw, kLogStdMin, kLogStdMax);
            clamped[i] = raw != ls;
            sigma[i] = std::exp(ls);
            dec_in[i] = mean + sigma[i] * nz[i];
            kl += 0.5 * (mean * mean + sigma[i] * sigma[i] - 1.0 - 2.0 * ls);
        }
        std::copy(states[k].begin(), states[k].end(), dec_in.begin() + ld);
        dec_in[ld + spec.obs_dim] = xi[k];

        // decoder forward + squash
        mlp_forward(spec.decoder, dec_params, dec_in, u, dec_tape);
        double recon = 0.0;
        da.resize(spec.act_dim);
        detail::squash_to_box(spec, u, a_hat);
        for (int d = 0; d < spec.act_dim; ++d) {
            const double diff = a_hat[d] - actions[k][d];
            recon += diff * diff;
            da[d] = 2.0 * diff * inv_n;
        }
        res.reconstruction += recon * inv_n;
        res.kl += kl * inv_n;

        // backward: squash -> decoder -> (z grads) -> encoder head -> encoder
        detail::squash_backward(spec, u, da, du);
        mlp_backward(spec.decoder, dec_params, dec_tape, du, dec_g);
        for (std::size_t i = 0; i < res.dec_grads.size(); ++i)
            res.dec_grads[i] += dec_g.param_grads[i];

        for (int i = 0; i < ld; ++i) {
            const double dz = dec_g.input_grad[i];
            const double mean = enc_out[i];
            double dmean = dz + alpha_kl * mean * inv_n;
            double dls = 0.0;
            if (!clamped[i]) {
                dls = dz * sigma[i] * nz[i] +
                      alpha_kl * (sigma[i] * sigma[i] - 1.0) * inv_n;
            }
            enc_upstream[i] = dmean;
            enc_upstream[ld + i] = dls;
        }
        mlp_backward(spec.encoder, enc_params, enc_tape, enc_upstream, enc_g);
        for (std::size_t i = 0; i < res.enc_grads.size(); ++i)
            res.enc_grads[i] += enc_g.param_grads[i];
    }
    res.loss = res.reconstruction + alpha_kl * res.kl;
    return res;
}

inline CvaeLossResult cvae_loss(const CvaeSpec& spec, const ParamSet& enc_params,
                                const ParamSet& dec_params,
                                std::span<const std::vector<double>> states,
                                std::span<const std::vector<double>> actions,
                                std::span<const double> xi, double alpha_kl, Rng& rng) {
    std::vector<double> noise(states.size() * spec.latent_dim);
    for (double& v : noise) v = rng.gaussian();
    return cvae_loss_with_noise(spec, enc_params, dec_params, states, actions, xi, alpha_kl,
                                noise);
}

}  // namespace a2po
