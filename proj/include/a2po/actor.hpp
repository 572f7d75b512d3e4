#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "a2po/critic.hpp"
#include "a2po/cvae.hpp"

namespace a2po {

// The actor emits a latent code bounded to +-kLatentBound (tanh output
// scaled), which the frozen CVAE decoder turns into an action.
constexpr double kLatentBound = 2.0;

struct ActorSpec {
    MlpSpec pi;  // (s || xi) -> latent mean, tanh-bounded
    int latent_dim = 2;
};

inline ActorSpec make_actor_spec(const CvaeSpec& cvae, int hidden, int depth) {
    ActorSpec a;
    a.latent_dim = cvae.latent_dim;
    a.pi.input_dim = cvae.cond_dim();
    a.pi.hidden_dims.assign(depth, hidden);
    a.pi.output_dim = cvae.latent_dim;
    a.pi.hidden_activation = Activation::relu;
    a.pi.output_activation = Activation::tanh_fn;
    return a;
}

// Deterministic latent policy: z = kLatentBound * tanh-MLP(s || xi).
inline std::vector<double> actor_latent(const ActorSpec& spec, const ParamSet& params,
                                        std::span<const double> s, double xi, Tape& tape) {
    const std::vector<double> c = make_condition(s, xi);
    std::vector<double> z = mlp_forward(spec.pi, params, c, tape);
    for (double& v : z) v *= kLatentBound;
    return z;
}

// Full policy: decode the actor's latent through the frozen decoder.
inline std::vector<double> act(const ActorSpec& actor_spec, const ParamSet& actor_params,
                               const CvaeSpec& cvae_spec, const ParamSet& dec_params,
                               std::span<const double> s, double xi) {
    Tape tape;
    const std::vector<double> z = actor_latent(actor_spec, actor_params, s, xi, tape);
    return decode(cvae_spec, dec_params, z, make_condition(s, xi));
}

// lambda = alpha_q / mean(|q|), with an epsilon floor on the denominator.
inline double lambda_coef(std::span<const double> q_values, double alpha_q) {
    if (q_values.empty()) throw std::invalid_argument("lambda_coef: empty batch");
    if (alpha_q < 0.0) throw std::invalid_argument("lambda_coef: alpha_q must be >= 0");
    double mean_abs = 0.0;
    for (double q : q_values) mean_abs += std::abs(q);
    mean_abs /= static_cast<double>(q_values.size());
    return alpha_q / std::max(mean_abs, 1e-8);
}

struct ActorLossResult {
    double loss = 0.0;
    double q_term = 0.0;   // -lambda * mean Q1(s, a*)
    double bc_term = 0.0;  // mean squared distance to the dataset action
    double lambda = 0.0;
    std::vector<double> actor_grads;
};

namespace detail {

// Backprop from an upstream gradient on the emitted action all the way into
// the actor parameter gradients. Decoder and critic parameters stay frozen;
// only their input-gradient paths are used.
struct ActorChain {
    Tape actor_tape, dec_tape, q_tape;
    GradBundle dec_g, actor_g;
    std::vector<double> dec_in, u, da, du, dz;
};

inline void chain_action_grad_to_actor(const ActorSpec& actor_spec,
                                       const ParamSet& actor_params,
                                       const CvaeSpec& cvae_spec, const ParamSet& dec_params,
                                       ActorChain& ws, std::span<const double> da,
                                       std::vector<double>& actor_grads) {
    // squash -> decoder input grad -> latent scale -> actor MLP
    squash_backward(cvae_spec, ws.u, da, ws.du);
    mlp_backward(cvae_spec.decoder, dec_params, ws.dec_tape, ws.du, ws.dec_g);
    ws.dz.assign(ws.dec_g.input_grad.begin(), ws.dec_g.input_grad.begin() + cvae_spec.latent_dim);
    for (double& v : ws.dz) v *= kLatentBound;
    mlp_backward(actor_spec.pi, actor_params, ws.actor_tape, ws.dz, ws.actor_g);
    for (std::size_t i = 0; i < actor_grads.size(); ++i)
        actor_grads[i] += ws.actor_g.param_grads[i];
}

// Forward through actor + decoder at (s, xi), leaving tapes in the workspace
// for the matching backward call.
inline std::vector<double> actor_decode_forward(const ActorSpec& actor_spec,
                                                const ParamSet& actor_params,
                                                const CvaeSpec& cvae_spec,
                                                const ParamSet& dec_params, ActorChain& ws,
                                                std::span<const double> s, double xi) {
    std::vector<double> c(s.begin(), s.end());
    c.push_back(xi);
    std::vector<double> z = mlp_forward(actor_spec.pi, actor_params, c, ws.actor_tape);
    for (double& v : z) v *= kLatentBound;
    ws.dec_in.assign(z.begin(), z.end());
    ws.dec_in.insert(ws.dec_in.end(), c.begin(), c.end());
    mlp_forward(cvae_spec.decoder, dec_params, ws.dec_in, ws.u, ws.dec_tape);
    std::vector<double> a;
    squash_to_box(cvae_spec, ws.u, a);
    return a;
}

}  // namespace detail

// Actor objective: -lambda * mean_k Q1(s_k, a*_k) + mean_k |a_k - a_xi,k|^2.
// a* is generated at xi* = 1; the BC term decodes at each sample's own xi.
// lambda is computed from this batch's Q values and treated as a constant.
// Gradients cover the actor parameters only.
inline ActorLossResult actor_loss(const ActorSpec& actor_spec, const ParamSet& actor_params,
                                  const CvaeSpec& cvae_spec, const ParamSet& dec_params,
                                  const CriticBundle& critic, const TransitionBatch& batch,
                                  std::span<const double> xi, double alpha_q,
                                  bool include_bc) {
    const std::size_t n = batch.size();
    if (n == 0) throw std::invalid_argument("actor_loss: empty batch");
    if (xi.size() != n) throw std::invalid_argument("actor_loss: xi length != batch");

    ActorLossResult res;
    res.actor_grads.assign(actor_params.weights.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);

    detail::ActorChain ws;
    std::vector<double> sa, q_values(n);
    GradBundle qg;

    // Pass 1: Q values of the optimal-condition actions, for lambda.
    if (alpha_q > 0.0) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::vector<double> a_star = detail::actor_decode_forward(
                actor_spec, actor_params, cvae_spec, dec_params, ws, batch.s[k], 1.0);
            sa.assign(batch.s[k].begin(), batch.s[k].end());
            sa.insert(sa.end(), a_star.begin(), a_star.end());
            q_values[k] = detail::scalar_forward(critic.q_spec, critic.q1, sa, ws.q_tape);
        }
        res.lambda = lambda_coef(q_values, alpha_q);
    }

    // Pass 2: loss terms and gradients.
    for (std::size_t k = 0; k < n; ++k) {
        if (res.lambda != 0.0) {
            // Q term at xi* = 1.
            const std::vector<double> a_star = detail::actor_decode_forward(
                actor_spec, actor_params, cvae_spec, dec_params, ws, batch.s[k], 1.0);
            sa.assign(batch.s[k].begin(), batch.s[k].end());
            sa.insert(sa.end(), a_star.begin(), a_star.end());
            const double q = detail::scalar_forward(critic.q_spec, critic.q1, sa, ws.q_tape);
            res.q_term += -res.lambda * q * inv_n;

            const double up = -res.lambda * inv_n;
            mlp_backward(critic.q_spec, critic.q1, ws.q_tape, std::span<const double>(&up, 1),
                         qg);
            ws.da.assign(qg.input_grad.begin() + batch.s[k].size(), qg.input_grad.end());
            detail::chain_action_grad_to_actor(actor_spec, actor_params, cvae_spec, dec_params,
                                               ws, ws.da, res.actor_grads);
        }

        if (include_bc) {
            const std::vector<double> a_xi = detail::actor_decode_forward(
                actor_spec, actor_params, cvae_spec, dec_params, ws, batch.s[k], xi[k]);
            double dist = 0.0;
            ws.da.resize(a_xi.size());
            for (std::size_t d = 0; d < a_xi.size(); ++d) {
                const double diff = a_xi[d] - batch.a[k][d];
                dist += diff * diff;
                ws.da[d] = 2.0 * diff * inv_n;
            }
            res.bc_term += dist * inv_n;
            detail::chain_action_grad_to_actor(actor_spec, actor_params, cvae_spec, dec_params,
                                               ws, ws.da, res.actor_grads);
        }
    }
    res.loss = res.q_term + res.bc_term;
    return res;
}

}  // namespace a2po
