#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "a2po/dataset.hpp"
#include "a2po/mlp.hpp"

namespace a2po {

// Twin Q-networks with soft targets plus a V-network (no V target: the
// V loss bootstraps from the Q targets only).
struct CriticBundle {
    MlpSpec q_spec;  // (s || a) -> scalar
    MlpSpec v_spec;  // s -> scalar
    ParamSet q1, q2, v;
    ParamSet q1_target, q2_target;
};

inline CriticBundle make_critic(const EnvSpec& env, int hidden, int depth, Rng& rng) {
    CriticBundle b;
    b.q_spec.input_dim = env.obs_dim + env.act_dim;
    b.q_spec.hidden_dims.assign(depth, hidden);
    b.q_spec.output_dim = 1;
    b.v_spec.input_dim = env.obs_dim;
    b.v_spec.hidden_dims.assign(depth, hidden);
    b.v_spec.output_dim = 1;
    b.q1 = init_params(b.q_spec, rng);
    b.q2 = init_params(b.q_spec, rng);
    b.v = init_params(b.v_spec, rng);
    b.q1_target = b.q1;
    b.q2_target = b.q2;
    return b;
}

struct AdvantageMode {
    enum class Kind { continuous, discrete, fixed_one };
    Kind kind = Kind::continuous;
    double epsilon = 0.0;  // discrete threshold, in [0, 1)

    static AdvantageMode continuous() { return {Kind::continuous, 0.0}; }
    static AdvantageMode discrete(double eps) {
        if (!(eps >= 0.0 && eps < 1.0))
            throw std::invalid_argument("AdvantageMode: epsilon must be in [0, 1)");
        return {Kind::discrete, eps};
    }
    static AdvantageMode fixed_one() { return {Kind::fixed_one, 0.0}; }
};

namespace detail {

inline double scalar_forward(const MlpSpec& spec, const ParamSet& p,
                             std::span<const double> in, Tape& tape) {
    std::vector<double> y;
    mlp_forward(spec, p, in, y, tape);
    return y[0];
}

}  // namespace detail

// xi = tanh(min_i Q_i(s, a) - V(s)) using the online critics, mapped to a
// discrete level or pinned to 1 depending on the mode.
inline double advantage_condition(const CriticBundle& bundle, std::span<const double> s,
                                  std::span<const double> a, const AdvantageMode& mode) {
    if (mode.kind == AdvantageMode::Kind::fixed_one) return 1.0;
    Tape tape;
    std::vector<double> sa(s.begin(), s.end());
    sa.insert(sa.end(), a.begin(), a.end());
    const double q1 = detail::scalar_forward(bundle.q_spec, bundle.q1, sa, tape);
    const double q2 = detail::scalar_forward(bundle.q_spec, bundle.q2, sa, tape);
    const double v = detail::scalar_forward(bundle.v_spec, bundle.v, s, tape);
    const double xi = std::tanh(std::min(q1, q2) - v);
    if (mode.kind == AdvantageMode::Kind::continuous) return xi;
    // discrete: sgn(xi) * 1{|xi| > epsilon}
    if (std::abs(xi) <= mode.epsilon) return 0.0;
    return xi > 0.0 ? 1.0 : -1.0;
}

// One bootstrapped TD target per sample: r + gamma * min_j Qhat_j(s', a*),
// with the bootstrap masked on terminal transitions.
inline std::vector<double> td_targets(const CriticBundle& bundle, const TransitionBatch& batch,
                                      std::span<const std::vector<double>> a_star,
                                      double gamma) {
    const std::size_t n = batch.size();
    if (a_star.size() != n) throw std::invalid_argument("td_targets: a_star length != batch");
    std::vector<double> y(n);
    Tape tape;
    std::vector<double> sa;
    for (std::size_t k = 0; k < n; ++k) {
        double boot = 0.0;
        if (!batch.done[k]) {
            sa.assign(batch.s_next[k].begin(), batch.s_next[k].end());
            sa.insert(sa.end(), a_star[k].begin(), a_star[k].end());
            const double t1 = detail::scalar_forward(bundle.q_spec, bundle.q1_target, sa, tape);
            const double t2 = detail::scalar_forward(bundle.q_spec, bundle.q2_target, sa, tape);
            boot = gamma * std::min(t1, t2);
        }
        y[k] = batch.r[k] + boot;
    }
    return y;
}

struct QLossResult {
    double loss = 0.0;
    std::vector<double> q1_grads;
    std::vector<double> q2_grads;
};

// Mean over the batch and over both Q-networks of the squared TD residual
// against precomputed targets.
inline QLossResult q_td_loss_with_targets(const CriticBundle& bundle,
                                          const TransitionBatch& batch,
                                          std::span<const double> targets) {
    const std::size_t n = batch.size();
    if (n == 0) throw std::invalid_argument("q_td_loss: empty batch");
    if (targets.size() != n) throw std::invalid_argument("q_td_loss: targets length != batch");

    QLossResult res;
    res.q1_grads.assign(bundle.q1.weights.size(), 0.0);
    res.q2_grads.assign(bundle.q2.weights.size(), 0.0);
    const double inv = 1.0 / (2.0 * static_cast<double>(n));

    Tape tape;
    GradBundle g;
    std::vector<double> sa;
    for (std::size_t k = 0; k < n; ++k) {
        sa.assign(batch.s[k].begin(), batch.s[k].end());
        sa.insert(sa.end(), batch.a[k].begin(), batch.a[k].end());
        for (int which = 0; which < 2; ++which) {
            const ParamSet& p = which == 0 ? bundle.q1 : bundle.q2;
            std::vector<double>& grads = which == 0 ? res.q1_grads : res.q2_grads;
            const double q = detail::scalar_forward(bundle.q_spec, p, sa, tape);
            const double resid = q - targets[k];
            res.loss += resid * resid * inv;
            const double up = 2.0 * resid * inv;
            mlp_backward(bundle.q_spec, p, tape, std::span<const double>(&up, 1), g);
            for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += g.param_grads[i];
        }
    }
    return res;
}

inline QLossResult q_td_loss(const CriticBundle& bundle, const TransitionBatch& batch,
                             std::span<const std::vector<double>> a_star, double gamma) {
    return q_td_loss_with_targets(bundle, batch, td_targets(bundle, batch, a_star, gamma));
}

struct VLossResult {
    double loss = 0.0;
    std::vector<double> v_grads;
};

// One-step Bellman residual for the V-network against the same Q-target
// bootstrap as the Q loss.
inline VLossResult v_td_loss_with_targets(const CriticBundle& bundle,
                                          const TransitionBatch& batch,
                                          std::span<const double> targets) {
    const std::size_t n = batch.size();
    if (n == 0) throw std::invalid_argument("v_td_loss: empty batch");
    if (targets.size() != n) throw std::invalid_argument("v_td_loss: targets length != batch");

    VLossResult res;
    res.v_grads.assign(bundle.v.weights.size(), 0.0);
    const double inv = 1.0 / static_cast<double>(n);
    Tape tape;
    GradBundle g;
    for (std::size_t k = 0; k < n; ++k) {
        const double v = detail::scalar_forward(bundle.v_spec, bundle.v, batch.s[k], tape);
        const double resid = v - targets[k];
        res.loss += resid * resid * inv;
        const double up = 2.0 * resid * inv;
        mlp_backward(bundle.v_spec, bundle.v, tape, std::span<const double>(&up, 1), g);
        for (std::size_t i = 0; i < res.v_grads.size(); ++i) res.v_grads[i] += g.param_grads[i];
    }
    return res;
}

inline VLossResult v_td_loss(const CriticBundle& bundle, const TransitionBatch& batch,
                             std::span<const std::vector<double>> a_star, double gamma) {
    return v_td_loss_with_targets(bundle, batch, td_targets(bundle, batch, a_star, gamma));
}

}  // namespace a2po
