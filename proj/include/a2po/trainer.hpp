#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "a2po/actor.hpp"
#include "a2po/critic.hpp"
#include "a2po/cvae.hpp"
#include "a2po/dataset.hpp"
#include "a2po/eval.hpp"

namespace a2po {

enum class VariantKind {
    a2po,
    a2po_fixed_xi,
    a2po_discrete_xi,
    a2po_no_bc,
    cvae_policy_only,
    bc,
    td3_bc,
};

struct Variant {
    VariantKind kind = VariantKind::a2po;
    double epsilon = 0.1;  // only read by a2po_discrete_xi
};

inline std::string to_string(VariantKind k) {
    switch (k) {
        case VariantKind::a2po: return "a2po";
        case VariantKind::a2po_fixed_xi: return "a2po_fixed_xi";
        case VariantKind::a2po_discrete_xi: return "a2po_discrete_xi";
        case VariantKind::a2po_no_bc: return "a2po_no_bc";
        case VariantKind::cvae_policy_only: return "cvae_policy_only";
        case VariantKind::bc: return "bc";
        case VariantKind::td3_bc: return "td3_bc";
    }
    return "a2po";
}

inline VariantKind variant_from_string(const std::string& s) {
    if (s == "a2po") return VariantKind::a2po;
    if (s == "a2po_fixed_xi") return VariantKind::a2po_fixed_xi;
    if (s == "a2po_discrete_xi") return VariantKind::a2po_discrete_xi;
    if (s == "a2po_no_bc") return VariantKind::a2po_no_bc;
    if (s == "cvae_policy_only") return VariantKind::cvae_policy_only;
    if (s == "bc") return VariantKind::bc;
    if (s == "td3_bc") return VariantKind::td3_bc;
    throw std::invalid_argument("unknown variant: " + s);
}

// Which subsystems a variant trains.
inline bool variant_uses_cvae(VariantKind k) {
    return k != VariantKind::bc && k != VariantKind::td3_bc;
}
inline bool variant_uses_critic(VariantKind k) { return k != VariantKind::bc; }
inline bool variant_uses_actor(VariantKind k) { return k != VariantKind::cvae_policy_only; }
inline bool variant_latent_actor(VariantKind k) {
    return variant_uses_actor(k) && variant_uses_cvae(k);
}

struct TrainConfig {
    std::int64_t total_steps = 20000;
    std::int64_t cvae_steps = 5000;
    int batch_size = 256;
    double gamma = -1.0;  // negative: use the environment default
    double tau = 0.005;
    double lr = 3e-4;
    double alpha_kl = 0.5;
    double alpha_q = 1.0;
    AdvantageMode advantage_mode = AdvantageMode::continuous();
    bool include_bc = true;
    std::uint64_t seed = 1;
    std::int64_t eval_every = 1000;
    int eval_episodes = 10;
    int hidden = 64;
    int depth = 2;
    int latent_dim = 0;  // 0: 2 * act_dim
    double policy_noise = 0.2;  // TD3 target smoothing, in normalized action units
    double noise_clip = 0.5;
    int anchor_episodes = 10000;

    void validate() const {
        if (total_steps < 1) throw std::invalid_argument("config: total_steps must be >= 1");
        if (cvae_steps < 0 || cvae_steps > total_steps)
            throw std::invalid_argument("config: need 0 <= cvae_steps <= total_steps");
        if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
        if (!(tau > 0.0 && tau <= 1.0))
            throw std::invalid_argument("config: tau must be in (0, 1]");
        if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
        if (alpha_kl < 0.0) throw std::invalid_argument("config: alpha_kl must be >= 0");
        if (!(alpha_q > 0.0)) throw std::invalid_argument("config: alpha_q must be > 0");
        if (eval_every < 0) throw std::invalid_argument("config: eval_every must be >= 0");
        if (eval_episodes < 1) throw std::invalid_argument("config: eval_episodes must be >= 1");
        if (hidden < 1 || depth < 1) throw std::invalid_argument("config: bad network size");
        if (gamma > 1.0) throw std::invalid_argument("config: gamma must be <= 1");
    }

    double resolved_gamma(const EnvSpec& env) const { return gamma < 0.0 ? env.gamma : gamma; }
};

// Everything the learned policy consists of. All networks exist for every
// variant so checkpoints share one layout; a variant simply leaves the
// subsystems it does not train at their initialization.
struct Agent {
    EnvSpec env;
    VariantKind variant = VariantKind::a2po;
    CvaeSpec cvae;
    ActorSpec actor_spec;  // latent actor; bc/td3_bc use an action-space head instead
    CriticBundle critic;
    ParamSet enc, dec, actor;

    std::vector<double> latent(std::span<const double> s, double xi) const {
        if (!variant_latent_actor(variant))
            throw std::invalid_argument("latent: variant has no latent actor");
        Tape tape;
        return actor_latent(actor_spec, actor, s, xi, tape);
    }

    std::vector<double> act(std::span<const double> s, double xi) const {
        switch (variant) {
            case VariantKind::cvae_policy_only: {
                const std::vector<double> z(cvae.latent_dim, 0.0);
                return decode(cvae, dec, z, make_condition(s, xi));
            }
            case VariantKind::bc:
            case VariantKind::td3_bc: {
                Tape tape;
                const std::vector<double> out = mlp_forward(actor_spec.pi, actor, s, tape);
                std::vector<double> a(out.size());
                for (std::size_t i = 0; i < out.size(); ++i) {
                    const double mid = 0.5 * (env.action_low[i] + env.action_high[i]);
                    const double half = 0.5 * (env.action_high[i] - env.action_low[i]);
                    a[i] = mid + half * out[i];
                }
                return a;
            }
            default:
                return a2po::act(actor_spec, actor, cvae, dec, s, xi);
        }
    }
};

inline PolicyFn agent_policy(const Agent& agent) {
    return [&agent](std::span<const double> s, double xi, Rng&) { return agent.act(s, xi); };
}

inline Agent make_agent(const EnvSpec& env, const TrainConfig& cfg, VariantKind variant,
                        Rng& init_rng) {
    Agent a;
    a.env = env;
    a.variant = variant;
    a.cvae = make_cvae_spec(env, cfg.hidden, cfg.depth, cfg.latent_dim);
    if (variant_latent_actor(variant) || variant == VariantKind::cvae_policy_only) {
        a.actor_spec = make_actor_spec(a.cvae, cfg.hidden, cfg.depth);
    } else {
        // Action-space actor for the bc / td3_bc reference variants.
        a.actor_spec.latent_dim = a.cvae.latent_dim;
        a.actor_spec.pi.input_dim = env.obs_dim;
        a.actor_spec.pi.hidden_dims.assign(cfg.depth, cfg.hidden);
        a.actor_spec.pi.output_dim = env.act_dim;
        a.actor_spec.pi.hidden_activation = Activation::relu;
        a.actor_spec.pi.output_activation = Activation::tanh_fn;
    }
    // Fixed init order so seeds mean the same thing across variants.
    a.enc = init_params(a.cvae.encoder, init_rng);
    a.dec = init_params(a.cvae.decoder, init_rng);
    a.actor = init_params(a.actor_spec.pi, init_rng);
    a.critic = make_critic(env, cfg.hidden, cfg.depth, init_rng);
    return a;
}

struct StepMetrics {
    std::int64_t step = 0;
    double cvae_loss = 0.0;
    double q_loss = 0.0;
    double v_loss = 0.0;
    double actor_loss = 0.0;
    double xi_mean = 0.0;
};

// Raised when any loss turns non-finite; carries the step and loss name.
class TrainAbort : public std::runtime_error {
public:
    TrainAbort(std::int64_t step, const std::string& loss_name)
        : std::runtime_error("non-finite " + loss_name + " at step " + std::to_string(step)),
          step_(step),
          loss_name_(loss_name) {}
    std::int64_t step() const { return step_; }
    const std::string& loss_name() const { return loss_name_; }

private:
    std::int64_t step_;
    std::string loss_name_;
};

struct TrainState {
    TrainConfig cfg;
    Agent agent;
    Rng train_rng;
    std::int64_t step = 0;  // completed steps
};

namespace detail {

inline void check_finite(double loss, std::int64_t step, const char* name) {
    if (!std::isfinite(loss)) throw TrainAbort(step, name);
}

// a* at the next state for TD bootstrapping, with TD3-style clipped
// Gaussian smoothing noise in normalized action units.
inline std::vector<std::vector<double>> next_actions(const TrainState& st,
                                                     const TransitionBatch& batch, Rng& rng) {
    const Agent& ag = st.agent;
    const std::size_t n = batch.size();
    std::vector<std::vector<double>> a_star(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> a = ag.act(batch.s_next[k], 1.0);
        for (std::size_t d = 0; d < a.size(); ++d) {
            const double half = 0.5 * (ag.env.action_high[d] - ag.env.action_low[d]);
            double noise = st.cfg.policy_noise * rng.gaussian();
            noise = std::clamp(noise, -st.cfg.noise_clip, st.cfg.noise_clip);
            a[d] = std::clamp(a[d] + noise * half, ag.env.action_low[d],
                              ag.env.action_high[d]);
        }
        a_star[k] = std::move(a);
    }
    return a_star;
}

// Supervised / TD3+BC losses for the action-space reference actors.
struct ActionActorLoss {
    double loss = 0.0;
    std::vector<double> grads;
};

inline ActionActorLoss action_actor_loss(const TrainState& st, const TransitionBatch& batch,
                                         bool with_q_term) {
    const Agent& ag = st.agent;
    const std::size_t n = batch.size();
    ActionActorLoss res;
    res.grads.assign(ag.actor.weights.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);

    Tape tape, q_tape;
    GradBundle g, qg;
    std::vector<double> out, a, da, dt, sa;

    double lambda = 0.0;
    if (with_q_term) {
        std::vector<double> q_values(n);
        for (std::size_t k = 0; k < n; ++k) {
            mlp_forward(ag.actor_spec.pi, ag.actor, batch.s[k], out, tape);
            sa.assign(batch.s[k].begin(), batch.s[k].end());
            for (std::size_t d = 0; d < out.size(); ++d) {
                const double mid = 0.5 * (ag.env.action_low[d] + ag.env.action_high[d]);
                const double half = 0.5 * (ag.env.action_high[d] - ag.env.action_low[d]);
                sa.push_back(mid + half * out[d]);
            }
            q_values[k] = scalar_forward(ag.critic.q_spec, ag.critic.q1, sa, q_tape);
        }
        lambda = lambda_coef(q_values, st.cfg.alpha_q);
    }

    for (std::size_t k = 0; k < n; ++k) {
        mlp_forward(ag.actor_spec.pi, ag.actor, batch.s[k], out, tape);
        a.resize(out.size());
        dt.assign(out.size(), 0.0);
        for (std::size_t d = 0; d < out.size(); ++d) {
            const double mid = 0.5 * (ag.env.action_low[d] + ag.env.action_high[d]);
            const double half = 0.5 * (ag.env.action_high[d] - ag.env.action_low[d]);
            a[d] = mid + half * out[d];
        }
        if (with_q_term) {
            sa.assign(batch.s[k].begin(), batch.s[k].end());
            sa.insert(sa.end(), a.begin(), a.end());
            const double q = scalar_forward(ag.critic.q_spec, ag.critic.q1, sa, q_tape);
            res.loss += -lambda * q * inv_n;
            const double up = -lambda * inv_n;
            mlp_backward(ag.critic.q_spec, ag.critic.q1, q_tape,
                         std::span<const double>(&up, 1), qg);
            for (std::size_t d = 0; d < out.size(); ++d) {
                const double half = 0.5 * (ag.env.action_high[d] - ag.env.action_low[d]);
                dt[d] += qg.input_grad[batch.s[k].size() + d] * half;
            }
        }
        double dist = 0.0;
        for (std::size_t d = 0; d < out.size(); ++d) {
            const double half = 0.5 * (ag.env.action_high[d] - ag.env.action_low[d]);
            const double diff = a[d] - batch.a[k][d];
            dist += diff * diff;
            dt[d] += 2.0 * diff * inv_n * half;
        }
        res.loss += dist * inv_n;
        mlp_backward(ag.actor_spec.pi, ag.actor, tape, dt, g);
        for (std::size_t i = 0; i < res.grads.size(); ++i) res.grads[i] += g.param_grads[i];
    }
    return res;
}

}  // namespace detail

// One full Algorithm-1 iteration: sample batch -> compute xi -> CVAE step
// (while i <= K) -> critic step -> actor step -> soft target update.
inline StepMetrics train_step(TrainState& st, const OfflineDataset& dataset) {
    const std::int64_t i = st.step + 1;
    const TrainConfig& cfg = st.cfg;
    Agent& ag = st.agent;
    const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
    const double gamma = cfg.resolved_gamma(ag.env);

    StepMetrics m;
    m.step = i;

    const auto idx = sample_batch_indices(dataset, static_cast<std::size_t>(cfg.batch_size),
                                          st.train_rng);
    const TransitionBatch batch = TransitionBatch::gather(dataset, idx);
    const std::size_t n = batch.size();

    // Advantage conditions for this batch, from the online critics.
    std::vector<double> xi(n, 0.0);
    if (variant_uses_cvae(ag.variant)) {
        for (std::size_t k = 0; k < n; ++k)
            xi[k] = advantage_condition(ag.critic, batch.s[k], batch.a[k],
                                        cfg.advantage_mode);
        for (double x : xi) m.xi_mean += x / static_cast<double>(n);
    }

    // Behavior policy disentangling.
    if (variant_uses_cvae(ag.variant) && i <= cfg.cvae_steps) {
        const CvaeLossResult r =
            cvae_loss(ag.cvae, ag.enc, ag.dec, batch.s, batch.a, xi, cfg.alpha_kl,
                      st.train_rng);
        detail::check_finite(r.loss, i, "cvae_loss");
        m.cvae_loss = r.loss;
        adam_step(ag.enc, r.enc_grads, adam);
        adam_step(ag.dec, r.dec_grads, adam);
    }

    // Policy evaluation.
    if (variant_uses_critic(ag.variant)) {
        const auto a_star = detail::next_actions(st, batch, st.train_rng);
        const std::vector<double> targets = td_targets(ag.critic, batch, a_star, gamma);
        const QLossResult qr = q_td_loss_with_targets(ag.critic, batch, targets);
        detail::check_finite(qr.loss, i, "q_loss");
        m.q_loss = qr.loss;
        VLossResult vr;
        if (ag.variant != VariantKind::td3_bc) {
            vr = v_td_loss_with_targets(ag.critic, batch, targets);
            detail::check_finite(vr.loss, i, "v_loss");
            m.v_loss = vr.loss;
        }
        adam_step(ag.critic.q1, qr.q1_grads, adam);
        adam_step(ag.critic.q2, qr.q2_grads, adam);
        if (ag.variant != VariantKind::td3_bc) adam_step(ag.critic.v, vr.v_grads, adam);
    }

    // Policy improvement.
    if (variant_uses_actor(ag.variant)) {
        if (variant_latent_actor(ag.variant)) {
            const bool include_bc = cfg.include_bc && ag.variant != VariantKind::a2po_no_bc;
            const ActorLossResult ar =
                actor_loss(ag.actor_spec, ag.actor, ag.cvae, ag.dec, ag.critic, batch, xi,
                           cfg.alpha_q, include_bc);
            detail::check_finite(ar.loss, i, "actor_loss");
            m.actor_loss = ar.loss;
            adam_step(ag.actor, ar.actor_grads, adam);
        } else {
            const detail::ActionActorLoss ar = detail::action_actor_loss(
                st, batch, /*with_q_term=*/ag.variant == VariantKind::td3_bc);
            detail::check_finite(ar.loss, i, "actor_loss");
            m.actor_loss = ar.loss;
            adam_step(ag.actor, ar.grads, adam);
        }
    }

    if (variant_uses_critic(ag.variant)) {
        soft_update(ag.critic.q1_target, ag.critic.q1, cfg.tau);
        soft_update(ag.critic.q2_target, ag.critic.q2, cfg.tau);
    }

    st.step = i;
    return m;
}

// Metrics lines are hand-formatted so reruns produce byte-identical files.
inline std::string metrics_line(const StepMetrics& m) {
    std::string s = "{\"step\":" + std::to_string(m.step);
    s += ",\"cvae_loss\":" + detail::csv_double(m.cvae_loss);
    s += ",\"q_loss\":" + detail::csv_double(m.q_loss);
    s += ",\"v_loss\":" + detail::csv_double(m.v_loss);
    s += ",\"actor_loss\":" + detail::csv_double(m.actor_loss);
    s += ",\"xi_mean\":" + detail::csv_double(m.xi_mean);
    s += "}";
    return s;
}

inline std::string eval_line(std::int64_t step, const EvalReport& rep) {
    std::string s = "{\"step\":" + std::to_string(step);
    s += ",\"eval_xi\":" + detail::csv_double(rep.xi_used);
    s += ",\"eval_return\":" + detail::csv_double(rep.mean_return);
    s += ",\"eval_score\":" + detail::csv_double(rep.normalized_score);
    s += ",\"episodes\":" + std::to_string(rep.episodes);
    s += "}";
    return s;
}

using MetricsSink = std::function<void(std::string_view)>;

inline TrainState make_train_state(const EnvSpec& env, TrainConfig cfg, Variant variant) {
    // Variant semantics override the config knobs they own.
    switch (variant.kind) {
        case VariantKind::a2po_fixed_xi:
            cfg.advantage_mode = AdvantageMode::fixed_one();
            break;
        case VariantKind::a2po_discrete_xi:
            cfg.advantage_mode = AdvantageMode::discrete(variant.epsilon);
            break;
        case VariantKind::a2po_no_bc:
            cfg.include_bc = false;
            break;
        default:
            break;
    }
    cfg.validate();
    TrainState st;
    st.cfg = cfg;
    Rng init_rng = Rng(cfg.seed).split("init");
    st.agent = make_agent(env, cfg, variant.kind, init_rng);
    st.train_rng = Rng(cfg.seed).split("train");
    st.step = 0;
    return st;
}

// Continues a (possibly restored) state to total_steps, streaming metrics.
inline void run_loop(TrainState& st, const OfflineDataset& dataset,
                     const MetricsSink& sink) {
    if (dataset.spec.name != st.agent.env.name)
        throw std::invalid_argument("run: dataset env " + to_string(dataset.spec.name) +
                                    " does not match config env " +
                                    to_string(st.agent.env.name));
    // Anchors are a pure function of the seed, so a resumed run recomputes
    // the same values.
    ScoreAnchors anchors{0.0, 1.0};
    if (st.cfg.eval_every > 0) {
        Rng anchor_rng = Rng(st.cfg.seed).split("anchors");
        anchors = reference_returns(st.agent.env, st.cfg.anchor_episodes, anchor_rng);
    }
    const PolicyFn policy = agent_policy(st.agent);
    while (st.step < st.cfg.total_steps) {
        const StepMetrics m = train_step(st, dataset);
        if (sink) sink(metrics_line(m));
        if (st.cfg.eval_every > 0 && m.step % st.cfg.eval_every == 0) {
            Rng eval_rng = Rng(st.cfg.seed).split("eval", static_cast<std::uint64_t>(m.step));
            const EvalReport rep = evaluate(policy, st.agent.env, 1.0, st.cfg.eval_episodes,
                                            eval_rng, anchors);
            if (sink) sink(eval_line(m.step, rep));
        }
    }
}

inline TrainState run(const EnvSpec& env, const TrainConfig& cfg, const OfflineDataset& dataset,
                      Variant variant, const MetricsSink& sink = nullptr) {
    TrainState st = make_train_state(env, cfg, variant);
    run_loop(st, dataset, sink);
    return st;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "A2PO", u32 version, then length-prefixed
// sections (config | env+variant | rng+step | parameters), little-endian
// throughout, doubles as raw IEEE-754 bit patterns.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_i64(std::string& out, std::int64_t v) {
    put_u64(out, static_cast<std::uint64_t>(v));
}
inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}
inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

class ByteReader {
public:
    ByteReader(const std::string& data, const std::string& path, std::size_t start = 0)
        : data_(data), path_(path), pos_(start) {}

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i]))
                 << (8 * i);
        pos_ += 8;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i]))
                 << (8 * i);
        pos_ += 4;
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t k) const {
        if (pos_ + k > data_.size())
            throw std::runtime_error("checkpoint " + path_ + " truncated");
    }
    const std::string& data_;
    std::string path_;
    std::size_t pos_ = 0;
};

inline void put_param_set(std::string& out, const ParamSet& p) {
    put_u64(out, p.weights.size());
    for (double w : p.weights) put_f64(out, w);
    for (double m : p.adam_m) put_f64(out, m);
    for (double v : p.adam_v) put_f64(out, v);
    put_i64(out, p.step_count);
}

inline ParamSet read_param_set(ByteReader& r, std::size_t expected_len) {
    const std::uint64_t n = r.u64();
    if (n != expected_len)
        throw std::runtime_error("checkpoint parameter block has length " + std::to_string(n) +
                                 ", expected " + std::to_string(expected_len));
    ParamSet p;
    p.weights.resize(n);
    p.adam_m.resize(n);
    p.adam_v.resize(n);
    for (auto& w : p.weights) w = r.f64();
    for (auto& m : p.adam_m) m = r.f64();
    for (auto& v : p.adam_v) v = r.f64();
    p.step_count = r.i64();
    return p;
}

}  // namespace detail

constexpr std::uint32_t kCheckpointVersion = 1;

inline void checkpoint_write(const TrainState& st, const std::string& path) {
    std::string out;
    out += "A2PO";
    detail::put_u32(out, kCheckpointVersion);

    std::string body;
    // config
    detail::put_i64(body, st.cfg.total_steps);
    detail::put_i64(body, st.cfg.cvae_steps);
    detail::put_u32(body, static_cast<std::uint32_t>(st.cfg.batch_size));
    detail::put_f64(body, st.cfg.gamma);
    detail::put_f64(body, st.cfg.tau);
    detail::put_f64(body, st.cfg.lr);
    detail::put_f64(body, st.cfg.alpha_kl);
    detail::put_f64(body, st.cfg.alpha_q);
    detail::put_u8(body, static_cast<std::uint8_t>(st.cfg.advantage_mode.kind));
    detail::put_f64(body, st.cfg.advantage_mode.epsilon);
    detail::put_u8(body, st.cfg.include_bc ? 1 : 0);
    detail::put_u64(body, st.cfg.seed);
    detail::put_i64(body, st.cfg.eval_every);
    detail::put_u32(body, static_cast<std::uint32_t>(st.cfg.eval_episodes));
    detail::put_u32(body, static_cast<std::uint32_t>(st.cfg.hidden));
    detail::put_u32(body, static_cast<std::uint32_t>(st.cfg.depth));
    detail::put_u32(body, static_cast<std::uint32_t>(st.cfg.latent_dim));
    detail::put_f64(body, st.cfg.policy_noise);
    detail::put_f64(body, st.cfg.noise_clip);
    detail::put_u32(body, static_cast<std::uint32_t>(st.cfg.anchor_episodes));
    // env + variant
    detail::put_u8(body, st.agent.env.name == EnvName::one_step_jump ? 0 : 1);
    detail::put_u8(body, static_cast<std::uint8_t>(st.agent.variant));
    // progress
    detail::put_i64(body, st.step);
    for (std::uint64_t w : st.train_rng.state()) detail::put_u64(body, w);
    // parameters, fixed order
    detail::put_param_set(body, st.agent.enc);
    detail::put_param_set(body, st.agent.dec);
    detail::put_param_set(body, st.agent.actor);
    detail::put_param_set(body, st.agent.critic.q1);
    detail::put_param_set(body, st.agent.critic.q2);
    detail::put_param_set(body, st.agent.critic.v);
    detail::put_param_set(body, st.agent.critic.q1_target);
    detail::put_param_set(body, st.agent.critic.q2_target);

    detail::put_u64(out, body.size());
    out += body;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint_write: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint_write: write failed for " + path);
}

inline TrainState checkpoint_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint_read: cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (data.size() < 16 || data.compare(0, 4, "A2PO") != 0)
        throw std::runtime_error("checkpoint_read: " + path + " is not an A2PO checkpoint");
    detail::ByteReader r(data, path, 4);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint_read: " + path + " has format_version " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
    const std::uint64_t body_len = r.u64();
    if (body_len + 16 != data.size())
        throw std::runtime_error("checkpoint_read: " + path + " truncated");

    TrainConfig cfg;
    cfg.total_steps = r.i64();
    cfg.cvae_steps = r.i64();
    cfg.batch_size = static_cast<int>(r.u32());
    cfg.gamma = r.f64();
    cfg.tau = r.f64();
    cfg.lr = r.f64();
    cfg.alpha_kl = r.f64();
    cfg.alpha_q = r.f64();
    cfg.advantage_mode.kind = static_cast<AdvantageMode::Kind>(r.u8());
    cfg.advantage_mode.epsilon = r.f64();
    cfg.include_bc = r.u8() != 0;
    cfg.seed = r.u64();
    cfg.eval_every = r.i64();
    cfg.eval_episodes = static_cast<int>(r.u32());
    cfg.hidden = static_cast<int>(r.u32());
    cfg.depth = static_cast<int>(r.u32());
    cfg.latent_dim = static_cast<int>(r.u32());
    cfg.policy_noise = r.f64();
    cfg.noise_clip = r.f64();
    cfg.anchor_episodes = static_cast<int>(r.u32());

    const EnvSpec env = make_env(r.u8() == 0 ? EnvName::one_step_jump : EnvName::point_mass);
    const auto variant = static_cast<VariantKind>(r.u8());

    TrainState st;
    st.cfg = cfg;
    // Rebuild the network shapes, then overwrite every parameter block.
    Rng dummy(0);
    st.agent = make_agent(env, cfg, variant, dummy);
    st.step = r.i64();
    std::array<std::uint64_t, 4> rng_state{};
    for (auto& w : rng_state) w = r.u64();
    st.train_rng.set_state(rng_state);

    st.agent.enc = detail::read_param_set(r, st.agent.cvae.encoder.param_count());
    st.agent.dec = detail::read_param_set(r, st.agent.cvae.decoder.param_count());
    st.agent.actor = detail::read_param_set(r, st.agent.actor_spec.pi.param_count());
    st.agent.critic.q1 = detail::read_param_set(r, st.agent.critic.q_spec.param_count());
    st.agent.critic.q2 = detail::read_param_set(r, st.agent.critic.q_spec.param_count());
    st.agent.critic.v = detail::read_param_set(r, st.agent.critic.v_spec.param_count());
    st.agent.critic.q1_target = detail::read_param_set(r, st.agent.critic.q_spec.param_count());
    st.agent.critic.q2_target = detail::read_param_set(r, st.agent.critic.q_spec.param_count());
    if (!r.done())
        throw std::runtime_error("checkpoint_read: " + path + " has trailing bytes");
    return st;
}

}  // namespace a2po
