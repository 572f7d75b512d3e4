#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "a2po/rng.hpp"

namespace a2po {

enum class EnvName { one_step_jump, point_mass };

enum class BehaviorTier { random, medium, expert };

inline std::string to_string(EnvName n) {
    return n == EnvName::one_step_jump ? "one_step_jump" : "point_mass";
}

inline EnvName env_from_string(const std::string& s) {
    if (s == "one_step_jump") return EnvName::one_step_jump;
    if (s == "point_mass") return EnvName::point_mass;
    throw std::invalid_argument("unknown env: " + s);
}

inline std::string to_string(BehaviorTier t) {
    switch (t) {
        case BehaviorTier::random: return "random";
        case BehaviorTier::medium: return "medium";
        case BehaviorTier::expert: return "expert";
    }
    return "random";
}

inline BehaviorTier tier_from_string(const std::string& s) {
    if (s == "random") return BehaviorTier::random;
    if (s == "medium") return BehaviorTier::medium;
    if (s == "expert") return BehaviorTier::expert;
    throw std::invalid_argument("unknown tier: " + s);
}

struct EnvSpec {
    EnvName name = EnvName::one_step_jump;
    int obs_dim = 1;
    int act_dim = 1;
    std::vector<double> action_low;
    std::vector<double> action_high;
    int horizon = 1;
    double gamma = 1.0;
};

// Reward layout of the one-step jump task: two goal intervals of unequal
// reward separated from the origin by obstacle bands.
//   r = 10            if |a - 7| <= 0.5
//   r = 5             if |a + 6| <= 0.5
//   r = -1            if a in [2, 5] or [-4, -2]
//   r = -0.1 * |a|    otherwise
inline EnvSpec make_one_step_jump() {
    EnvSpec s;
    s.name = EnvName::one_step_jump;
    s.obs_dim = 1;
    s.act_dim = 1;
    s.action_low = {-10.0};
    s.action_high = {10.0};
    s.horizon = 1;
    s.gamma = 1.0;
    return s;
}

// 2-D point mass: position += 0.25 * action, reward = -||position - goal||,
// goal fixed at (2, 2), start uniform in [-1, 1]^2, horizon 20.
inline EnvSpec make_point_mass() {
    EnvSpec s;
    s.name = EnvName::point_mass;
    s.obs_dim = 4;  // position (2) + goal delta (2)
    s.act_dim = 2;
    s.action_low = {-1.0, -1.0};
    s.action_high = {1.0, 1.0};
    s.horizon = 20;
    s.gamma = 0.99;
    return s;
}

inline EnvSpec make_env(EnvName name) {
    return name == EnvName::one_step_jump ? make_one_step_jump() : make_point_mass();
}

struct EnvState {
    std::vector<double> observation;
    int step_index = 0;
    bool terminated = false;
};

namespace detail {

constexpr double kPointMassGoalX = 2.0;
constexpr double kPointMassGoalY = 2.0;
constexpr double kPointMassStep = 0.25;
constexpr double kExpertGain = 2.0;

inline std::vector<double> point_mass_obs(double x, double y) {
    return {x, y, kPointMassGoalX - x, kPointMassGoalY - y};
}

inline double one_step_jump_reward(double a) {
    if (std::abs(a - 7.0) <= 0.5) return 10.0;
    if (std::abs(a + 6.0) <= 0.5) return 5.0;
    if ((a >= 2.0 && a <= 5.0) || (a >= -4.0 && a <= -2.0)) return -1.0;
    return -0.1 * std::abs(a);
}

}  // namespace detail

inline EnvState reset(const EnvSpec& spec, Rng& rng) {
    EnvState st;
    st.step_index = 0;
    st.terminated = false;
    if (spec.name == EnvName::one_step_jump) {
        st.observation = {0.0};
    } else {
        const double x = rng.uniform(-1.0, 1.0);
        const double y = rng.uniform(-1.0, 1.0);
        st.observation = detail::point_mass_obs(x, y);
    }
    return st;
}

struct StepResult {
    EnvState next;
    double reward = 0.0;
};

// Out-of-bounds actions are clamped, never rejected.
inline StepResult step(const EnvSpec& spec, const EnvState& state,
                       std::vector<double> action) {
    if (state.terminated)
        throw std::invalid_argument("step: episode already terminated");
    if (static_cast<int>(action.size()) != spec.act_dim)
        throw std::invalid_argument("step: action length != act_dim");
    for (int i = 0; i < spec.act_dim; ++i)
        action[i] = std::clamp(action[i], spec.action_low[i], spec.action_high[i]);

    StepResult out;
    if (spec.name == EnvName::one_step_jump) {
        out.reward = detail::one_step_jump_reward(action[0]);
        out.next.observation = {action[0]};
        out.next.step_index = 1;
        out.next.terminated = true;
    } else {
        const double x = state.observation[0] + detail::kPointMassStep * action[0];
        const double y = state.observation[1] + detail::kPointMassStep * action[1];
        out.reward = -std::hypot(x - detail::kPointMassGoalX, y - detail::kPointMassGoalY);
        out.next.observation = detail::point_mass_obs(x, y);
        out.next.step_index = state.step_index + 1;
        out.next.terminated = out.next.step_index >= spec.horizon;
    }
    return out;
}

// Scripted data-collection controllers of graded quality.
//   random: uniform over the action box.
//   expert: proportional controller toward the best goal, small noise.
//   medium: the expert controller with large noise and a 30% chance of a
//           uniformly random action.
inline std::vector<double> scripted_action(const EnvSpec& spec, BehaviorTier tier,
                                           const EnvState& state, Rng& rng) {
    if (state.terminated)
        throw std::invalid_argument("scripted_action: state is terminated");

    std::vector<double> a(spec.act_dim);
    if (tier == BehaviorTier::random) {
        for (int i = 0; i < spec.act_dim; ++i)
            a[i] = rng.uniform(spec.action_low[i], spec.action_high[i]);
        return a;
    }

    if (spec.name == EnvName::one_step_jump) {
        if (tier == BehaviorTier::expert) {
            a[0] = 7.0 + 0.15 * rng.gaussian();
        } else {
            // medium: mixture of jumps at both goals, wide noise, 30% random.
            if (rng.uniform() < 0.3) {
                a[0] = rng.uniform(spec.action_low[0], spec.action_high[0]);
            } else {
                const double center = rng.uniform() < 0.5 ? 7.0 : -6.0;
                a[0] = center + 1.5 * rng.gaussian();
            }
        }
    } else {
        const double sigma = tier == BehaviorTier::expert ? 0.05 : 0.4;
        const bool random_act = tier == BehaviorTier::medium && rng.uniform() < 0.3;
        if (random_act) {
            for (int i = 0; i < spec.act_dim; ++i)
                a[i] = rng.uniform(spec.action_low[i], spec.action_high[i]);
        } else {
            for (int i = 0; i < spec.act_dim; ++i) {
                const double delta = state.observation[2 + i];  // goal - position
                const double ctrl = std::clamp(detail::kExpertGain * delta,
                                               spec.action_low[i], spec.action_high[i]);
                a[i] = ctrl + sigma * rng.gaussian();
            }
        }
    }
    for (int i = 0; i < spec.act_dim; ++i)
        a[i] = std::clamp(a[i], spec.action_low[i], spec.action_high[i]);
    return a;
}

// D4RL-style score: random reference maps to 0, expert reference to 100.
inline double normalized_score(double raw, double random_ref, double expert_ref) {
    if (!(expert_ref > random_ref))
        throw std::invalid_argument("normalized_score: expert_ref must exceed random_ref");
    return 100.0 * (raw - random_ref) / (expert_ref - random_ref);
}

}  // namespace a2po
