#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "a2po/env.hpp"
#include "a2po/rng.hpp"

namespace a2po {

// A policy under evaluation: maps (state, fixed advantage condition) to an
// action. The rng parameter is for stochastic policies (scripted tiers);
// trained agents ignore it.
using PolicyFn =
    std::function<std::vector<double>(std::span<const double>, double, Rng&)>;

struct ScoreAnchors {
    double random_ref = 0.0;
    double expert_ref = 1.0;
};

struct EvalReport {
    double mean_return = 0.0;
    double std_return = 0.0;
    double normalized_score = 0.0;
    int episodes = 0;
    double xi_used = 0.0;
};

inline PolicyFn scripted_policy(const EnvSpec& spec, BehaviorTier tier) {
    return [spec, tier](std::span<const double> s, double, Rng& rng) {
        EnvState st;
        st.observation.assign(s.begin(), s.end());
        return scripted_action(spec, tier, st, rng);
    };
}

inline double rollout_return(const PolicyFn& policy, const EnvSpec& spec, double xi,
                             Rng& rng) {
    EnvState st = reset(spec, rng);
    double total = 0.0;
    while (!st.terminated) {
        const std::vector<double> a = policy(st.observation, xi, rng);
        StepResult sr = step(spec, st, a);
        total += sr.reward;
        st = std::move(sr.next);
    }
    return total;
}

// Monte-Carlo normalization anchors from the scripted random/expert tiers.
inline ScoreAnchors reference_returns(const EnvSpec& spec, int episodes, Rng& rng) {
    ScoreAnchors a;
    const PolicyFn rnd = scripted_policy(spec, BehaviorTier::random);
    const PolicyFn exp = scripted_policy(spec, BehaviorTier::expert);
    double sum_r = 0.0, sum_e = 0.0;
    for (int i = 0; i < episodes; ++i) sum_r += rollout_return(rnd, spec, 0.0, rng);
    for (int i = 0; i < episodes; ++i) sum_e += rollout_return(exp, spec, 0.0, rng);
    a.random_ref = sum_r / episodes;
    a.expert_ref = sum_e / episodes;
    return a;
}

inline EvalReport evaluate(const PolicyFn& policy, const EnvSpec& spec, double xi_fixed,
                           int n_episodes, Rng& rng, const ScoreAnchors& anchors) {
    if (!(xi_fixed >= -1.0 && xi_fixed <= 1.0))
        throw std::invalid_argument("evaluate: xi outside [-1, 1]");
    if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
    std::vector<double> returns(n_episodes);
    for (int i = 0; i < n_episodes; ++i)
        returns[i] = rollout_return(policy, spec, xi_fixed, rng);
    EvalReport rep;
    rep.episodes = n_episodes;
    rep.xi_used = xi_fixed;
    for (double r : returns) rep.mean_return += r;
    rep.mean_return /= n_episodes;
    double var = 0.0;
    for (double r : returns) var += (r - rep.mean_return) * (r - rep.mean_return);
    rep.std_return = std::sqrt(var / n_episodes);
    rep.normalized_score =
        normalized_score(rep.mean_return, anchors.random_ref, anchors.expert_ref);
    return rep;
}

// One report per xi. Every xi is evaluated from the same rng state, so the
// environment stream is identical across conditions and xi is the only
// varying factor.
inline std::vector<EvalReport> xi_sweep(const PolicyFn& policy, const EnvSpec& spec,
                                        std::span<const double> xis, int n_episodes,
                                        const Rng& rng, const ScoreAnchors& anchors) {
    std::vector<EvalReport> reports;
    reports.reserve(xis.size());
    for (double xi : xis) {
        Rng local = rng;
        reports.push_back(evaluate(policy, spec, xi, n_episodes, local, anchors));
    }
    return reports;
}

struct SeedAggregate {
    double mean = 0.0;
    double std_dev = 0.0;
};

// Mean and population standard deviation over per-seed values.
inline SeedAggregate aggregate_values(std::span<const double> values) {
    if (values.size() < 2)
        throw std::invalid_argument("aggregate_seeds: need at least 2 seeds");
    SeedAggregate agg;
    for (double v : values) agg.mean += v;
    agg.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - agg.mean) * (v - agg.mean);
    agg.std_dev = std::sqrt(var / static_cast<double>(values.size()));
    return agg;
}

inline SeedAggregate aggregate_seeds(std::span<const EvalReport> reports) {
    std::vector<double> means;
    means.reserve(reports.size());
    for (const auto& r : reports) means.push_back(r.mean_return);
    return aggregate_values(means);
}

struct Pca2Result {
    std::vector<std::array<double, 2>> projected;
    std::vector<double> component1;
    std::vector<double> component2;
    bool second_degenerate = false;
};

namespace detail {

inline void fix_sign(std::vector<double>& v) {
    for (double x : v) {
        if (std::abs(x) > 1e-12) {
            if (x < 0.0)
                for (double& e : v) e = -e;
            return;
        }
    }
}

// Leading eigenvector of the symmetric matrix C by power iteration, with
// optional re-orthogonalization against a previously found component.
inline double power_iteration(const std::vector<std::vector<double>>& C,
                              std::vector<double>& v, const std::vector<double>* orth) {
    const std::size_t d = C.size();
    v.assign(d, 0.0);
    v[0] = 1.0;
    if (orth) {
        double dot = (*orth)[0];
        for (std::size_t i = 0; i < d; ++i) v[i] -= dot * (*orth)[i];
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm < 1e-24) {  // e1 was (numerically) parallel to the first component
            v.assign(d, 0.0);
            v[1] = 1.0;
            double dot2 = (*orth)[1];
            for (std::size_t i = 0; i < d; ++i) v[i] -= dot2 * (*orth)[i];
        }
        norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& x : v) x /= norm;
    }

    std::vector<double> w(d);
    double eigenvalue = 0.0;
    for (int iter = 0; iter < 1000; ++iter) {
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += C[i][j] * v[j];
            w[i] = s;
        }
        if (orth) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += w[i] * (*orth)[i];
            for (std::size_t i = 0; i < d; ++i) w[i] -= dot * (*orth)[i];
        }
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-300) {
            eigenvalue = 0.0;
            break;
        }
        double delta = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            w[i] /= norm;
            delta = std::max(delta, std::abs(w[i] - v[i]));
        }
        v = w;
        eigenvalue = norm;
        if (delta < 1e-10) break;
    }
    return eigenvalue;
}

}  // namespace detail

// Top-2 principal components via power iteration with deflation. Components
// are orthonormal; the sign convention makes each component's first nonzero
// entry positive. Collinear data flags the second component as degenerate.
inline Pca2Result pca2(const std::vector<std::vector<double>>& points) {
    if (points.size() < 3) throw std::invalid_argument("pca2: need at least 3 points");
    const std::size_t d = points[0].size();
    if (d < 2) throw std::invalid_argument("pca2: dimension must be >= 2");
    for (const auto& p : points)
        if (p.size() != d) throw std::invalid_argument("pca2: ragged point set");

    const std::size_t n = points.size();
    std::vector<double> mean(d, 0.0);
    for (const auto& p : points)
        for (std::size_t i = 0; i < d; ++i) mean[i] += p[i];
    for (double& m : mean) m /= static_cast<double>(n);

    std::vector<std::vector<double>> C(d, std::vector<double>(d, 0.0));
    std::vector<double> x(d);
    for (const auto& p : points) {
        for (std::size_t i = 0; i < d; ++i) x[i] = p[i] - mean[i];
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j <= i; ++j) C[i][j] += x[i] * x[j];
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            C[i][j] /= static_cast<double>(n);
            C[j][i] = C[i][j];
        }

    Pca2Result res;
    const double lambda1 = detail::power_iteration(C, res.component1, nullptr);
    if (lambda1 <= 0.0) {
        // No variance at all: every point equals the mean.
        res.component1.assign(d, 0.0);
        res.component1[0] = 1.0;
    }
    detail::fix_sign(res.component1);

    // Deflate and repeat for the second component.
    std::vector<std::vector<double>> C2 = C;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            C2[i][j] -= lambda1 * res.component1[i] * res.component1[j];
    const double lambda2 = detail::power_iteration(C2, res.component2, &res.component1);
    if (lambda2 <= std::max(1e-12 * lambda1, 1e-300)) {
        res.second_degenerate = true;
        res.component2.assign(d, 0.0);
    } else {
        detail::fix_sign(res.component2);
    }

    res.projected.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        double p1 = 0.0, p2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double c = points[k][i] - mean[i];
            p1 += c * res.component1[i];
            p2 += c * res.component2[i];
        }
        res.projected[k] = {p1, p2};
    }
    return res;
}

namespace detail {

inline std::string csv_double(double v) {
    char buf[40];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

}  // namespace detail

struct LatentDumpRow {
    double xi = 0.0;
    std::vector<double> latent;
    std::array<double, 2> projected{0.0, 0.0};
    double rollout_return = 0.0;
};

// Samples xi uniformly from [-1, 1], records the actor latent at the initial
// state, its PCA projection, and the return of one rollout under that fixed
// xi. The CSV columns are: xi, z_0..z_{k-1}, p_0, p_1, ret.
inline std::vector<LatentDumpRow> export_latent_dump(
    const std::function<std::vector<double>(std::span<const double>, double)>& latent_fn,
    const PolicyFn& policy, const EnvSpec& spec, int n_samples, Rng& rng,
    const std::string& path) {
    if (n_samples < 3) throw std::invalid_argument("export_latent_dump: need >= 3 samples");

    std::vector<LatentDumpRow> rows(n_samples);
    std::vector<std::vector<double>> latents(n_samples);
    for (int k = 0; k < n_samples; ++k) {
        const double xi = rng.uniform(-1.0, 1.0);
        Rng episode_rng = rng.split("latent-rollout", static_cast<std::uint64_t>(k));
        EnvState start = reset(spec, episode_rng);
        rows[k].xi = xi;
        rows[k].latent = latent_fn(start.observation, xi);
        latents[k] = rows[k].latent;
        // Roll the episode from the recorded start state.
        double total = 0.0;
        EnvState st = start;
        while (!st.terminated) {
            const std::vector<double> a = policy(st.observation, xi, episode_rng);
            StepResult sr = step(spec, st, a);
            total += sr.reward;
            st = std::move(sr.next);
        }
        rows[k].rollout_return = total;
    }

    const Pca2Result p = pca2(latents);
    for (int k = 0; k < n_samples; ++k) rows[k].projected = p.projected[k];

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_latent_dump: cannot open " + path);
    const std::size_t ld = rows[0].latent.size();
    out << "xi";
    for (std::size_t i = 0; i < ld; ++i) out << ",z_" << i;
    out << ",p_0,p_1,ret\n";
    for (const auto& row : rows) {
        out << detail::csv_double(row.xi);
        for (double z : row.latent) out << ',' << detail::csv_double(z);
        out << ',' << detail::csv_double(row.projected[0]);
        out << ',' << detail::csv_double(row.projected[1]);
        out << ',' << detail::csv_double(row.rollout_return) << '\n';
    }
    if (!out) throw std::runtime_error("export_latent_dump: write failed for " + path);
    return rows;
}

}  // namespace a2po
