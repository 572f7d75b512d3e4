#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "a2po/env.hpp"
#include "a2po/rng.hpp"

namespace a2po {

struct Transition {
    std::vector<double> s;
    std::vector<double> a;
    double r = 0.0;
    std::vector<double> s_next;
    bool done = false;
    BehaviorTier tier = BehaviorTier::random;

    bool operator==(const Transition&) const = default;
};

struct DatasetMeta {
    std::uint64_t seed = 0;
    std::map<std::string, std::int64_t> tier_counts;
};

struct OfflineDataset {
    EnvSpec spec;
    std::vector<Transition> transitions;
    DatasetMeta meta;

    std::size_t size() const { return transitions.size(); }
};

struct MixComponent {
    BehaviorTier tier = BehaviorTier::random;
    double proportion = 0.0;
};

struct MixRecipe {
    std::vector<MixComponent> components;
    std::int64_t total = 0;

    void validate() const {
        if (total < 1) throw std::invalid_argument("MixRecipe: total must be >= 1");
        if (components.empty()) throw std::invalid_argument("MixRecipe: no components");
        double sum = 0.0;
        for (const auto& c : components) {
            if (c.proportion < 0.0 || c.proportion > 1.0)
                throw std::invalid_argument("MixRecipe: proportion outside [0, 1]");
            sum += c.proportion;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("MixRecipe: proportions sum to " + std::to_string(sum) +
                                        ", expected 1");
    }
};

// Rolls out the scripted tier policy until exactly n transitions are stored;
// the final episode may be truncated.
inline OfflineDataset collect(const EnvSpec& spec, BehaviorTier tier,
                              std::int64_t n_transitions, Rng& rng) {
    if (n_transitions < 1) throw std::invalid_argument("collect: n_transitions must be >= 1");
    OfflineDataset d;
    d.spec = spec;
    d.transitions.reserve(static_cast<std::size_t>(n_transitions));
    EnvState state = reset(spec, rng);
    while (static_cast<std::int64_t>(d.transitions.size()) < n_transitions) {
        if (state.terminated) state = reset(spec, rng);
        Transition t;
        t.s = state.observation;
        t.a = scripted_action(spec, tier, state, rng);
        StepResult sr = step(spec, state, t.a);
        t.r = sr.reward;
        t.s_next = sr.next.observation;
        t.done = sr.next.terminated;
        t.tier = tier;
        d.transitions.push_back(std::move(t));
        state = sr.next;
    }
    d.meta.tier_counts[to_string(tier)] = n_transitions;
    return d;
}

// Draws each component's share without replacement from its source dataset,
// then shuffles the combined pool. Integer shares are floor(sigma * total)
// with the rounding remainder assigned to the first component.
inline OfflineDataset mix(const MixRecipe& recipe,
                          const std::map<std::string, OfflineDataset>& sources, Rng& rng) {
    recipe.validate();
    std::vector<std::int64_t> share(recipe.components.size());
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < recipe.components.size(); ++i) {
        share[i] = static_cast<std::int64_t>(std::floor(recipe.components[i].proportion *
                                                        static_cast<double>(recipe.total)));
        assigned += share[i];
    }
    share[0] += recipe.total - assigned;

    OfflineDataset out;
    bool have_spec = false;
    for (std::size_t i = 0; i < recipe.components.size(); ++i) {
        const std::string key = to_string(recipe.components[i].tier);
        auto it = sources.find(key);
        if (it == sources.end())
            throw std::invalid_argument("mix: missing source dataset for tier " + key);
        const OfflineDataset& src = it->second;
        if (static_cast<std::int64_t>(src.size()) < share[i])
            throw std::invalid_argument(
                "mix: source " + key + " has " + std::to_string(src.size()) +
                " transitions, needs " + std::to_string(share[i]) + " (short by " +
                std::to_string(share[i] - static_cast<std::int64_t>(src.size())) + ")");
        if (!have_spec) {
            out.spec = src.spec;
            have_spec = true;
        }
        // Partial Fisher-Yates: the first share[i] entries of idx end up a
        // uniform sample without replacement.
        std::vector<std::size_t> idx(src.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::int64_t k = 0; k < share[i]; ++k) {
            const std::size_t j = k + rng.uniform_index(idx.size() - k);
            std::swap(idx[k], idx[j]);
            out.transitions.push_back(src.transitions[idx[k]]);
        }
        out.meta.tier_counts[key] += share[i];
    }
    // Global shuffle.
    for (std::size_t k = out.transitions.size(); k > 1; --k) {
        const std::size_t j = rng.uniform_index(k);
        std::swap(out.transitions[k - 1], out.transitions[j]);
    }
    return out;
}

// Uniform minibatch indices, with replacement.
inline std::vector<std::size_t> sample_batch_indices(const OfflineDataset& dataset,
                                                     std::size_t batch_size, Rng& rng) {
    if (dataset.transitions.empty()) throw std::invalid_argument("sample_batch: empty dataset");
    if (batch_size > dataset.size())
        throw std::invalid_argument("sample_batch: batch_size exceeds dataset size");
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = rng.uniform_index(dataset.size());
    return idx;
}

inline std::vector<Transition> sample_batch(const OfflineDataset& dataset,
                                            std::size_t batch_size, Rng& rng) {
    std::vector<Transition> batch;
    batch.reserve(batch_size);
    for (std::size_t i : sample_batch_indices(dataset, batch_size, rng))
        batch.push_back(dataset.transitions[i]);
    return batch;
}

// Column view of a minibatch; the loss functions all consume this layout.
struct TransitionBatch {
    std::vector<std::vector<double>> s;
    std::vector<std::vector<double>> a;
    std::vector<double> r;
    std::vector<std::vector<double>> s_next;
    std::vector<std::uint8_t> done;

    std::size_t size() const { return r.size(); }

    static TransitionBatch from(std::span<const Transition> transitions) {
        TransitionBatch b;
        b.s.reserve(transitions.size());
        b.a.reserve(transitions.size());
        b.r.reserve(transitions.size());
        b.s_next.reserve(transitions.size());
        b.done.reserve(transitions.size());
        for (const Transition& t : transitions) {
            b.s.push_back(t.s);
            b.a.push_back(t.a);
            b.r.push_back(t.r);
            b.s_next.push_back(t.s_next);
            b.done.push_back(t.done ? 1 : 0);
        }
        return b;
    }

    static TransitionBatch gather(const OfflineDataset& d, std::span<const std::size_t> idx) {
        TransitionBatch b;
        b.s.reserve(idx.size());
        b.a.reserve(idx.size());
        b.r.reserve(idx.size());
        b.s_next.reserve(idx.size());
        b.done.reserve(idx.size());
        for (std::size_t i : idx) {
            const Transition& t = d.transitions[i];
            b.s.push_back(t.s);
            b.a.push_back(t.a);
            b.r.push_back(t.r);
            b.s_next.push_back(t.s_next);
            b.done.push_back(t.done ? 1 : 0);
        }
        return b;
    }
};

namespace detail {

// Shortest round-trip decimal for a double (std::to_chars guarantees the
// reparse recovers the identical bit pattern).
inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void append_vector(std::string& out, const std::vector<double>& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    out += ']';
}

inline std::vector<double> parse_vector(const nlohmann::json& j, const char* field, int line) {
    if (!j.is_array())
        throw std::runtime_error("line " + std::to_string(line) + ": field '" + field +
                                 "' is not an array");
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& e : j) v.push_back(e.get<double>());
    return v;
}

}  // namespace detail

// JSON Lines format. Line 1 is the meta object; each further line is one
// transition. Written by hand so the byte layout is stable; floats use the
// shortest round-trip decimal representation.
inline void write_dataset(const OfflineDataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + path);

    std::string line;
    line += "{\"format_version\":1,\"env\":\"" + to_string(d.spec.name) + "\"";
    line += ",\"obs_dim\":" + std::to_string(d.spec.obs_dim);
    line += ",\"act_dim\":" + std::to_string(d.spec.act_dim);
    line += ",\"seed\":" + std::to_string(d.meta.seed);
    line += ",\"tier_counts\":{";
    bool first = true;
    for (const auto& [tier, count] : d.meta.tier_counts) {
        if (!first) line += ',';
        line += "\"" + tier + "\":" + std::to_string(count);
        first = false;
    }
    line += "}}\n";
    out << line;

    for (const Transition& t : d.transitions) {
        line.clear();
        line += "{\"s\":";
        detail::append_vector(line, t.s);
        line += ",\"a\":";
        detail::append_vector(line, t.a);
        line += ",\"r\":" + detail::format_double(t.r);
        line += ",\"s_next\":";
        detail::append_vector(line, t.s_next);
        line += ",\"done\":";
        line += t.done ? "true" : "false";
        line += ",\"tier\":\"" + to_string(t.tier) + "\"}\n";
        out << line;
    }
    if (!out) throw std::runtime_error("write_dataset: write failed for " + path);
}

inline OfflineDataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + path);

    std::string text;
    int line_no = 0;
    if (!std::getline(in, text)) throw std::runtime_error("read_dataset: empty file " + path);
    line_no = 1;

    OfflineDataset d;
    try {
        const auto meta = nlohmann::json::parse(text);
        if (meta.at("format_version").get<int>() != 1)
            throw std::runtime_error("unsupported format_version");
        d.spec = make_env(env_from_string(meta.at("env").get<std::string>()));
        const int obs_dim = meta.at("obs_dim").get<int>();
        const int act_dim = meta.at("act_dim").get<int>();
        if (obs_dim != d.spec.obs_dim || act_dim != d.spec.act_dim)
            throw std::runtime_error("meta dims do not match env " + to_string(d.spec.name));
        d.meta.seed = meta.at("seed").get<std::uint64_t>();
        for (const auto& [k, v] : meta.at("tier_counts").items())
            d.meta.tier_counts[k] = v.get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("read_dataset: line 1: " + std::string(e.what()));
    }

    std::int64_t expected = 0;
    for (const auto& [k, v] : d.meta.tier_counts) expected += v;

    while (std::getline(in, text)) {
        ++line_no;
        if (text.empty()) continue;
        Transition t;
        try {
            const auto j = nlohmann::json::parse(text);
            t.s = detail::parse_vector(j.at("s"), "s", line_no);
            t.a = detail::parse_vector(j.at("a"), "a", line_no);
            t.r = j.at("r").get<double>();
            t.s_next = detail::parse_vector(j.at("s_next"), "s_next", line_no);
            t.done = j.at("done").get<bool>();
            t.tier = tier_from_string(j.at("tier").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("read_dataset: line " + std::to_string(line_no) + ": " +
                                     std::string(e.what()));
        }
        if (static_cast<int>(t.s.size()) != d.spec.obs_dim ||
            static_cast<int>(t.s_next.size()) != d.spec.obs_dim)
            throw std::runtime_error("read_dataset: line " + std::to_string(line_no) +
                                     ": state length does not match obs_dim " +
                                     std::to_string(d.spec.obs_dim));
        if (static_cast<int>(t.a.size()) != d.spec.act_dim)
            throw std::runtime_error("read_dataset: line " + std::to_string(line_no) +
                                     ": action length does not match act_dim " +
                                     std::to_string(d.spec.act_dim));
        d.transitions.push_back(std::move(t));
    }
    if (static_cast<std::int64_t>(d.transitions.size()) != expected)
        throw std::runtime_error("read_dataset: " + path + " truncated: tier counts promise " +
                                 std::to_string(expected) + " transitions, found " +
                                 std::to_string(d.transitions.size()));
    return d;
}

}  // namespace a2po
