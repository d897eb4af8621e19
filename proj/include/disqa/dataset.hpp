#pragma once

// Train/validation/test partitioning. SystemHoldout keeps every system's
// clips in a single bucket so validation and test measure generalization
// to unseen generators.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "disqa/annotations.hpp"
#include "disqa/core.hpp"

namespace disqa {

struct ClipEntry {
    std::string clip_id;
    std::string system_id;
    std::string prompt_text;

    friend bool operator==(const ClipEntry&, const ClipEntry&) = default;
};

enum class SplitMode { SystemHoldout, ClipRandom };

inline std::string_view to_string(SplitMode m) {
    return m == SplitMode::SystemHoldout ? "system_holdout" : "clip_random";
}

inline SplitMode parse_split_mode(std::string_view s) {
    if (s == "system_holdout") return SplitMode::SystemHoldout;
    if (s == "clip_random") return SplitMode::ClipRandom;
    throw ValidationError("unknown split mode '" + std::string(s) + "'");
}

struct SplitSpec {
    std::array<double, 3> ratios = {0.8, 0.1, 0.1}; // train, val, test
    std::uint64_t seed = 0;
    SplitMode mode = SplitMode::SystemHoldout;

    void validate() const {
        double sum = 0.0;
        for (double r : ratios) {
            if (!(r > 0.0)) throw ValidationError("split ratios must be positive");
            sum += r;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
    }
};

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;

    friend bool operator==(const Split&, const Split&) = default;
};

// Distinct clips from a rating manifest, in first-appearance order. Prompts
// are not part of the manifest and are left empty.
inline std::vector<ClipEntry> clips_from_ratings(std::span<const RatingRecord> records) {
    std::vector<ClipEntry> clips;
    std::map<std::string, std::string> seen;
    for (const auto& r : records) {
        auto [it, fresh] = seen.emplace(r.clip_id, r.system_id);
        if (fresh)
            clips.push_back({r.clip_id, r.system_id, {}});
        else if (it->second != r.system_id)
            throw ValidationError("clip '" + r.clip_id + "' attributed to systems '" + it->second + "' and '" +
                                  r.system_id + "'");
    }
    return clips;
}

namespace detail {

inline void check_clips(std::span<const ClipEntry> clips) {
    if (clips.empty()) throw ValidationError("split: empty clip list");
    std::set<std::string_view> ids;
    for (const auto& c : clips) {
        if (c.system_id.empty()) throw ValidationError("clip '" + c.clip_id + "' has an empty system_id");
        if (!ids.insert(c.clip_id).second) throw ValidationError("duplicate clip_id '" + c.clip_id + "'");
    }
}

} // namespace detail

// Deterministic in (clips, spec).
//
// SystemHoldout: systems are visited in seed-shuffled order and each goes
// whole to the bucket with the largest remaining clip deficit (ties to
// train, then val, then test). With few or very unequal systems val or
// test can come out empty; callers that need them check.
//
// ClipRandom: clips are shuffled and cut at the ratio boundaries.
inline Split split(std::span<const ClipEntry> clips, const SplitSpec& spec) {
    spec.validate();
    detail::check_clips(clips);
    std::mt19937_64 rng(spec.seed);
    Split out;
    std::array<std::vector<std::string>*, 3> buckets = {&out.train, &out.val, &out.test};

    if (spec.mode == SplitMode::ClipRandom) {
        std::vector<std::size_t> order(clips.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const auto n = static_cast<double>(clips.size());
        const auto n_train = static_cast<std::size_t>(std::llround(spec.ratios[0] * n));
        const auto n_val = std::min(clips.size() - n_train, static_cast<std::size_t>(std::llround(spec.ratios[1] * n)));
        for (std::size_t i = 0; i < order.size(); ++i) {
            const int b = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
            buckets[b]->push_back(clips[order[i]].clip_id);
        }
        return out;
    }

    // System sizes, in order of first appearance before shuffling.
    std::vector<std::string> systems;
    std::map<std::string, std::size_t> size;
    for (const auto& c : clips)
        if (size[c.system_id]++ == 0) systems.push_back(c.system_id);
    if (systems.size() < 3)
        throw ValidationError("system holdout needs at least 3 systems, found " + std::to_string(systems.size()));
    std::shuffle(systems.begin(), systems.end(), rng);

    const auto total = static_cast<double>(clips.size());
    std::array<double, 3> deficit{};
    for (int b = 0; b < 3; ++b) deficit[b] = spec.ratios[b] * total;
    std::map<std::string, int> assigned;
    for (const auto& s : systems) {
        int best = 0;
        for (int b = 1; b < 3; ++b)
            if (deficit[b] > deficit[best]) best = b;
        deficit[best] -= static_cast<double>(size[s]);
        assigned[s] = best;
    }

    for (const auto& c : clips) buckets[assigned.at(c.system_id)]->push_back(c.clip_id);
    return out;
}

struct SplitViolation {
    enum class Kind { Overlap, Missing, Unknown, SystemLeak };
    Kind kind;
    std::string subject; // clip or system id
    std::string message;
};

// Empty iff every split invariant holds for `mode`.
inline std::vector<SplitViolation> verify_split(const Split& s, std::span<const ClipEntry> clips, SplitMode mode) {
    using K = SplitViolation::Kind;
    std::vector<SplitViolation> out;
    std::map<std::string, std::string> system_of;
    for (const auto& c : clips) system_of[c.clip_id] = c.system_id;

    static constexpr std::array<const char*, 3> names = {"train", "val", "test"};
    const std::array<const std::vector<std::string>*, 3> buckets = {&s.train, &s.val, &s.test};
    std::map<std::string, std::vector<int>> where;
    for (int b = 0; b < 3; ++b)
        for (const auto& id : *buckets[b]) where[id].push_back(b);

    for (const auto& [id, bs] : where) {
        if (bs.size() > 1) {
            std::string list;
            for (int b : bs) list += (list.empty() ? "" : ", ") + std::string(names[b]);
            out.push_back({K::Overlap, id, "clip '" + id + "' appears in more than one partition (" + list + ")"});
        }
        if (!system_of.count(id)) out.push_back({K::Unknown, id, "clip '" + id + "' is not in the clip list"});
    }
    for (const auto& c : clips)
        if (!where.count(c.clip_id))
            out.push_back({K::Missing, c.clip_id, "clip '" + c.clip_id + "' is not assigned to any partition"});

    if (mode == SplitMode::SystemHoldout) {
        std::map<std::string, std::set<int>> buckets_of_system;
        for (const auto& [id, bs] : where) {
            auto it = system_of.find(id);
            if (it == system_of.end()) continue;
            buckets_of_system[it->second].insert(bs.begin(), bs.end());
        }
        for (const auto& [sys, bs] : buckets_of_system) {
            if (bs.size() <= 1) continue;
            std::string list;
            for (int b : bs) list += (list.empty() ? "" : ", ") + std::string(names[b]);
            out.push_back({K::SystemLeak, sys, "system '" + sys + "' spans partitions " + list});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::ordered_json to_json(const SplitSpec& spec) {
    nlohmann::ordered_json j;
    j["ratios"] = spec.ratios;
    j["seed"] = spec.seed;
    j["mode"] = to_string(spec.mode);
    return j;
}

inline nlohmann::ordered_json split_to_json(const Split& s, const SplitSpec& spec) {
    nlohmann::ordered_json j;
    j["spec"] = to_json(spec);
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    return j;
}

struct StoredSplit {
    Split split;
    SplitSpec spec;
};

inline StoredSplit split_from_json(const nlohmann::json& j) {
    try {
        StoredSplit out;
        const auto& spec = j.at("spec");
        out.spec.ratios = spec.at("ratios").get<std::array<double, 3>>();
        out.spec.seed = spec.at("seed").get<std::uint64_t>();
        out.spec.mode = parse_split_mode(spec.at("mode").get<std::string>());
        out.split.train = j.at("train").get<std::vector<std::string>>();
        out.split.val = j.at("val").get<std::vector<std::string>>();
        out.split.test = j.at("test").get<std::vector<std::string>>();
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed split document: ") + e.what());
    }
}

} // namespace disqa
