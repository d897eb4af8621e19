#pragma once

// Multi-rater annotation ingestion: manifest parsing, the consistency probe
// filter, grouping by (clip, dimension, perspective), and Gaussian-kernel
// soft targets averaged over raters.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "disqa/core.hpp"

namespace disqa {

struct RatingRecord {
    std::string clip_id;
    std::string system_id;
    Dimension dimension = Dimension::PQ;
    Perspective perspective = Perspective::Expert;
    std::string rater_id;
    int score = kMinScore;
    std::optional<int> probe_score;

    friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

inline bool valid_score(long long s) { return s >= kMinScore && s <= kMaxScore; }

struct ParseOptions {
    // Reject unknown fields instead of ignoring them.
    bool strict = false;
};

namespace detail {

template <typename T>
T require_field(const nlohmann::json& obj, const char* name, std::size_t line) {
    auto it = obj.find(name);
    if (it == obj.end()) throw ParseError(line, std::string("missing field '") + name + "'");
    if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ParseError(line, std::string("field '") + name + "' must be a string");
        return it->template get<std::string>();
    } else {
        if (!it->is_number_integer())
            throw ParseError(line, std::string("field '") + name + "' must be an integer");
        return it->template get<T>();
    }
}

} // namespace detail

// Parses a newline-delimited JSON annotation manifest. Blank lines are skipped;
// line numbers in errors are 1-based.
inline std::vector<RatingRecord> parse_ratings(std::istream& in, ParseOptions opts = {}) {
    static const std::set<std::string> known = {"clip_id", "system_id", "dimension", "perspective",
                                                "rater_id", "score", "probe_score"};
    std::vector<RatingRecord> out;
    std::set<std::tuple<std::string, Dimension, Perspective, std::string>> seen;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }))
            continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line, std::string("malformed record: ") + e.what());
        }
        if (!obj.is_object()) throw ParseError(line, "record is not an object");
        if (opts.strict) {
            for (auto it = obj.begin(); it != obj.end(); ++it)
                if (!known.count(it.key())) throw ParseError(line, "unknown field '" + it.key() + "'");
        }

        RatingRecord r;
        r.clip_id = detail::require_field<std::string>(obj, "clip_id", line);
        r.system_id = detail::require_field<std::string>(obj, "system_id", line);
        r.rater_id = detail::require_field<std::string>(obj, "rater_id", line);
        if (r.clip_id.empty()) throw ParseError(line, "empty clip_id");
        if (r.system_id.empty()) throw ParseError(line, "empty system_id");

        auto dim_name = detail::require_field<std::string>(obj, "dimension", line);
        auto dim = parse_dimension(dim_name);
        if (!dim) throw ParseError(line, "unknown dimension '" + dim_name + "'");
        r.dimension = *dim;

        auto persp_name = detail::require_field<std::string>(obj, "perspective", line);
        auto persp = parse_perspective(persp_name);
        if (!persp) throw ParseError(line, "unknown perspective '" + persp_name + "'");
        r.perspective = *persp;

        auto score = detail::require_field<long long>(obj, "score", line);
        if (!valid_score(score))
            throw ParseError(line, "score " + std::to_string(score) + " outside 1..10");
        r.score = static_cast<int>(score);

        if (auto it = obj.find("probe_score"); it != obj.end() && !it->is_null()) {
            if (!it->is_number_integer()) throw ParseError(line, "field 'probe_score' must be an integer");
            auto probe = it->get<long long>();
            if (!valid_score(probe))
                throw ParseError(line, "probe_score " + std::to_string(probe) + " outside 1..10");
            r.probe_score = static_cast<int>(probe);
        }

        if (!seen.emplace(r.clip_id, r.dimension, r.perspective, r.rater_id).second)
            throw ParseError(line, "duplicate rating for clip '" + r.clip_id + "' " +
                                       std::string(to_string(r.dimension)) + "/" +
                                       std::string(to_string(r.perspective)) + " rater '" + r.rater_id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

inline nlohmann::ordered_json to_json(const RatingRecord& r) {
    nlohmann::ordered_json j;
    j["clip_id"] = r.clip_id;
    j["system_id"] = r.system_id;
    j["dimension"] = to_string(r.dimension);
    j["perspective"] = to_string(r.perspective);
    j["rater_id"] = r.rater_id;
    j["score"] = r.score;
    if (r.probe_score) j["probe_score"] = *r.probe_score;
    return j;
}

inline void write_ratings(std::span<const RatingRecord> records, std::ostream& out) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Consistency probe

struct Partition {
    std::vector<RatingRecord> kept;
    std::vector<RatingRecord> discarded;
};

inline constexpr int kDefaultProbeThreshold = 2;

// A record is discarded iff it carries a probe repeat differing from the
// original score by more than `threshold` points.
inline bool fails_probe(const RatingRecord& r, int threshold) {
    return r.probe_score && std::abs(r.score - *r.probe_score) > threshold;
}

inline Partition consistency_filter(std::span<const RatingRecord> records,
                                    int threshold = kDefaultProbeThreshold) {
    if (threshold < 0) throw ValidationError("consistency threshold must be >= 0");
    Partition p;
    for (const auto& r : records) (fails_probe(r, threshold) ? p.discarded : p.kept).push_back(r);
    return p;
}

// ---------------------------------------------------------------------------
// Grouping

struct GroupKey {
    std::string clip_id;
    Dimension dimension = Dimension::PQ;
    Perspective perspective = Perspective::Expert;

    friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
    friend bool operator==(const GroupKey&, const GroupKey&) = default;
};

inline std::string describe(const GroupKey& k) {
    return k.clip_id + " " + std::string(to_string(k.dimension)) + "/" + std::string(to_string(k.perspective));
}

struct IncompleteGroup {
    GroupKey key;
    std::size_t found = 0;
};

struct GroupedRatings {
    std::map<GroupKey, std::vector<int>> groups;
    // Keys with fewer than the required number of raters. They stay in `groups`.
    std::vector<IncompleteGroup> incomplete;
};

inline constexpr int kDefaultRequiredRaters = 3;

inline GroupedRatings group_ratings(std::span<const RatingRecord> records,
                                    int required_raters = kDefaultRequiredRaters, bool strict = false) {
    if (required_raters < 1) throw ValidationError("required_raters must be >= 1");
    GroupedRatings g;
    for (const auto& r : records) g.groups[{r.clip_id, r.dimension, r.perspective}].push_back(r.score);
    for (const auto& [key, scores] : g.groups) {
        if (scores.size() < static_cast<std::size_t>(required_raters)) {
            if (strict)
                throw ValidationError("incomplete group " + describe(key) + ": found " +
                                      std::to_string(scores.size()) + " of " +
                                      std::to_string(required_raters) + " ratings");
            g.incomplete.push_back({key, scores.size()});
        }
    }
    return g;
}

// Inter-rater variant of the probe: drops every record of a (clip, d, v) group
// whose score range max - min exceeds `threshold`.
inline Partition spread_filter(std::span<const RatingRecord> records, int threshold = kDefaultProbeThreshold) {
    if (threshold < 0) throw ValidationError("spread threshold must be >= 0");
    std::map<GroupKey, std::pair<int, int>> range;
    for (const auto& r : records) {
        auto [it, fresh] = range.try_emplace({r.clip_id, r.dimension, r.perspective}, r.score, r.score);
        if (!fresh) {
            it->second.first = std::min(it->second.first, r.score);
            it->second.second = std::max(it->second.second, r.score);
        }
    }
    Partition p;
    for (const auto& r : records) {
        const auto& [lo, hi] = range.at({r.clip_id, r.dimension, r.perspective});
        (hi - lo > threshold ? p.discarded : p.kept).push_back(r);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Soft targets

struct SoftLabelConfig {
    double sigma = 1.0;
    int num_bins = kNumBins;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be a positive finite value");
        if (num_bins != kNumBins) throw ValidationError("num_bins must be 10");
    }
};

struct TargetDistribution {
    std::string clip_id;
    Dimension dimension = Dimension::PQ;
    Perspective perspective = Perspective::Expert;
    Distribution probs{};
    double mean = 0.0;
};

// Gaussian kernel centred on score y, normalized over bins 1..10. Mass that
// would fall outside the scale is truncated, not reflected.
inline Distribution soft_label(int y, const SoftLabelConfig& cfg = {}) {
    if (!valid_score(y)) throw ValidationError("score " + std::to_string(y) + " outside 1..10");
    cfg.validate();
    Distribution p{};
    double z = 0.0;
    for (int k = 1; k <= kNumBins; ++k) {
        const double u = (y - k) / cfg.sigma;
        p[k - 1] = std::exp(-0.5 * u * u);
        z += p[k - 1];
    }
    for (auto& v : p) v /= z;
    return p;
}

// Average of per-rater soft labels (1/M over M raters).
inline Distribution target_distribution(std::span<const int> scores, const SoftLabelConfig& cfg = {}) {
    if (scores.empty()) throw ValidationError("target_distribution: empty score list");
    Distribution acc{};
    for (int y : scores) {
        const auto p = soft_label(y, cfg);
        for (int k = 0; k < kNumBins; ++k) acc[k] += p[k];
    }
    const double m = static_cast<double>(scores.size());
    for (auto& v : acc) v /= m;
    return acc;
}

inline std::vector<TargetDistribution> build_targets(const GroupedRatings& grouped, const SoftLabelConfig& cfg = {}) {
    std::vector<TargetDistribution> out;
    out.reserve(grouped.groups.size());
    for (const auto& [key, scores] : grouped.groups) {
        TargetDistribution t;
        t.clip_id = key.clip_id;
        t.dimension = key.dimension;
        t.perspective = key.perspective;
        t.probs = target_distribution(scores, cfg);
        t.mean = distribution_mean(t.probs);
        out.push_back(std::move(t));
    }
    return out;
}

inline nlohmann::ordered_json to_json(const TargetDistribution& t) {
    nlohmann::ordered_json j;
    j["clip_id"] = t.clip_id;
    j["dimension"] = to_string(t.dimension);
    j["perspective"] = to_string(t.perspective);
    j["probs"] = t.probs;
    j["mean"] = t.mean;
    return j;
}

inline void write_targets(std::span<const TargetDistribution> targets, std::ostream& out) {
    for (const auto& t : targets) out << to_json(t).dump() << '\n';
}

} // namespace disqa
