#pragma once

// Glue shared by the CLI and the end-to-end tests: ratings -> filtered
// groups -> soft targets -> joined examples -> partitioned sets -> scores.

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "disqa/annotations.hpp"
#include "disqa/dataset.hpp"
#include "disqa/features.hpp"
#include "disqa/metrics.hpp"
#include "disqa/model.hpp"

namespace disqa {

struct TargetOptions {
    SoftLabelConfig soft;
    int probe_threshold = kDefaultProbeThreshold;
    // Inter-rater range filter, off unless set.
    std::optional<int> spread_threshold;
    int required_raters = kDefaultRequiredRaters;
    bool strict = false;
};

struct PreparedTargets {
    std::vector<TargetDistribution> targets;
    std::size_t discarded_by_probe = 0;
    std::size_t discarded_by_spread = 0;
    std::vector<IncompleteGroup> incomplete;
};

inline PreparedTargets prepare_targets(std::span<const RatingRecord> records, const TargetOptions& opts) {
    opts.soft.validate();
    PreparedTargets out;
    auto probe = consistency_filter(records, opts.probe_threshold);
    out.discarded_by_probe = probe.discarded.size();
    std::vector<RatingRecord> kept = std::move(probe.kept);
    if (opts.spread_threshold) {
        auto spread = spread_filter(kept, *opts.spread_threshold);
        out.discarded_by_spread = spread.discarded.size();
        kept = std::move(spread.kept);
    }
    auto grouped = group_ratings(kept, opts.required_raters, opts.strict);
    out.incomplete = std::move(grouped.incomplete);
    out.targets = build_targets(grouped, opts.soft);
    return out;
}

// Examples whose clip_id is in `ids`, keeping the order of `examples`.
inline std::vector<Example> select_examples(std::span<const Example> examples, std::span<const std::string> ids) {
    const std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<Example> out;
    for (const auto& ex : examples)
        if (wanted.count(ex.clip_id)) out.push_back(ex);
    return out;
}

inline MeanScores target_means(std::span<const Example> examples) {
    MeanScores out;
    for (const auto& ex : examples) out[ex.clip_id] = ex.target_mean;
    return out;
}

inline MeanScores predicted_means(const ProbeModel& model, std::span<const Example> examples) {
    MeanScores out;
    for (const auto& ex : examples) {
        const auto pred = forward(model, ex.x);
        auto& m = out[ex.clip_id];
        for (std::size_t h = 0; h < kNumHeads; ++h) m[h] = pred[h].mean;
    }
    return out;
}

inline SystemMap system_map(std::span<const RatingRecord> records) {
    SystemMap out;
    for (const auto& r : records) out.emplace(r.clip_id, r.system_id);
    return out;
}

inline SystemMap system_map(std::span<const ClipEntry> clips) {
    SystemMap out;
    for (const auto& c : clips) out.emplace(c.clip_id, c.system_id);
    return out;
}

inline double mean_pcc(const EvalReport& r, bool system_level) {
    double acc = 0.0;
    for (const auto& h : r.heads) acc += system_level ? h.system.pcc : h.utterance.pcc;
    return acc / kNumHeads;
}

} // namespace disqa
