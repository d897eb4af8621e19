#pragma once

// AEVF v1: the binary container for precomputed (prompt, audio) embeddings.
//
//   bytes 0-3    magic "AEVF"
//   bytes 4-7    version (u32, = 1)
//   bytes 8-11   dim (u32)
//   bytes 12-15  count (u32)
//   count records: u32 clip_id length L, L bytes UTF-8 clip_id, dim x f32
//
// All integers and floats little-endian. Values are stored as 32-bit floats
// and widened to double in memory.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "disqa/annotations.hpp"
#include "disqa/core.hpp"

namespace disqa {

struct FeatureVector {
    std::string clip_id;
    std::vector<double> values;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FeatureSet {
    std::uint32_t dim = 0;
    std::vector<FeatureVector> vectors;
};

inline constexpr std::array<char, 4> kFeatureMagic = {'A', 'E', 'V', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 16;

namespace le {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

inline void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

// Returns false on short read.
inline bool get_u32(std::istream& in, std::uint32_t& v) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

inline bool get_f32(std::istream& in, float& f) {
    std::uint32_t bits = 0;
    if (!get_u32(in, bits)) return false;
    f = std::bit_cast<float>(bits);
    return true;
}

} // namespace le

inline std::size_t write_features(std::span<const FeatureVector> vectors, std::uint32_t dim, std::ostream& out) {
    if (dim == 0) throw ValidationError("feature dimension must be >= 1");
    std::set<std::string_view> ids;
    for (const auto& v : vectors) {
        if (v.values.size() != dim)
            throw ValidationError("dimension mismatch for clip '" + v.clip_id + "': expected " +
                                  std::to_string(dim) + ", got " + std::to_string(v.values.size()));
        if (!ids.insert(v.clip_id).second) throw ValidationError("duplicate clip_id '" + v.clip_id + "'");
        for (double x : v.values)
            if (!std::isfinite(static_cast<float>(x)))
                throw ValidationError("non-finite feature value for clip '" + v.clip_id + "'");
    }
    if (vectors.size() > UINT32_MAX) throw ValidationError("too many feature vectors");

    out.write(kFeatureMagic.data(), 4);
    le::put_u32(out, kFeatureVersion);
    le::put_u32(out, dim);
    le::put_u32(out, static_cast<std::uint32_t>(vectors.size()));
    std::size_t bytes = kFeatureHeaderBytes;
    for (const auto& v : vectors) {
        le::put_u32(out, static_cast<std::uint32_t>(v.clip_id.size()));
        out.write(v.clip_id.data(), static_cast<std::streamsize>(v.clip_id.size()));
        for (double x : v.values) le::put_f32(out, static_cast<float>(x));
        bytes += 4 + v.clip_id.size() + 4 * static_cast<std::size_t>(dim);
    }
    if (!out) throw IoError("failed writing feature stream");
    return bytes;
}

inline std::size_t write_features(const FeatureSet& set, std::ostream& out) {
    return write_features(set.vectors, set.dim, out);
}

struct FeatureReadOptions {
    // Upper bound on count * dim accepted from a header.
    std::uint64_t max_values = std::uint64_t{1} << 28;
    std::uint32_t max_id_bytes = 1 << 16;
};

inline FeatureSet read_features(std::istream& in, FeatureReadOptions opts = {}) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4)) throw FormatError("truncated AEVF header");
    if (magic != kFeatureMagic) throw FormatError("bad magic: not an AEVF stream");
    std::uint32_t version = 0, dim = 0, count = 0;
    if (!le::get_u32(in, version) || !le::get_u32(in, dim) || !le::get_u32(in, count))
        throw FormatError("truncated AEVF header");
    if (version != kFeatureVersion) throw FormatError("unsupported AEVF version " + std::to_string(version));
    if (dim == 0) throw FormatError("AEVF dim must be >= 1");
    if (static_cast<std::uint64_t>(count) * dim > opts.max_values)
        throw FormatError("AEVF header declares " + std::to_string(count) + " x " + std::to_string(dim) +
                          " values, above the configured cap");

    FeatureSet set;
    set.dim = dim;
    set.vectors.reserve(count);
    std::set<std::string> ids;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto where = " in record " + std::to_string(i) + " of " + std::to_string(count);
        std::uint32_t len = 0;
        if (!le::get_u32(in, len)) throw FormatError("truncated stream" + where);
        if (len > opts.max_id_bytes) throw FormatError("clip_id length " + std::to_string(len) + " too large" + where);
        FeatureVector v;
        v.clip_id.resize(len);
        if (len > 0 && !in.read(v.clip_id.data(), len)) throw FormatError("truncated stream" + where);
        v.values.resize(dim);
        for (auto& x : v.values) {
            float f = 0.0f;
            if (!le::get_f32(in, f)) throw FormatError("truncated stream" + where);
            if (!std::isfinite(f)) throw FormatError("non-finite value for clip '" + v.clip_id + "'");
            x = f;
        }
        if (!ids.insert(v.clip_id).second) throw FormatError("duplicate clip_id '" + v.clip_id + "'");
        set.vectors.push_back(std::move(v));
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError("count mismatch: trailing bytes after " + std::to_string(count) + " records");
    return set;
}

// ---------------------------------------------------------------------------
// Join with targets

// One training/evaluation example: a feature vector with its ten targets.
struct Example {
    std::string clip_id;
    std::vector<double> x;
    PerHead<Distribution> target{};
    PerHead<double> target_mean{};
};

struct JoinResult {
    std::vector<Example> examples;          // in feature-file order
    std::vector<std::string> features_only; // clips without any target
    std::vector<std::string> targets_only;  // clips without a feature vector
    std::vector<std::string> incomplete;    // clips with features but fewer than ten targets
};

inline JoinResult join_features(const FeatureSet& features, std::span<const TargetDistribution> targets) {
    struct Bundle {
        PerHead<const TargetDistribution*> heads{};
    };
    std::map<std::string, Bundle> by_clip;
    for (const auto& t : targets) by_clip[t.clip_id].heads[head_index(t.dimension, t.perspective)] = &t;

    JoinResult r;
    std::set<std::string_view> with_features;
    for (const auto& f : features.vectors) {
        with_features.insert(f.clip_id);
        auto it = by_clip.find(f.clip_id);
        if (it == by_clip.end()) {
            r.features_only.push_back(f.clip_id);
            continue;
        }
        const auto& heads = it->second.heads;
        if (std::any_of(heads.begin(), heads.end(), [](auto* p) { return p == nullptr; })) {
            r.incomplete.push_back(f.clip_id);
            continue;
        }
        Example ex;
        ex.clip_id = f.clip_id;
        ex.x = f.values;
        for (std::size_t h = 0; h < kNumHeads; ++h) {
            ex.target[h] = heads[h]->probs;
            ex.target_mean[h] = heads[h]->mean;
        }
        r.examples.push_back(std::move(ex));
    }
    for (const auto& [id, _] : by_clip)
        if (!with_features.count(id)) r.targets_only.push_back(id);
    return r;
}

} // namespace disqa
