#pragma once

// Shared vocabulary: rating dimensions, rater perspectives, head indexing,
// score-bin constants and the error hierarchy used across the toolkit.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace disqa {

inline constexpr int kNumBins = 10;
inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;
inline constexpr int kNumDimensions = 5;
inline constexpr int kNumPerspectives = 2;
inline constexpr int kNumHeads = kNumDimensions * kNumPerspectives;

using Distribution = std::array<double, kNumBins>;

// Canonical serialization order: PQ, PC, CE, CU, TA.
enum class Dimension : int { PQ = 0, PC = 1, CE = 2, CU = 3, TA = 4 };

enum class Perspective : int { Expert = 0, NonExpert = 1 };

inline constexpr std::array<Dimension, kNumDimensions> kDimensions = {
    Dimension::PQ, Dimension::PC, Dimension::CE, Dimension::CU, Dimension::TA};

inline constexpr std::array<Perspective, kNumPerspectives> kPerspectives = {
    Perspective::Expert, Perspective::NonExpert};

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract input (exit code 2 at the CLI).
class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Binary container problems (bad magic, truncation, ...).
class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Statistic undefined on the given data, e.g. zero variance.
class DegenerateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Names

inline constexpr std::string_view to_string(Dimension d) {
    switch (d) {
    case Dimension::PQ: return "PQ";
    case Dimension::PC: return "PC";
    case Dimension::CE: return "CE";
    case Dimension::CU: return "CU";
    case Dimension::TA: return "TA";
    }
    return "?";
}

inline constexpr std::string_view to_string(Perspective p) {
    return p == Perspective::Expert ? "expert" : "nonexpert";
}

inline std::optional<Dimension> parse_dimension(std::string_view s) {
    for (auto d : kDimensions)
        if (to_string(d) == s) return d;
    return std::nullopt;
}

inline std::optional<Perspective> parse_perspective(std::string_view s) {
    if (s == "expert") return Perspective::Expert;
    if (s == "nonexpert") return Perspective::NonExpert;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Head indexing. Heads are ordered dimension-major: PQ/expert, PQ/nonexpert,
// PC/expert, ... TA/nonexpert.

struct HeadKey {
    Dimension dimension;
    Perspective perspective;

    friend constexpr bool operator==(HeadKey, HeadKey) = default;
};

inline constexpr std::size_t head_index(Dimension d, Perspective p) {
    return static_cast<std::size_t>(d) * kNumPerspectives + static_cast<std::size_t>(p);
}

inline constexpr std::size_t head_index(HeadKey k) { return head_index(k.dimension, k.perspective); }

inline constexpr HeadKey head_key(std::size_t index) {
    return {static_cast<Dimension>(index / kNumPerspectives),
            static_cast<Perspective>(index % kNumPerspectives)};
}

inline std::string head_label(std::size_t index) {
    auto k = head_key(index);
    return std::string(to_string(k.dimension)) + "/" + std::string(to_string(k.perspective));
}

template <typename T>
using PerHead = std::array<T, kNumHeads>;

// Expected score over bins 1..10.
inline double distribution_mean(const Distribution& p) {
    double m = 0.0;
    for (int k = 0; k < kNumBins; ++k) m += (k + 1) * p[k];
    return m;
}

} // namespace disqa
