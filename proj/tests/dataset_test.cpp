#include "disqa/dataset.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace disqa;

namespace {

std::vector<ClipEntry> make_clips(const std::vector<int>& sizes) {
    std::vector<ClipEntry> clips;
    for (std::size_t s = 0; s < sizes.size(); ++s)
        for (int c = 0; c < sizes[s]; ++c)
            clips.push_back({"s" + std::to_string(s) + "_c" + std::to_string(c), "s" + std::to_string(s), "p"});
    return clips;
}

std::set<std::string> systems_of(const std::vector<std::string>& ids, const std::vector<ClipEntry>& clips) {
    std::map<std::string, std::string> m;
    for (const auto& c : clips) m[c.clip_id] = c.system_id;
    std::set<std::string> out;
    for (const auto& id : ids) out.insert(m.at(id));
    return out;
}

} // namespace

TEST(Split, EqualSystemsAchieveExactRatios) {
    const auto clips = make_clips(std::vector<int>(30, 10));
    const auto s = split(clips, {{0.8, 0.1, 0.1}, 42, SplitMode::SystemHoldout});
    EXPECT_EQ(s.train.size(), 240u);
    EXPECT_EQ(s.val.size(), 30u);
    EXPECT_EQ(s.test.size(), 30u);
    EXPECT_EQ(systems_of(s.train, clips).size(), 24u);
    EXPECT_EQ(systems_of(s.val, clips).size(), 3u);
    EXPECT_EQ(systems_of(s.test, clips).size(), 3u);
    EXPECT_TRUE(verify_split(s, clips, SplitMode::SystemHoldout).empty());
}

TEST(Split, EqualSystemsExactForEverySeed) {
    // Brute-force check over seeds: greedy packing of equal systems lands on
    // 24/3/3 regardless of visiting order.
    const auto clips = make_clips(std::vector<int>(30, 10));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = split(clips, {{0.8, 0.1, 0.1}, seed, SplitMode::SystemHoldout});
        ASSERT_EQ(s.train.size(), 240u);
        ASSERT_EQ(s.val.size(), 30u);
    }
}

TEST(Split, DeterministicGivenSeed) {
    const auto clips = make_clips({5, 9, 3, 12, 7, 7, 1, 20});
    const SplitSpec spec{{0.8, 0.1, 0.1}, 9, SplitMode::SystemHoldout};
    EXPECT_EQ(split(clips, spec), split(clips, spec));
    const SplitSpec random{{0.8, 0.1, 0.1}, 9, SplitMode::ClipRandom};
    EXPECT_EQ(split(clips, random), split(clips, random));
}

TEST(Split, Preconditions) {
    EXPECT_THROW(split(make_clips({4, 4}), {}), ValidationError);
    EXPECT_THROW(split(std::vector<ClipEntry>{}, {}), ValidationError);
    EXPECT_THROW(split(make_clips({4, 4, 4}), {{0.5, 0.5, 0.5}, 0, SplitMode::SystemHoldout}), ValidationError);
    EXPECT_THROW(split(make_clips({4, 4, 4}), {{1.0, 0.0, 0.0}, 0, SplitMode::SystemHoldout}), ValidationError);
    auto dup = make_clips({2, 2, 2});
    dup.push_back(dup.front());
    EXPECT_THROW(split(dup, {}), ValidationError);
    // Two systems are fine for clip-random splits.
    EXPECT_NO_THROW(split(make_clips({4, 4}), {{0.8, 0.1, 0.1}, 0, SplitMode::ClipRandom}));
}

TEST(Split, GreedyFollowsLargestDeficit) {
    // Three equal systems: train's deficit stays largest throughout, so
    // greedy packing puts every system in train.
    const auto clips = make_clips({10, 10, 10});
    const auto s = split(clips, {});
    EXPECT_EQ(s.train.size(), 30u);
    EXPECT_TRUE(s.val.empty());
    EXPECT_TRUE(s.test.empty());
    EXPECT_TRUE(verify_split(s, clips, SplitMode::SystemHoldout).empty());
    // Ten equal systems: 8/1/1.
    const auto ten = make_clips(std::vector<int>(10, 5));
    const auto t = split(ten, {});
    EXPECT_EQ(t.train.size(), 40u);
    EXPECT_EQ(t.val.size(), 5u);
    EXPECT_EQ(t.test.size(), 5u);
}

TEST(Split, ClipRandomCoversAllClips) {
    const auto clips = make_clips({50, 50});
    const auto s = split(clips, {{0.8, 0.1, 0.1}, 3, SplitMode::ClipRandom});
    EXPECT_EQ(s.train.size(), 80u);
    EXPECT_EQ(s.val.size(), 10u);
    EXPECT_EQ(s.test.size(), 10u);
    EXPECT_TRUE(verify_split(s, clips, SplitMode::ClipRandom).empty());
}

TEST(VerifySplit, DetectsOverlap) {
    const auto clips = make_clips({3, 3, 3});
    auto s = split(clips, {{0.8, 0.1, 0.1}, 1, SplitMode::ClipRandom});
    s.test.push_back(s.train.front());
    const auto v = verify_split(s, clips, SplitMode::ClipRandom);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, SplitViolation::Kind::Overlap);
    EXPECT_EQ(v[0].subject, s.train.front());
}

TEST(VerifySplit, DetectsMissingAndUnknown) {
    const auto clips = make_clips({2, 2, 2});
    Split s{{"s0_c0", "s0_c1", "s1_c0", "s1_c1", "s2_c0"}, {"ghost"}, {}};
    const auto v = verify_split(s, clips, SplitMode::ClipRandom);
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[0].kind, SplitViolation::Kind::Unknown);
    EXPECT_EQ(v[1].kind, SplitViolation::Kind::Missing);
    EXPECT_EQ(v[1].subject, "s2_c1");
}

TEST(VerifySplit, ClipRandomSplitLeaksSystemsUnderHoldout) {
    // Hand-built: s0 entirely in train, s1 split train/val, s2 split val/test.
    const auto clips = make_clips({2, 2, 2});
    const Split s{{"s0_c0", "s0_c1", "s1_c0"}, {"s1_c1", "s2_c0"}, {"s2_c1"}};
    EXPECT_TRUE(verify_split(s, clips, SplitMode::ClipRandom).empty());
    const auto v = verify_split(s, clips, SplitMode::SystemHoldout);
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[0].kind, SplitViolation::Kind::SystemLeak);
    EXPECT_EQ(v[0].subject, "s1");
    EXPECT_EQ(v[1].subject, "s2");
    EXPECT_NE(v[1].message.find("val, test"), std::string::npos);
}

TEST(Split, HoldoutPropertiesOverRandomSystemSizes) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> n_sys(3, 40), size(1, 120);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<int> sizes(n_sys(rng));
        for (auto& s : sizes) s = size(rng);
        const auto clips = make_clips(sizes);
        const auto s = split(clips, {{0.8, 0.1, 0.1}, rng(), SplitMode::SystemHoldout});
        ASSERT_TRUE(verify_split(s, clips, SplitMode::SystemHoldout).empty());
        ASSERT_EQ(s.train.size() + s.val.size() + s.test.size(), clips.size());
        const double total = static_cast<double>(clips.size());
        const double share = *std::max_element(sizes.begin(), sizes.end()) / total;
        for (int b = 0; b < 3; ++b) {
            const auto& part = b == 0 ? s.train : (b == 1 ? s.val : s.test);
            const double target = b == 0 ? 0.8 : 0.1;
            ASSERT_LE(std::abs(part.size() / total - target), share + 1e-12) << "trial " << trial << " bucket " << b;
        }
    }
}

TEST(SplitPersistence, JsonRoundTrip) {
    const auto clips = make_clips({4, 5, 6, 7});
    const SplitSpec spec{{0.7, 0.2, 0.1}, 77, SplitMode::SystemHoldout};
    const auto s = split(clips, spec);
    const auto loaded = split_from_json(nlohmann::json::parse(split_to_json(s, spec).dump()));
    EXPECT_EQ(loaded.split, s);
    EXPECT_EQ(loaded.spec.seed, 77u);
    EXPECT_EQ(loaded.spec.ratios, spec.ratios);
    EXPECT_EQ(loaded.spec.mode, SplitMode::SystemHoldout);
    EXPECT_TRUE(verify_split(loaded.split, clips, loaded.spec.mode).empty());
    EXPECT_THROW(split_from_json(nlohmann::json::parse(R"({"train":[]})")), ValidationError);
}

TEST(ClipsFromRatings, FirstAppearanceOrderAndConsistency) {
    std::vector<RatingRecord> r(3);
    r[0].clip_id = "b";
    r[0].system_id = "s1";
    r[1].clip_id = "a";
    r[1].system_id = "s2";
    r[2].clip_id = "b";
    r[2].system_id = "s1";
    const auto clips = clips_from_ratings(r);
    ASSERT_EQ(clips.size(), 2u);
    EXPECT_EQ(clips[0].clip_id, "b");
    r[2].system_id = "s9";
    EXPECT_THROW(clips_from_ratings(r), ValidationError);
}
