#include <gtest/gtest.h>

#include <cmath>

#include "splitgate/presets.hpp"
#include "splitgate/synthbench.hpp"
#include "support.hpp"

using namespace splitgate;
namespace fx = splitgate::fixtures;

namespace {

double mean_abs_diff(const GrayImage& a, const GrayImage& b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        s += std::abs(static_cast<int>(a.pixels[i]) - static_cast<int>(b.pixels[i]));
    return s / static_cast<double>(a.pixels.size());
}

SynthParams small_params(std::uint64_t seed)
{
    SynthParams p;
    p.volumes_per_class = 6;
    p.slices_per_volume = 8;
    p.width = 32;
    p.height = 32;
    p.seed = seed;
    return p;
}

// Exhaustive scan with floating distances and an explicit (distance, id) order.
std::vector<int> knn_oracle(const std::vector<LabeledFeatures>& train, const std::vector<std::vector<int>>& test,
                            std::size_t k, std::size_t classes)
{
    std::vector<int> out;
    for (const auto& q : test) {
        std::vector<std::tuple<double, std::string, int>> all;
        for (const auto& t : train) {
            double d = 0;
            for (std::size_t j = 0; j < q.size(); ++j)
                d += std::pow(static_cast<double>(t.features[j] - q[j]), 2);
            all.emplace_back(std::sqrt(d), t.id, t.label);
        }
        std::sort(all.begin(), all.end());
        std::vector<int> votes(classes, 0);
        for (std::size_t i = 0; i < k; ++i)
            ++votes[std::get<2>(all[i])];
        int best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (votes[c] > votes[best])
                best = static_cast<int>(c);
        out.push_back(best);
    }
    return out;
}

} // namespace

TEST(Synth, DeterministicCorpus)
{
    fx::TempDir a, b;
    const auto ca = generate_synth(small_params(3), a.path());
    const auto cb = generate_synth(small_params(3), b.path());
    ASSERT_EQ(ca.manifest.size(), 2u * 6 * 8);
    for (std::size_t i = 0; i < ca.manifest.size(); ++i) {
        EXPECT_EQ(ca.manifest.records[i].id, cb.manifest.records[i].id);
        EXPECT_EQ(sha256_file(ca.manifest.records[i].path), sha256_file(cb.manifest.records[i].path));
        EXPECT_EQ(*ca.manifest.records[i].content_hash, sha256_file(ca.manifest.records[i].path));
    }
    const auto ma = read_manifest(a / "manifest.jsonl");
    EXPECT_EQ(ma.records.front().id, "c0-v000-000.pgm");
    EXPECT_EQ(ma.records.front().subject, "v000");
    EXPECT_EQ(ma.records.back().id, "c1-v011-007.pgm");
    EXPECT_NE(synthesize(small_params(4)).images[0].pixels, ca.images[0].pixels);
}

TEST(Synth, FilenamesParseWithVolumePattern)
{
    const auto c = synthesize(small_params(1));
    const NamePattern p("{class}-{volume}-{slice}");
    for (const auto& r : c.manifest.records) {
        const auto f = parse_filename(r.id.substr(0, r.id.size() - 4), p);
        EXPECT_EQ(f.class_label, r.class_label);
        EXPECT_EQ(f.volume, r.volume);
        EXPECT_EQ(f.slice_index, r.slice_index);
    }
}

TEST(Synth, ConsecutiveSlicesCloserThanOtherVolumes)
{
    SynthParams p;
    p.seed = 2;
    const auto c = synthesize(p);
    Xoshiro256 rng(1);
    const std::size_t per_volume = p.slices_per_volume;
    double consecutive = 0, across = 0;
    const int samples = 300;
    for (int i = 0; i < samples; ++i) {
        const std::size_t cls = rng.bounded(p.k_classes);
        const std::size_t v = rng.bounded(p.volumes_per_class);
        const std::size_t s = rng.bounded(per_volume - 1);
        const std::size_t base = (cls * p.volumes_per_class + v) * per_volume;
        consecutive += mean_abs_diff(c.images[base + s], c.images[base + s + 1]);
        const std::size_t w = (v + 1 + rng.bounded(p.volumes_per_class - 1)) % p.volumes_per_class;
        const std::size_t other = (cls * p.volumes_per_class + w) * per_volume + rng.bounded(per_volume);
        across += mean_abs_diff(c.images[base + s], c.images[other]);
    }
    EXPECT_LT(consecutive / samples, across / samples);
}

TEST(Synth, NoClassSignalMakesClassesIndistinguishable)
{
    auto ratio = [](double class_signal) {
        SynthParams p;
        p.class_signal = class_signal;
        p.slices_per_volume = 10;
        p.seed = 5;
        const auto c = synthesize(p);
        Xoshiro256 rng(2);
        const std::size_t per_class = p.volumes_per_class * p.slices_per_volume;
        double inter = 0, intra = 0;
        const int samples = 2000;
        for (int i = 0; i < samples; ++i) {
            const std::size_t a = rng.bounded(per_class);
            std::size_t b = rng.bounded(per_class);
            while (b / p.slices_per_volume == a / p.slices_per_volume)
                b = rng.bounded(per_class);
            intra += mean_abs_diff(c.images[a], c.images[b]);
            inter += mean_abs_diff(c.images[a], c.images[per_class + rng.bounded(per_class)]);
        }
        return inter / intra;
    };
    EXPECT_NEAR(ratio(0.0), 1.0, 0.05);
    EXPECT_GT(ratio(30.0), 1.05);
}

TEST(Synth, InvalidParams)
{
    SynthParams p;
    p.k_classes = 1;
    EXPECT_THROW(synthesize(p), Error);
    p = SynthParams{};
    p.volume_signal = -1;
    EXPECT_THROW(synthesize(p), Error);
}

TEST(Knn, IdenticalImageWithOneNeighbor)
{
    const auto c = synthesize(small_params(7));
    std::vector<LabeledFeatures> train;
    for (std::size_t i = 0; i < c.images.size(); i += 5)
        train.push_back({c.manifest.records[i].id, c.manifest.records[i].class_label == "c1" ? 1 : 0,
                         knn_features(c.images[i])});
    const std::vector<std::vector<int>> test{train[3].features};
    const auto pred = knn_predict(train, test, 1, 2);
    EXPECT_EQ(pred[0].label, train[3].label);
    EXPECT_EQ(pred[0].scores[static_cast<std::size_t>(train[3].label)], 1.0);
}

TEST(Knn, VoteTieGoesToSmallerClass)
{
    const std::vector<LabeledFeatures> train{{"a", 1, {0, 0}}, {"b", 0, {1, 0}}, {"c", 1, {9, 9}}};
    const std::vector<std::vector<int>> test{{0, 0}};
    const auto pred = knn_predict(train, test, 2, 2);
    EXPECT_EQ(pred[0].label, 0);
    EXPECT_EQ(pred[0].scores, (std::vector<double>{0.5, 0.5}));
}

TEST(Knn, DistanceTieGoesToSmallerId)
{
    const std::vector<LabeledFeatures> train{{"z", 1, {1, 0}}, {"a", 0, {-1, 0}}};
    const std::vector<std::vector<int>> test{{0, 0}};
    EXPECT_EQ(knn_predict(train, test, 1, 2)[0].label, 0);
}

TEST(Knn, MatchesExhaustiveOracle)
{
    Xoshiro256 rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<LabeledFeatures> train;
        for (int i = 0; i < 10; ++i)
            train.push_back({"p" + std::to_string(i), static_cast<int>(rng.bounded(3)),
                             {static_cast<int>(rng.bounded(5)), static_cast<int>(rng.bounded(5))}});
        std::vector<std::vector<int>> test;
        for (int i = 0; i < 10; ++i)
            test.push_back({static_cast<int>(rng.bounded(5)), static_cast<int>(rng.bounded(5))});
        const std::size_t k = 1 + rng.bounded(5);
        const auto got = knn_predict(train, test, k, 3);
        const auto want = knn_oracle(train, test, k, 3);
        for (std::size_t i = 0; i < test.size(); ++i)
            ASSERT_EQ(got[i].label, want[i]);
    }
}

TEST(Knn, Errors)
{
    const std::vector<LabeledFeatures> train{{"a", 0, {0}}};
    const std::vector<std::vector<int>> test{{0}};
    EXPECT_THROW(knn_predict({}, test, 1, 2), Error);
    EXPECT_THROW(knn_predict(train, test, 2, 2), Error);
    EXPECT_THROW(knn_predict(train, test, 0, 2), Error);
}

TEST(Experiment, DefaultPresetShowsInflation)
{
    SynthParams p;
    p.seed = 1;
    const auto rep = run_inflation_experiment(p, 5, 3, 5, 1);
    ASSERT_EQ(rep.per_image.size(), 15u);
    ASSERT_EQ(rep.per_group.size(), 15u);
    EXPECT_GE(rep.mean_gap, 0.1);
    EXPECT_EQ(rep.max_group_overlap, 0.0);
    EXPECT_NEAR(rep.mean_gap, mean_of(rep.mcc_per_image()) - mean_of(rep.mcc_per_group()), 1e-15);
    for (double m : rep.mcc_per_image()) {
        EXPECT_GE(m, -1.0);
        EXPECT_LE(m, 1.0);
    }
}

TEST(Experiment, NoVolumeCorrelationNoGap)
{
    SynthParams p;
    p.volume_signal = 0;
    p.slice_drift = 0;
    p.seed = 2;
    const auto rep = run_inflation_experiment(p, 5, 3, 5, 2);
    EXPECT_LT(std::fabs(rep.mean_gap), 0.05);
}

TEST(Experiment, DeterministicAndErrors)
{
    SynthParams p = small_params(9);
    const auto a = run_inflation_experiment(p, 3, 2, 3, 4);
    const auto b = run_inflation_experiment(p, 3, 2, 3, 4);
    EXPECT_EQ(to_json_string(to_json(a)), to_json_string(to_json(b)));
    p.volumes_per_class = 1;
    try {
        run_inflation_experiment(p, 5, 1, 5, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "TooFewGroups");
    }
}

TEST(Experiment, GapGrowsWithVolumeSignal)
{
    double previous = -1.0;
    for (double vs : {30.0, 50.0, 70.0}) {
        SynthParams p;
        p.volume_signal = vs;
        p.seed = 3;
        const double gap = run_inflation_experiment(p, 5, 3, 5, 3).mean_gap;
        EXPECT_GE(gap, previous) << "volume_signal=" << vs;
        previous = gap;
    }
}

TEST(Presets, ShapesAndLookup)
{
    EXPECT_EQ(find_preset("kermany-like")->k_classes, 4u);
    EXPECT_EQ(find_preset("kermany-like")->test_per_class, 1000u);
    EXPECT_EQ(find_preset("srinivasan-like")->k_classes, 3u);
    EXPECT_EQ(find_preset("srinivasan-like")->test_per_class, 250u);
    EXPECT_EQ(find_preset("aiims-like")->k_classes, 2u);
    EXPECT_FALSE(find_preset("unknown"));
    EXPECT_EQ(synth_params_for(*find_preset("kermany-like")).k_classes, 4u);
}

TEST(RandomLabelProbe, DeterministicAndBounded)
{
    const auto c = synthesize(small_params(11));
    std::vector<std::vector<int>> features;
    for (const auto& img : c.images)
        features.push_back(knn_features(img));
    SplitConfig cfg;
    cfg.strategy = Strategy::per_image;
    cfg.test_per_class = 10;
    cfg.seed = 1;
    const auto plan = make_split(c.manifest, cfg);
    for (auto mode : {ProbeMode::randomize_train_only, ProbeMode::randomize_before_split}) {
        const double a = random_label_mcc(c.manifest, features, plan.train_ids, plan.test_ids, mode, 5, 3);
        const double b = random_label_mcc(c.manifest, features, plan.train_ids, plan.test_ids, mode, 5, 3);
        EXPECT_EQ(a, b);
        EXPECT_GE(a, -1.0);
        EXPECT_LE(a, 1.0);
    }
    const std::vector<std::string> unknown{"nope"};
    EXPECT_THROW(random_label_mcc(c.manifest, features, plan.train_ids, unknown, ProbeMode::randomize_train_only, 5, 3),
                 Error);
}
