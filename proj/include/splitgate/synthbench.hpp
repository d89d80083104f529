#ifndef SPLITGATE_SYNTHBENCH_HPP
#define SPLITGATE_SYNTHBENCH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitgate/dhash.hpp"
#include "splitgate/digest.hpp"
#include "splitgate/error.hpp"
#include "splitgate/image.hpp"
#include "splitgate/ingest.hpp"
#include "splitgate/json_io.hpp"
#include "splitgate/leakstats.hpp"
#include "splitgate/metrics.hpp"
#include "splitgate/parallel.hpp"
#include "splitgate/rng.hpp"
#include "splitgate/splitter.hpp"

namespace splitgate {

/// Synthetic sliced-volume dataset. Slice s of volume v in class c is
///   clamp(128 + class_signal * B_c + volume_signal * G_v + slice_noise * eta_s)
/// with the class and volume fields shifted down by round(slice_drift * s).
struct SynthParams {
    std::size_t k_classes = 2;
    std::size_t volumes_per_class = 10;
    std::size_t slices_per_volume = 50;
    int width = 64;
    int height = 64;
    double class_signal = 30.0;
    double volume_signal = 50.0;
    double slice_noise = 10.0;
    double slice_drift = 0.5;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (k_classes < 2)
            throw Error("InvalidArgument", "k_classes must be at least 2");
        if (volumes_per_class < 1 || slices_per_volume < 1)
            throw Error("InvalidArgument", "need at least one volume per class and one slice per volume");
        if (width < 16 || height < 16)
            throw Error("InvalidArgument", "synthetic images must be at least 16x16");
        if (class_signal < 0 || volume_signal < 0 || slice_noise < 0 || slice_drift < 0)
            throw Error("InvalidArgument", "amplitudes must be non-negative");
    }
};

struct SynthCorpus {
    Manifest manifest;
    std::vector<GrayImage> images; // aligned with manifest.records
};

namespace detail {

inline std::string zero_pad(std::size_t v, std::size_t width)
{
    std::string s = std::to_string(v);
    return s.size() >= width ? s : std::string(width - s.size(), '0') + s;
}

inline std::size_t digits(std::size_t n)
{
    std::size_t d = 1;
    while (n >= 10) {
        n /= 10;
        ++d;
    }
    return d;
}

// Class grating: frequency 2 + c cycles per image width, orientation pi * c / K.
inline double class_pattern(std::size_t c, std::size_t k_classes, int width, double x, double y)
{
    const double theta = std::numbers::pi * static_cast<double>(c) / static_cast<double>(k_classes);
    const double freq = 2.0 + static_cast<double>(c);
    return std::sin(2.0 * std::numbers::pi * freq * (x * std::cos(theta) + y * std::sin(theta)) / width);
}

// Integer noise in [-128, 127], box-blurred with radius 4 on a torus, then
// scaled to zero mean and unit standard deviation.
inline std::vector<double> volume_field(int w, int h, std::uint64_t seed)
{
    Xoshiro256 rng(seed);
    std::vector<int> noise(static_cast<std::size_t>(w) * h);
    for (auto& v : noise)
        v = static_cast<int>(rng.bounded(256)) - 128;
    constexpr int radius = 4;
    std::vector<double> field(noise.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            long sum = 0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int yy = ((y + dy) % h + h) % h;
                    const int xx = ((x + dx) % w + w) % w;
                    sum += noise[static_cast<std::size_t>(yy) * w + xx];
                }
            field[static_cast<std::size_t>(y) * w + x] = static_cast<double>(sum);
        }
    double mean = 0;
    for (double v : field)
        mean += v;
    mean /= static_cast<double>(field.size());
    double var = 0;
    for (double v : field)
        var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(field.size()));
    for (auto& v : field)
        v = sd > 0 ? (v - mean) / sd : 0.0;
    return field;
}

} // namespace detail

inline std::string synth_class_name(std::size_t c) { return "c" + std::to_string(c); }

/// Builds the corpus in memory. Records are named {class}-{volume}-{slice}
/// (e.g. "c1-v013-007.pgm"), subject = volume, sorted by id.
inline SynthCorpus synthesize(const SynthParams& p)
{
    p.validate();
    const std::size_t n_volumes = p.k_classes * p.volumes_per_class;
    const std::size_t vol_digits = std::max<std::size_t>(3, detail::digits(n_volumes - 1));
    const std::size_t slice_digits = std::max<std::size_t>(3, detail::digits(p.slices_per_volume - 1));
    const std::size_t total = n_volumes * p.slices_per_volume;

    std::vector<ImageRecord> records(total);
    std::vector<GrayImage> images(total);
    std::vector<std::vector<double>> fields(n_volumes);
    parallel_for(n_volumes, [&](std::size_t g) {
        fields[g] = detail::volume_field(p.width, p.height, derive_seed(p.seed, 1, g));
    });

    parallel_for(total, [&](std::size_t idx) {
        const std::size_t g = idx / p.slices_per_volume;
        const std::size_t s = idx % p.slices_per_volume;
        const std::size_t c = g / p.volumes_per_class;
        const auto& field = fields[g];
        const int shift = static_cast<int>(std::floor(p.slice_drift * static_cast<double>(s) + 0.5));
        Xoshiro256 rng(derive_seed(p.seed, 2, g, s));
        GrayImage img(p.width, p.height);
        for (int y = 0; y < p.height; ++y) {
            const int src_y = ((y - shift) % p.height + p.height) % p.height;
            for (int x = 0; x < p.width; ++x) {
                const double eta = (static_cast<double>(rng.bounded(256)) - 128.0) / 128.0;
                const double value = 128.0
                    + p.class_signal * detail::class_pattern(c, p.k_classes, p.width, x, y - shift)
                    + p.volume_signal * field[static_cast<std::size_t>(src_y) * p.width + x]
                    + p.slice_noise * eta;
                img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(value + 0.5), 0.0, 255.0));
            }
        }
        ImageRecord r;
        const std::string volume = "v" + detail::zero_pad(g, vol_digits);
        r.class_label = synth_class_name(c);
        r.id = r.class_label + "-" + volume + "-" + detail::zero_pad(s, slice_digits) + ".pgm";
        r.path = r.id;
        r.subject = volume;
        r.volume = volume;
        r.slice_index = s;
        r.content_hash = sha256_hex(encode_pgm(img));
        r.dhash = compute_dhash(img);
        records[idx] = std::move(r);
        images[idx] = std::move(img);
    });

    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });
    SynthCorpus corpus;
    for (std::size_t i : order) {
        corpus.manifest.records.push_back(std::move(records[i]));
        corpus.images.push_back(std::move(images[i]));
    }
    return corpus;
}

/// Writes the corpus as PGM files plus manifest.jsonl into `out_dir`;
/// record paths point into out_dir.
inline SynthCorpus generate_synth(const SynthParams& p, const std::filesystem::path& out_dir)
{
    SynthCorpus corpus = synthesize(p);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw Error("IoFailure", "cannot create output directory", {{"path", out_dir.generic_string()}});
    for (std::size_t i = 0; i < corpus.images.size(); ++i) {
        auto& r = corpus.manifest.records[i];
        r.path = (out_dir / r.id).generic_string();
        write_pgm(r.path, corpus.images[i]);
    }
    write_manifest(out_dir / "manifest.jsonl", corpus.manifest);
    return corpus;
}

// ---------------------------------------------------------------------------
// Nearest-neighbor surrogate classifier

/// 16x16 block means of the image (256 values).
inline std::vector<int> knn_features(const GrayImage& img)
{
    if (img.width < 16 || img.height < 16)
        throw Error("ImageTooSmall", "features need at least 16x16 pixels");
    return block_average(img, 16, 16);
}

struct LabeledFeatures {
    std::string id;
    int label = 0;
    std::vector<int> features;
};

struct KnnPrediction {
    int label = 0;
    std::vector<double> scores; // neighbor fraction per class
};

/// Brute-force k-nearest-neighbor vote under Euclidean distance. Distance
/// ties go to the lexicographically smaller id; vote ties to the smaller
/// class index.
inline std::vector<KnnPrediction> knn_predict(std::span<const LabeledFeatures> train,
                                              std::span<const std::vector<int>> test, std::size_t knn_k,
                                              std::size_t n_classes)
{
    if (train.empty())
        throw Error("EmptyTrain", "nearest-neighbor training set is empty");
    if (knn_k < 1 || knn_k > train.size())
        throw Error("KTooLarge", "knn_k must lie in 1..train size",
                    {{"knn_k", std::to_string(knn_k)}, {"train", std::to_string(train.size())}});
    for (const auto& t : train)
        if (t.label < 0 || static_cast<std::size_t>(t.label) >= n_classes)
            throw Error("LabelOutOfRange", "training label outside 0..k-1", {{"id", t.id}});

    std::vector<KnnPrediction> out(test.size());
    parallel_for(test.size(), [&](std::size_t q) {
        const auto& query = test[q];
        std::vector<std::pair<std::int64_t, std::size_t>> dist(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            const auto& f = train[i].features;
            if (f.size() != query.size())
                throw Error("LengthMismatch", "feature vectors differ in length", {{"id", train[i].id}});
            std::int64_t d = 0;
            for (std::size_t j = 0; j < f.size(); ++j) {
                const std::int64_t diff = f[j] - query[j];
                d += diff * diff;
            }
            dist[i] = {d, i};
        }
        auto closer = [&](const auto& a, const auto& b) {
            if (a.first != b.first)
                return a.first < b.first;
            return train[a.second].id < train[b.second].id;
        };
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(knn_k), dist.end(), closer);
        std::vector<std::size_t> votes(n_classes, 0);
        for (std::size_t i = 0; i < knn_k; ++i)
            ++votes[static_cast<std::size_t>(train[dist[i].second].label)];
        KnnPrediction pred;
        pred.label = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
        pred.scores.resize(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c)
            pred.scores[c] = static_cast<double>(votes[c]) / static_cast<double>(knn_k);
        out[q] = std::move(pred);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Split-strategy inflation experiment

struct FoldResult {
    std::size_t repeat = 0;
    std::size_t fold = 0;
    std::size_t n_test = 0;
    double mcc = 0;
    double macro_auc = 0;
    double macro_f1 = 0;
    double overall_accuracy = 0;
    double average_accuracy = 0;
    double macro_precision = 0;
    double macro_recall = 0;
};

struct ExperimentReport {
    SynthParams params;
    std::size_t cv_k = 5;
    std::size_t repeats = 3;
    std::size_t knn_k = 5;
    std::uint64_t seed = 0;
    std::vector<FoldResult> per_image;
    std::vector<FoldResult> per_group;
    double mean_gap = 0;
    double max_group_overlap = 0; // largest audit fraction over grouped folds

    std::vector<double> mcc_per_image() const { return mccs(per_image); }
    std::vector<double> mcc_per_group() const { return mccs(per_group); }

private:
    static std::vector<double> mccs(const std::vector<FoldResult>& folds)
    {
        std::vector<double> out;
        for (const auto& f : folds)
            out.push_back(f.mcc);
        return out;
    }
};

/// Fold-level evaluation of one CV plan with the nearest-neighbor surrogate.
/// `on_fold` (optional) receives the predictions of every fold.
template <class OnFold>
std::vector<FoldResult> evaluate_cv_plan(const Manifest& m, const std::vector<std::vector<int>>& features,
                                         const CVPlan& plan, std::size_t knn_k, OnFold&& on_fold)
{
    const auto classes = m.classes();
    std::map<std::string, int> class_index;
    for (std::size_t i = 0; i < classes.size(); ++i)
        class_index[classes[i]] = static_cast<int>(i);
    const auto idx = m.index();

    std::vector<FoldResult> results;
    for (std::size_t r = 0; r < plan.repeats; ++r)
        for (std::size_t f = 0; f < plan.k; ++f) {
            std::vector<LabeledFeatures> train;
            std::vector<std::vector<int>> test;
            std::vector<int> truth;
            std::vector<std::string> test_ids;
            for (const auto& [id, fold] : plan.fold_of[r]) {
                const std::size_t i = idx.at(id);
                const int label = class_index.at(m.records[i].class_label);
                if (fold == f) {
                    test.push_back(features[i]);
                    truth.push_back(label);
                    test_ids.push_back(id);
                } else {
                    train.push_back({id, label, features[i]});
                }
            }
            const auto preds = knn_predict(train, test, knn_k, classes.size());
            std::vector<int> pred;
            std::vector<double> scores;
            for (const auto& p : preds) {
                pred.push_back(p.label);
                scores.insert(scores.end(), p.scores.begin(), p.scores.end());
            }
            const auto rep = evaluate(truth, pred, classes.size(), std::span<const double>(scores));
            FoldResult fr;
            fr.repeat = r;
            fr.fold = f;
            fr.n_test = test.size();
            fr.mcc = rep.mcc;
            fr.macro_auc = rep.macro_auc.value_or(0.0);
            fr.macro_f1 = rep.macro_f1;
            fr.overall_accuracy = rep.overall_accuracy;
            fr.average_accuracy = rep.average_accuracy;
            fr.macro_precision = rep.macro_precision;
            fr.macro_recall = rep.macro_recall;
            results.push_back(fr);
            on_fold(r, f, test_ids, truth, preds);
        }
    return results;
}

inline std::vector<FoldResult> evaluate_cv_plan(const Manifest& m, const std::vector<std::vector<int>>& features,
                                                const CVPlan& plan, std::size_t knn_k)
{
    return evaluate_cv_plan(m, features, plan, knn_k, [](auto&&...) {});
}

/// Generates one corpus (params.seed) and evaluates it twice with identical
/// fold seeds: stratified per-image folds and volume-grouped folds.
/// mean_gap = mean MCC(per-image) - mean MCC(per-group).
inline ExperimentReport run_inflation_experiment(const SynthParams& params, std::size_t cv_k, std::size_t repeats,
                                                 std::size_t knn_k, std::uint64_t seed)
{
    if (params.volumes_per_class < cv_k)
        throw Error("TooFewGroups", "grouped CV needs at least cv_k volumes per class",
                    {{"volumes_per_class", std::to_string(params.volumes_per_class)}, {"cv_k", std::to_string(cv_k)}});
    const SynthCorpus corpus = synthesize(params);
    const Manifest& m = corpus.manifest;
    std::vector<std::vector<int>> features(corpus.images.size());
    for (std::size_t i = 0; i < corpus.images.size(); ++i)
        features[i] = knn_features(corpus.images[i]);

    const CVPlan image_plan = make_cv_plan(m, cv_k, repeats, false, GroupKey::volume, seed);
    const CVPlan group_plan = make_cv_plan(m, cv_k, repeats, true, GroupKey::volume, seed);

    ExperimentReport rep;
    rep.params = params;
    rep.cv_k = cv_k;
    rep.repeats = repeats;
    rep.knn_k = knn_k;
    rep.seed = seed;
    for (std::size_t r = 0; r < repeats; ++r)
        for (std::size_t f = 0; f < cv_k; ++f) {
            const auto train = group_plan.train_ids(r, f);
            const auto test = group_plan.fold_ids(r, f);
            rep.max_group_overlap = std::max(rep.max_group_overlap, audit_overlap(train, test, m, GroupKey::volume).fraction);
        }
    rep.per_image = evaluate_cv_plan(m, features, image_plan, knn_k);
    rep.per_group = evaluate_cv_plan(m, features, group_plan, knn_k);
    rep.mean_gap = mean_of(rep.mcc_per_image()) - mean_of(rep.mcc_per_group());
    return rep;
}

// ---------------------------------------------------------------------------
// Random-label probe

/// FNV-1a 64-bit, used to key random labels by content.
inline std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Trains the surrogate on random labels and scores the test side against
/// its original labels. randomize_train_only draws train labels from one
/// seeded generator in sorted id order; randomize_before_split keys each
/// label on the record's content hash (id when absent), so byte-identical
/// images share a label wherever they land.
inline double random_label_mcc(const Manifest& m, const std::vector<std::vector<int>>& features,
                               std::span<const std::string> train_ids, std::span<const std::string> test_ids,
                               ProbeMode mode, std::uint64_t seed, std::size_t knn_k)
{
    const auto classes = m.classes();
    const std::size_t k = classes.size();
    if (k < 2)
        throw Error("BadDimensions", "random-label probe needs at least two classes");
    std::map<std::string, int> class_index;
    for (std::size_t i = 0; i < k; ++i)
        class_index[classes[i]] = static_cast<int>(i);
    const auto idx = m.index();
    auto lookup = [&](const std::string& id) {
        auto it = idx.find(id);
        if (it == idx.end())
            throw Error("UnknownId", "id not present in manifest", {{"id", id}});
        return it->second;
    };

    std::vector<std::string> sorted_train(train_ids.begin(), train_ids.end());
    std::sort(sorted_train.begin(), sorted_train.end());
    Xoshiro256 rng(derive_seed(seed, 0));
    std::vector<LabeledFeatures> train;
    for (const auto& id : sorted_train) {
        const std::size_t i = lookup(id);
        int label = 0;
        if (mode == ProbeMode::randomize_train_only) {
            label = static_cast<int>(rng.bounded(k));
        } else {
            const auto& r = m.records[i];
            label = static_cast<int>(derive_seed(seed, fnv1a64(r.content_hash.value_or(r.id))) % k);
        }
        train.push_back({id, label, features[i]});
    }
    std::vector<std::vector<int>> test;
    std::vector<int> truth;
    for (const auto& id : test_ids) {
        const std::size_t i = lookup(id);
        test.push_back(features[i]);
        truth.push_back(class_index.at(m.records[i].class_label));
    }
    if (test.empty())
        throw Error("EmptyTest", "test side is empty");
    const auto preds = knn_predict(train, test, knn_k, k);
    std::vector<int> pred;
    for (const auto& p : preds)
        pred.push_back(p.label);
    return mcc_multiclass(confusion_matrix(truth, pred, k));
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const SynthParams& p)
{
    return Json{{"k_classes", p.k_classes},
                {"volumes_per_class", p.volumes_per_class},
                {"slices_per_volume", p.slices_per_volume},
                {"width", p.width},
                {"height", p.height},
                {"class_signal", p.class_signal},
                {"volume_signal", p.volume_signal},
                {"slice_noise", p.slice_noise},
                {"slice_drift", p.slice_drift},
                {"seed", p.seed}};
}

inline Json to_json(const FoldResult& f)
{
    return Json{{"repeat", f.repeat},
                {"fold", f.fold},
                {"n_test", f.n_test},
                {"mcc", f.mcc},
                {"auc", f.macro_auc},
                {"f1", f.macro_f1},
                {"accuracy", f.overall_accuracy},
                {"average_accuracy", f.average_accuracy},
                {"precision", f.macro_precision},
                {"recall", f.macro_recall}};
}

inline Json to_json(const ExperimentReport& r)
{
    Json image = Json::array();
    for (const auto& f : r.per_image)
        image.push_back(to_json(f));
    Json group = Json::array();
    for (const auto& f : r.per_group)
        group.push_back(to_json(f));
    const auto mi = r.mcc_per_image();
    const auto mg = r.mcc_per_group();
    return Json{{"params", to_json(r.params)},
                {"cv", {{"k", r.cv_k}, {"repeats", r.repeats}}},
                {"knn_k", r.knn_k},
                {"seed", r.seed},
                {"mcc_per_image", mi},
                {"mcc_per_group", mg},
                {"mean_mcc_per_image", mean_of(mi)},
                {"mean_mcc_per_group", mean_of(mg)},
                {"mean_gap", r.mean_gap},
                {"max_group_overlap", r.max_group_overlap},
                {"folds_per_image", std::move(image)},
                {"folds_per_group", std::move(group)}};
}

} // namespace splitgate

#endif // SPLITGATE_SYNTHBENCH_HPP
