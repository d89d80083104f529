#ifndef SPLITGATE_LEAKSTATS_HPP
#define SPLITGATE_LEAKSTATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "splitgate/error.hpp"
#include "splitgate/json_io.hpp"
#include "splitgate/metrics.hpp"
#include "splitgate/parallel.hpp"
#include "splitgate/rng.hpp"

namespace splitgate {

/// MCC values of random (truth, prediction) label sets.
struct NullDistribution {
    std::vector<double> samples;
    std::size_t iters = 0;
    std::size_t n_test = 0;
    std::size_t k = 0;
    std::vector<std::uint64_t> class_counts; // truth labels per class, summed over iterations
    std::uint64_t seed = 0;
};

/// Iteration i draws n_test truth labels, then n_test predictions, all
/// uniform over k classes, from a generator seeded with derive_seed(seed, i).
inline NullDistribution sample_null_mcc(std::size_t n_test, std::size_t k, std::size_t iters, std::uint64_t seed)
{
    if (k < 2 || n_test < k || iters < 1)
        throw Error("BadDimensions", "need n_test >= k >= 2 and iters >= 1",
                    {{"n_test", std::to_string(n_test)}, {"k", std::to_string(k)}, {"iters", std::to_string(iters)}});
    NullDistribution out;
    out.iters = iters;
    out.n_test = n_test;
    out.k = k;
    out.seed = seed;
    out.samples.resize(iters);
    std::vector<std::vector<std::uint64_t>> truth_counts(iters);

    parallel_for(iters, [&](std::size_t it) {
        Xoshiro256 rng(derive_seed(seed, it));
        std::vector<std::uint32_t> t(n_test);
        for (auto& v : t)
            v = static_cast<std::uint32_t>(rng.bounded(k));
        ConfusionMatrix cm(k);
        for (std::size_t i = 0; i < n_test; ++i)
            ++cm.at(t[i], rng.bounded(k));
        out.samples[it] = mcc_multiclass(cm);
        truth_counts[it] = cm.true_totals();
    });
    out.class_counts.assign(k, 0);
    for (const auto& c : truth_counts)
        for (std::size_t i = 0; i < k; ++i)
            out.class_counts[i] += c[i];
    return out;
}

enum class WilcoxonMethod { automatic, exact, normal };

struct WilcoxonResult {
    double p = 1.0;
    double w_plus = 0.0;
    std::size_t n_used = 0; // nonzero differences
    bool exact = false;
    double z = 0.0; // normal approximation only
};

/// Smallest p-value reported; keeps p-values strictly positive when the
/// normal tail underflows.
inline constexpr double min_p_value = std::numeric_limits<double>::min();

/// One-sample Wilcoxon signed-rank test, two-tailed, of location m0.
/// Zero differences are dropped. |d| gets average ranks on ties. With
/// n <= 12 (automatic) the null law of W+ is computed exactly over all 2^n
/// sign assignments of the tied ranks; otherwise a continuity-corrected
/// normal approximation with tie-corrected variance is used.
inline WilcoxonResult wilcoxon_one_sample(std::span<const double> sample, double m0,
                                          WilcoxonMethod method = WilcoxonMethod::automatic)
{
    if (sample.empty())
        throw Error("EmptySample", "Wilcoxon test needs at least one value");

    std::vector<double> diffs;
    for (double x : sample) {
        const double d = x - m0;
        if (d != 0.0)
            diffs.push_back(d);
    }
    WilcoxonResult res;
    res.n_used = diffs.size();
    const std::size_t n = diffs.size();
    if (n == 0)
        return res;

    std::vector<double> mags(n);
    std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::fabs(d); });
    const auto ranks = average_ranks(mags);

    // doubled ranks are integers, so the exact law is computed without rounding
    std::vector<std::uint64_t> rank2(n);
    std::uint64_t w2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        rank2[i] = static_cast<std::uint64_t>(std::llround(ranks[i] * 2));
        if (diffs[i] > 0)
            w2 += rank2[i];
    }
    res.w_plus = static_cast<double>(w2) / 2.0;

    const bool exact = method == WilcoxonMethod::exact || (method == WilcoxonMethod::automatic && n <= 12);
    if (exact) {
        if (n > 62)
            throw Error("InvalidArgument", "exact Wilcoxon supports at most 62 nonzero differences");
        const std::uint64_t total2 = static_cast<std::uint64_t>(n) * (n + 1);
        std::vector<double> ways(total2 + 1, 0.0);
        ways[0] = 1.0;
        for (std::uint64_t r : rank2)
            for (std::uint64_t s = total2; s >= r; --s)
                ways[s] += ways[s - r];
        double lower = 0, upper = 0;
        for (std::uint64_t s = 0; s <= total2; ++s) {
            if (s <= w2)
                lower += ways[s];
            if (s >= w2)
                upper += ways[s];
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        res.exact = true;
        res.p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        return res;
    }

    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1) / 4;
    double tie_term = 0;
    {
        std::vector<double> sorted = mags;
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i + 1;
            while (j < n && sorted[j] == sorted[i])
                ++j;
            const double t = static_cast<double>(j - i);
            tie_term += t * t * t - t;
            i = j;
        }
    }
    const double var = nn * (nn + 1) * (2 * nn + 1) / 24 - tie_term / 48;
    if (var <= 0)
        return res;
    const double dev = res.w_plus - mean;
    const double corrected = std::max(0.0, std::fabs(dev) - 0.5);
    res.z = std::copysign(corrected / std::sqrt(var), dev);
    res.p = std::clamp(std::erfc(corrected / std::sqrt(var) / std::sqrt(2.0)), min_p_value, 1.0);
    return res;
}

enum class ProbeMode { randomize_before_split, randomize_train_only };

inline std::string_view to_string(ProbeMode m)
{
    return m == ProbeMode::randomize_before_split ? "randomize_before_split" : "randomize_train_only";
}

inline ProbeMode probe_mode_from_string(std::string_view s)
{
    if (s == "randomize_before_split" || s == "randomize-before-split" || s == "before-split")
        return ProbeMode::randomize_before_split;
    if (s == "randomize_train_only" || s == "randomize-train-only" || s == "train-only")
        return ProbeMode::randomize_train_only;
    throw Error("InvalidArgument", "unknown probe mode", {{"mode", std::string(s)}});
}

struct ProbeReport {
    double observed_mcc = 0;
    double wilcoxon_p = 1;
    double empirical_p = 1;
    double alpha = 0.05;
    bool flagged = false;
    ProbeMode mode = ProbeMode::randomize_train_only;
};

/// Two-sided Monte-Carlo p-value with the plus-one rule:
///   min(1, 2 * min(#{x <= obs} + 1, #{x >= obs} + 1) / (iters + 1)).
inline double empirical_p_value(std::span<const double> samples, double observed)
{
    std::size_t le = 0, ge = 0;
    for (double x : samples) {
        if (x <= observed)
            ++le;
        if (x >= observed)
            ++ge;
    }
    const double iters = static_cast<double>(samples.size());
    return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge) + 1) / (iters + 1));
}

/// Compares one observed MCC against the null: the null samples are the
/// Wilcoxon sample and the observed value is the hypothesized location.
inline ProbeReport leakage_probe(double observed_mcc, const NullDistribution& null, double alpha,
                                 ProbeMode mode = ProbeMode::randomize_train_only)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw Error("InvalidArgument", "alpha must lie in (0, 1)", {{"alpha", std::to_string(alpha)}});
    if (null.samples.empty())
        throw Error("EmptySample", "null distribution has no samples");
    ProbeReport rep;
    rep.observed_mcc = observed_mcc;
    rep.alpha = alpha;
    rep.mode = mode;
    rep.wilcoxon_p = wilcoxon_one_sample(null.samples, observed_mcc).p;
    rep.empirical_p = empirical_p_value(null.samples, observed_mcc);
    rep.flagged = std::min(rep.wilcoxon_p, rep.empirical_p) < alpha;
    return rep;
}

inline double median(std::vector<double> v)
{
    if (v.empty())
        throw Error("EmptySample", "median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : (v[h - 1] + v[h]) / 2;
}

/// Alternative reading of the probe: cross-validation fold MCCs tested
/// against the null median.
inline WilcoxonResult folds_vs_null(std::span<const double> fold_mccs, const NullDistribution& null)
{
    return wilcoxon_one_sample(fold_mccs, median(null.samples));
}

// ---------------------------------------------------------------------------
// JSON

inline double percentile_abs(std::span<const double> samples, double q)
{
    std::vector<double> a(samples.size());
    std::transform(samples.begin(), samples.end(), a.begin(), [](double x) { return std::fabs(x); });
    std::sort(a.begin(), a.end());
    if (a.empty())
        return 0;
    // nearest-rank
    const std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(a.size())));
    return a[std::clamp<std::size_t>(rank, 1, a.size()) - 1];
}

inline double mean_of(std::span<const double> v)
{
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline Json to_json(const NullDistribution& d, bool keep_samples)
{
    Json j;
    j["iters"] = d.iters;
    j["n_test"] = d.n_test;
    j["k"] = d.k;
    j["seed"] = d.seed;
    j["class_counts"] = d.class_counts;
    j["mean"] = mean_of(d.samples);
    j["median"] = median(d.samples);
    j["p99_abs"] = percentile_abs(d.samples, 0.99);
    j["min"] = *std::min_element(d.samples.begin(), d.samples.end());
    j["max"] = *std::max_element(d.samples.begin(), d.samples.end());
    if (keep_samples)
        j["samples"] = d.samples;
    return j;
}

inline NullDistribution null_from_json(const Json& doc)
{
    const Json& j = doc.contains("result") ? doc["result"] : doc;
    if (!j.contains("samples"))
        throw Error("InvalidNull", "null distribution document has no samples (use --keep-samples)");
    NullDistribution d;
    d.samples = j["samples"].get<std::vector<double>>();
    d.iters = d.samples.size();
    d.n_test = j.value("n_test", std::size_t{0});
    d.k = j.value("k", std::size_t{0});
    d.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("class_counts"))
        d.class_counts = j["class_counts"].get<std::vector<std::uint64_t>>();
    return d;
}

inline Json to_json(const ProbeReport& r)
{
    return Json{{"observed_mcc", r.observed_mcc},
                {"wilcoxon_p", r.wilcoxon_p},
                {"empirical_p", r.empirical_p},
                {"alpha", r.alpha},
                {"flagged", r.flagged},
                {"mode", std::string(to_string(r.mode))}};
}

} // namespace splitgate

#endif // SPLITGATE_LEAKSTATS_HPP
