#ifndef SPLITGATE_METRICS_HPP
#define SPLITGATE_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "splitgate/error.hpp"
#include "splitgate/json_io.hpp"

namespace splitgate {

/// K x K counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t k = 0) : k_(k), counts_(k * k, 0) {}

    static ConfusionMatrix from_counts(std::size_t k, std::vector<std::uint64_t> counts)
    {
        if (counts.size() != k * k)
            throw Error("LengthMismatch", "counts must hold k*k entries");
        ConfusionMatrix cm(k);
        cm.counts_ = std::move(counts);
        return cm;
    }

    std::size_t k() const noexcept { return k_; }
    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * k_ + pred]; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    std::uint64_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

    std::uint64_t correct() const
    {
        std::uint64_t c = 0;
        for (std::size_t i = 0; i < k_; ++i)
            c += at(i, i);
        return c;
    }

    std::vector<std::uint64_t> true_totals() const
    {
        std::vector<std::uint64_t> t(k_, 0);
        for (std::size_t i = 0; i < k_; ++i)
            for (std::size_t j = 0; j < k_; ++j)
                t[i] += at(i, j);
        return t;
    }

    std::vector<std::uint64_t> predicted_totals() const
    {
        std::vector<std::uint64_t> p(k_, 0);
        for (std::size_t i = 0; i < k_; ++i)
            for (std::size_t j = 0; j < k_; ++j)
                p[j] += at(i, j);
        return p;
    }

    ConfusionMatrix transposed() const
    {
        ConfusionMatrix t(k_);
        for (std::size_t i = 0; i < k_; ++i)
            for (std::size_t j = 0; j < k_; ++j)
                t.at(j, i) = at(i, j);
        return t;
    }

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> pred, std::size_t k)
{
    if (truth.size() != pred.size())
        throw Error("LengthMismatch", "truth and prediction lengths differ",
                    {{"truth", std::to_string(truth.size())}, {"pred", std::to_string(pred.size())}});
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        const int p = pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= k || static_cast<std::size_t>(p) >= k)
            throw Error("LabelOutOfRange", "label outside 0..k-1",
                        {{"index", std::to_string(i)}, {"truth", std::to_string(t)}, {"pred", std::to_string(p)},
                         {"k", std::to_string(k)}});
        ++cm.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return cm;
}

/// Multiclass (R_K) Matthews correlation:
///   (c*n - sum_k t_k p_k) / sqrt((n^2 - sum_k p_k^2) (n^2 - sum_k t_k^2))
/// with c the trace, n the total, t/p the true/predicted class totals.
/// Zero when either factor of the denominator vanishes.
inline double mcc_multiclass(const ConfusionMatrix& cm)
{
    const std::uint64_t n = cm.total();
    if (n == 0)
        throw Error("EmptyMatrix", "confusion matrix has no samples");
    const auto t = cm.true_totals();
    const auto p = cm.predicted_totals();
    const double nn = static_cast<double>(n);
    double tp = 0, pp = 0, tt = 0;
    for (std::size_t i = 0; i < cm.k(); ++i) {
        tp += static_cast<double>(t[i]) * static_cast<double>(p[i]);
        pp += static_cast<double>(p[i]) * static_cast<double>(p[i]);
        tt += static_cast<double>(t[i]) * static_cast<double>(t[i]);
    }
    const double cov = static_cast<double>(cm.correct()) * nn - tp;
    const double var_p = nn * nn - pp;
    const double var_t = nn * nn - tt;
    if (var_p <= 0.0 || var_t <= 0.0)
        return 0.0;
    return std::clamp(cov / std::sqrt(var_p * var_t), -1.0, 1.0);
}

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double accuracy = 0;
    std::uint64_t support = 0;
};

/// Accuracy appears twice: overall_accuracy = trace / n, and
/// average_accuracy = mean over classes of (TP + TN) / n (one-vs-rest).
struct MetricReport {
    double mcc = 0;
    double overall_accuracy = 0;
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f1 = 0;
    double average_accuracy = 0;
    std::optional<std::vector<std::optional<double>>> auc_per_class;
    std::optional<double> macro_auc;
};

namespace detail {

inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

} // namespace detail

/// Per-class one-vs-rest metrics; 0/0 is defined as 0. Macros are
/// unweighted class means.
inline MetricReport classwise_metrics(const ConfusionMatrix& cm)
{
    const std::uint64_t n = cm.total();
    if (n == 0)
        throw Error("EmptyMatrix", "confusion matrix has no samples");
    const auto t = cm.true_totals();
    const auto p = cm.predicted_totals();
    const double nn = static_cast<double>(n);

    MetricReport rep;
    rep.mcc = mcc_multiclass(cm);
    rep.overall_accuracy = static_cast<double>(cm.correct()) / nn;
    for (std::size_t i = 0; i < cm.k(); ++i) {
        const double tp = static_cast<double>(cm.at(i, i));
        const double fp = static_cast<double>(p[i]) - tp;
        const double fn = static_cast<double>(t[i]) - tp;
        const double tn = nn - tp - fp - fn;
        ClassMetrics c;
        c.precision = detail::ratio(tp, tp + fp);
        c.recall = detail::ratio(tp, tp + fn);
        c.f1 = detail::ratio(2 * c.precision * c.recall, c.precision + c.recall);
        c.accuracy = (tp + tn) / nn;
        c.support = t[i];
        rep.per_class.push_back(c);
    }
    const double k = static_cast<double>(cm.k());
    for (const auto& c : rep.per_class) {
        rep.macro_precision += c.precision / k;
        rep.macro_recall += c.recall / k;
        rep.macro_f1 += c.f1 / k;
        rep.average_accuracy += c.accuracy / k;
    }
    return rep;
}

struct AucResult {
    std::vector<std::optional<double>> per_class; // absent: no positives or no negatives
    std::optional<double> macro;                  // mean over present classes
};

/// Average ranks (1-based) with ties sharing the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        while (j < order.size() && values[order[j]] == values[order[i]])
            ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t m = i; m < j; ++m)
            ranks[order[m]] = r;
        i = j;
    }
    return ranks;
}

/// One-vs-rest AUC per class from the Mann-Whitney rank statistic:
///   AUC_i = (R_pos - n_pos (n_pos + 1) / 2) / (n_pos n_neg)
/// where R_pos sums the average ranks of the positives' class-i scores.
/// `scores` is row-major, truth.size() rows of k scores.
inline AucResult roc_auc_ovr(std::span<const int> truth, std::span<const double> scores, std::size_t k)
{
    if (scores.size() != truth.size() * k)
        throw Error("LengthMismatch", "scores must hold k values per sample",
                    {{"samples", std::to_string(truth.size())}, {"scores", std::to_string(scores.size())}});
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (!std::isfinite(scores[i]))
            throw Error("NonFiniteScore", "score is not finite", {{"sample", std::to_string(i / k)}});
    for (int t : truth)
        if (t < 0 || static_cast<std::size_t>(t) >= k)
            throw Error("LabelOutOfRange", "label outside 0..k-1", {{"label", std::to_string(t)}});

    AucResult out;
    double sum = 0;
    std::size_t present = 0;
    std::vector<double> column(truth.size());
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < truth.size(); ++i)
            column[i] = scores[i * k + c];
        std::size_t n_pos = 0;
        double rank_sum = 0;
        const auto ranks = average_ranks(column);
        for (std::size_t i = 0; i < truth.size(); ++i)
            if (static_cast<std::size_t>(truth[i]) == c) {
                ++n_pos;
                rank_sum += ranks[i];
            }
        const std::size_t n_neg = truth.size() - n_pos;
        if (n_pos == 0 || n_neg == 0) {
            out.per_class.push_back(std::nullopt);
            continue;
        }
        const double np = static_cast<double>(n_pos);
        const double auc = (rank_sum - np * (np + 1) / 2) / (np * static_cast<double>(n_neg));
        out.per_class.push_back(auc);
        sum += auc;
        ++present;
    }
    if (present > 0)
        out.macro = sum / static_cast<double>(present);
    return out;
}

/// Full report: confusion-matrix metrics plus AUC when scores are given.
inline MetricReport evaluate(std::span<const int> truth, std::span<const int> pred, std::size_t k,
                             std::optional<std::span<const double>> scores = std::nullopt)
{
    MetricReport rep = classwise_metrics(confusion_matrix(truth, pred, k));
    if (scores) {
        auto auc = roc_auc_ovr(truth, *scores, k);
        rep.auc_per_class = std::move(auc.per_class);
        rep.macro_auc = auc.macro;
    }
    return rep;
}

inline Json to_json(const ConfusionMatrix& cm)
{
    Json rows = Json::array();
    for (std::size_t i = 0; i < cm.k(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < cm.k(); ++j)
            row.push_back(cm.at(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Json to_json(const MetricReport& r, const std::vector<std::string>& class_names = {})
{
    Json per = Json::array();
    for (std::size_t i = 0; i < r.per_class.size(); ++i) {
        const auto& c = r.per_class[i];
        Json e;
        e["class"] = i < class_names.size() ? Json(class_names[i]) : Json(i);
        e["support"] = c.support;
        e["precision"] = c.precision;
        e["recall"] = c.recall;
        e["f1"] = c.f1;
        e["accuracy"] = c.accuracy;
        if (r.auc_per_class) {
            const auto& a = (*r.auc_per_class)[i];
            e["auc"] = a ? Json(*a) : Json(nullptr);
        }
        per.push_back(std::move(e));
    }
    Json j;
    j["mcc"] = r.mcc;
    j["overall_accuracy"] = r.overall_accuracy;
    j["average_accuracy"] = r.average_accuracy;
    j["macro_precision"] = r.macro_precision;
    j["macro_recall"] = r.macro_recall;
    j["macro_f1"] = r.macro_f1;
    if (r.auc_per_class)
        j["macro_auc"] = r.macro_auc ? Json(*r.macro_auc) : Json(nullptr);
    j["per_class"] = std::move(per);
    return j;
}

// ---------------------------------------------------------------------------
// Predictions file: image_id,true_label,pred_label[,score_0..score_{k-1}]

struct Predictions {
    std::vector<std::string> ids;
    std::vector<int> truth;
    std::vector<int> pred;
    std::vector<double> scores; // row-major, empty when the file has no score columns
    std::size_t score_columns = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    for (auto& c : out) {
        while (!c.empty() && (c.back() == '\r' || c.back() == ' '))
            c.pop_back();
        while (!c.empty() && c.front() == ' ')
            c.erase(c.begin());
    }
    return out;
}

} // namespace detail

inline Predictions read_predictions(std::istream& in)
{
    auto malformed = [](std::size_t line, const std::string& why) {
        return Error("MalformedCsv", why, {{"line", std::to_string(line)}});
    };
    std::string line;
    if (!std::getline(in, line))
        throw malformed(1, "missing header");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 3 || header[0] != "image_id" || header[1] != "true_label" || header[2] != "pred_label")
        throw malformed(1, "header must start with image_id,true_label,pred_label");
    Predictions p;
    p.score_columns = header.size() - 3;
    for (std::size_t c = 0; c < p.score_columns; ++c)
        if (header[3 + c] != "score_" + std::to_string(c))
            throw malformed(1, "score columns must be score_0..score_{k-1}");

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw malformed(line_no, "column count differs from header");
        try {
            std::size_t used = 0;
            const int t = std::stoi(cells[1], &used);
            if (used != cells[1].size())
                throw std::invalid_argument("label");
            const int pr = std::stoi(cells[2], &used);
            if (used != cells[2].size())
                throw std::invalid_argument("label");
            p.ids.push_back(cells[0]);
            p.truth.push_back(t);
            p.pred.push_back(pr);
            for (std::size_t c = 0; c < p.score_columns; ++c) {
                const double s = std::stod(cells[3 + c], &used);
                if (used != cells[3 + c].size())
                    throw std::invalid_argument("score");
                p.scores.push_back(s);
            }
        } catch (const std::logic_error&) {
            throw malformed(line_no, "labels must be integers and scores numbers");
        }
    }
    return p;
}

inline std::string write_predictions(const Predictions& p)
{
    std::ostringstream os;
    os << "image_id,true_label,pred_label";
    for (std::size_t c = 0; c < p.score_columns; ++c)
        os << ",score_" << c;
    os << '\n';
    for (std::size_t i = 0; i < p.ids.size(); ++i) {
        os << p.ids[i] << ',' << p.truth[i] << ',' << p.pred[i];
        for (std::size_t c = 0; c < p.score_columns; ++c)
            os << ',' << detail::format_real(p.scores[i * p.score_columns + c]);
        os << '\n';
    }
    return os.str();
}

/// Class-name sidecar: either ["CNV", "DME", ...] or {"CNV": 0, "DME": 1}.
/// Returns names indexed by class id.
inline std::vector<std::string> class_names_from_json(const Json& j)
{
    std::vector<std::string> names;
    if (j.is_array()) {
        names = j.get<std::vector<std::string>>();
    } else if (j.is_object()) {
        std::map<std::size_t, std::string> by_index;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!it.value().is_number_unsigned())
                throw Error("InvalidClassMap", "class indices must be non-negative integers", {{"class", it.key()}});
            if (!by_index.emplace(it.value().get<std::size_t>(), it.key()).second)
                throw Error("InvalidClassMap", "duplicate class index", {{"class", it.key()}});
        }
        for (const auto& [i, name] : by_index) {
            if (i != names.size())
                throw Error("InvalidClassMap", "class indices must be contiguous from 0");
            names.push_back(name);
        }
    } else {
        throw Error("InvalidClassMap", "class map must be an array or an object");
    }
    return names;
}

} // namespace splitgate

#endif // SPLITGATE_METRICS_HPP
