#ifndef SPLITGATE_CLI_HPP
#define SPLITGATE_CLI_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "splitgate/error.hpp"
#include "splitgate/hashdup.hpp"
#include "splitgate/ingest.hpp"
#include "splitgate/json_io.hpp"
#include "splitgate/leakstats.hpp"
#include "splitgate/metrics.hpp"
#include "splitgate/parallel.hpp"
#include "splitgate/presets.hpp"
#include "splitgate/splitter.hpp"
#include "splitgate/synthbench.hpp"

#ifndef SPLITGATE_VERSION
#define SPLITGATE_VERSION "0.1.0"
#endif

namespace splitgate::cli {

inline constexpr const char* tool_name = "splitgate";
inline constexpr const char* tool_version = SPLITGATE_VERSION;

namespace detail {

inline std::string describe_value(const CLI::Option* opt)
{
    if (opt->count() == 0)
        return opt->get_default_str();
    const auto& res = opt->results();
    if (res.empty())
        return "true";
    std::string out;
    for (std::size_t i = 0; i < res.size(); ++i)
        out += (i ? "," : "") + res[i];
    return out;
}

// Every option of the subcommand with its effective value.
inline Json resolved_flags(const CLI::App* sub)
{
    Json flags = Json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        std::string name = opt->get_name(false, false);
        if (name == "--help" || name == "-h")
            continue;
        while (!name.empty() && name.front() == '-')
            name.erase(name.begin());
        if (opt->get_expected_min() == 0 && opt->count() == 0) {
            flags[name] = "false";
            continue;
        }
        const std::string value = describe_value(opt);
        flags[name] = value.empty() && opt->count() == 0 ? Json(nullptr) : Json(value);
    }
    return flags;
}

inline void emit(const Json& doc, const std::string& out_path, std::ostream& out)
{
    const std::string text = to_json_string(doc);
    if (out_path.empty() || out_path == "-")
        out << text;
    else
        write_text_file(out_path, text);
}

inline Json error_json(const Error& e)
{
    Json ctx = Json::object();
    for (const auto& [k, v] : e.context())
        ctx[k] = v;
    return Json{{"code", e.code()}, {"message", e.what()}, {"context", ctx}};
}

inline Json class_counts(const Manifest& m)
{
    std::map<std::string, std::size_t> counts;
    for (const auto& r : m.records)
        ++counts[r.class_label];
    Json j = Json::object();
    for (const auto& [c, n] : counts)
        j[c] = n;
    return j;
}

inline void apply_synth_overrides(const CLI::App* sub, SynthParams& p)
{
    auto given = [&](const char* name) { return sub->get_option(name)->count() > 0; };
    auto as_size = [&](const char* name) { return sub->get_option(name)->as<std::size_t>(); };
    auto as_double = [&](const char* name) { return sub->get_option(name)->as<double>(); };
    if (given("--k-classes"))
        p.k_classes = as_size("--k-classes");
    if (given("--volumes-per-class"))
        p.volumes_per_class = as_size("--volumes-per-class");
    if (given("--slices-per-volume"))
        p.slices_per_volume = as_size("--slices-per-volume");
    if (given("--width"))
        p.width = sub->get_option("--width")->as<int>();
    if (given("--height"))
        p.height = sub->get_option("--height")->as<int>();
    if (given("--class-signal"))
        p.class_signal = as_double("--class-signal");
    if (given("--volume-signal"))
        p.volume_signal = as_double("--volume-signal");
    if (given("--slice-noise"))
        p.slice_noise = as_double("--slice-noise");
    if (given("--slice-drift"))
        p.slice_drift = as_double("--slice-drift");
}

inline void add_synth_options(CLI::App* sub)
{
    sub->add_option("--k-classes", "number of classes (default from preset)");
    sub->add_option("--volumes-per-class", "volumes per class (default 10)");
    sub->add_option("--slices-per-volume", "slices per volume (default 50)");
    sub->add_option("--width", "image width in pixels (default 64)");
    sub->add_option("--height", "image height in pixels (default 64)");
    sub->add_option("--class-signal", "class grating amplitude (default 30)");
    sub->add_option("--volume-signal", "volume field amplitude (default 50)");
    sub->add_option("--slice-noise", "per-slice noise amplitude (default 10)");
    sub->add_option("--slice-drift", "vertical shift in pixels per slice (default 0.5)");
}

// Train/test sides: from a split plan when given, else the presplit field.
inline std::pair<std::vector<std::string>, std::vector<std::string>> sides_for(const Manifest& m,
                                                                               const std::string& plan_path)
{
    if (!plan_path.empty()) {
        const SplitPlan plan = split_plan_from_json(read_json_file(plan_path));
        return {plan.train_ids, plan.test_ids};
    }
    auto sides = presplit_sides(m);
    if (sides.second.empty())
        throw Error("EmptyTest", "manifest has no presplit test records; pass --plan");
    return sides;
}

inline Manifest subset(const Manifest& m, const std::vector<std::string>& ids)
{
    const auto idx = m.index();
    Manifest out;
    for (const auto& id : ids) {
        auto it = idx.find(id);
        if (it == idx.end())
            throw Error("UnknownId", "id not present in manifest", {{"id", id}});
        out.records.push_back(m.records[it->second]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// report rendering

inline std::string fmt_fixed(double v, int digits = 3)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

inline std::pair<double, double> mean_std(const std::vector<double>& v)
{
    if (v.empty())
        return {0, 0};
    double mean = 0;
    for (double x : v)
        mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v)
        var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

inline std::string mean_pm_std(const Json& folds, const char* key)
{
    std::vector<double> v;
    for (const auto& f : folds)
        v.push_back(f.at(key).get<double>());
    const auto [m, s] = mean_std(v);
    return fmt_fixed(m) + "+/-" + fmt_fixed(s);
}

inline void render_experiment(const Json& r, std::ostream& os)
{
    const auto& p = r.at("params");
    os << "Split-strategy comparison (synthetic corpus, " << p.at("k_classes").get<std::size_t>() << " classes, "
       << p.at("volumes_per_class").get<std::size_t>() << " volumes/class x "
       << p.at("slices_per_volume").get<std::size_t>() << " slices)\n";
    os << "Cross-validation: " << r.at("cv").at("repeats").get<std::size_t>() << " x "
       << r.at("cv").at("k").get<std::size_t>() << "-fold, nearest-neighbor k=" << r.at("knn_k").get<std::size_t>()
       << ", seed " << r.at("seed").get<std::uint64_t>() << "\n";
    os << "Values are mean+/-std over folds.\n\n";
    const char* keys[] = {"mcc", "auc", "f1", "accuracy", "precision", "recall", "average_accuracy"};
    const char* heads[] = {"MCC [-1,1]", "AUC [0,1]", "F1-score", "Accuracy", "Precision", "Recall", "Avg.accuracy"};
    os << std::left << std::setw(22) << "Split strategy";
    for (const char* h : heads)
        os << std::setw(15) << h;
    os << '\n';
    const std::pair<const char*, const char*> rows[] = {{"per-image", "folds_per_image"},
                                                        {"per-volume/subject", "folds_per_group"}};
    for (const auto& [label, key] : rows) {
        os << std::setw(22) << label;
        for (const char* k : keys)
            os << std::setw(15) << mean_pm_std(r.at(key), k);
        os << '\n';
    }
    os << "\nmean_gap (MCC per-image - per-volume/subject): " << fmt_fixed(r.at("mean_gap").get<double>()) << '\n';
    os << "max group overlap in grouped folds: " << fmt_fixed(r.at("max_group_overlap").get<double>()) << '\n';
}

inline void render_generic(const std::string& sub, const Json& r, std::ostream& os)
{
    if (sub == "split") {
        os << "Split (" << r.at("config").at("strategy").get<std::string>() << ", seed "
           << r.at("config").at("seed").get<std::uint64_t>() << "): " << r.at("train_count").get<std::size_t>()
           << " train / " << r.at("test_count").get<std::size_t>() << " test\n";
        for (auto it = r.at("test_counts").begin(); it != r.at("test_counts").end(); ++it)
            os << "  " << std::left << std::setw(20) << it.key() << " test " << it.value().get<std::size_t>()
               << " (overshoot " << r.at("overshoot").at(it.key()).get<std::size_t>() << ")\n";
        if (r.contains("audit") && !r["audit"].is_null())
            os << "  group overlap fraction: " << fmt_fixed(r["audit"].at("fraction").get<double>(), 4) << '\n';
    } else if (sub == "audit-overlap") {
        os << "Overlap audit: " << r.at("test_with_shared_group").get<std::size_t>() << " of "
           << r.at("test_total").get<std::size_t>() << " test images share a group with training ("
           << fmt_fixed(100.0 * r.at("fraction").get<double>(), 1) << "%), " << r.at("ungrouped").get<std::size_t>()
           << " ungrouped, " << r.at("shared_groups").size() << " shared groups\n";
    } else if (sub == "audit-dups") {
        os << "Duplicate audit: " << r.at("exact_count").get<std::size_t>() << " exact, "
           << r.at("near_count").get<std::size_t>() << " near (Hamming <= " << r.at("threshold").get<int>()
           << (r.at("check_flip").get<bool>() ? ", mirror-aware" : "") << ") over "
           << r.at("compared").get<std::uint64_t>() << " compared pairs\n";
        if (r.at("approximate").get<bool>())
            os << "  note: banded candidate search, pairs beyond the band guarantee may be missed\n";
    } else if (sub == "evaluate") {
        os << "MCC " << fmt_fixed(r.at("mcc").get<double>(), 4) << ", accuracy "
           << fmt_fixed(r.at("overall_accuracy").get<double>(), 4) << ", macro F1 "
           << fmt_fixed(r.at("macro_f1").get<double>(), 4);
        if (r.contains("macro_auc") && !r["macro_auc"].is_null())
            os << ", macro AUC " << fmt_fixed(r["macro_auc"].get<double>(), 4);
        os << "\n";
        os << std::left << std::setw(16) << "class" << std::setw(10) << "support" << std::setw(11) << "precision"
           << std::setw(9) << "recall" << std::setw(9) << "f1" << std::setw(10) << "accuracy" << '\n';
        for (const auto& c : r.at("per_class")) {
            const std::string name = c.at("class").is_string() ? c["class"].get<std::string>() : c["class"].dump();
            os << std::setw(16) << name << std::setw(10) << c.at("support").get<std::uint64_t>() << std::setw(11)
               << fmt_fixed(c.at("precision").get<double>()) << std::setw(9) << fmt_fixed(c.at("recall").get<double>())
               << std::setw(9) << fmt_fixed(c.at("f1").get<double>()) << std::setw(10)
               << fmt_fixed(c.at("accuracy").get<double>()) << '\n';
        }
    } else if (sub == "null-test") {
        os << "Null MCC distribution: " << r.at("iters").get<std::size_t>() << " draws of "
           << r.at("n_test").get<std::size_t>() << " labels over " << r.at("k").get<std::size_t>() << " classes\n"
           << "  mean " << fmt_fixed(r.at("mean").get<double>(), 5) << ", median "
           << fmt_fixed(r.at("median").get<double>(), 5) << ", 99th pct |MCC| "
           << fmt_fixed(r.at("p99_abs").get<double>(), 5) << '\n';
    } else if (sub == "probe") {
        os << "Random-label probe (" << r.at("mode").get<std::string>() << "): observed MCC "
           << fmt_fixed(r.at("observed_mcc").get<double>(), 4) << ", Wilcoxon p " << r.at("wilcoxon_p").get<double>()
           << ", empirical p " << r.at("empirical_p").get<double>() << " -> "
           << (r.at("flagged").get<bool>() ? "FLAGGED" : "not flagged") << " at alpha "
           << r.at("alpha").get<double>() << '\n';
    } else if (sub == "cv-plan") {
        os << "CV plan: " << r.at("repeats").get<std::size_t>() << " x " << r.at("k").get<std::size_t>() << "-fold"
           << (r.at("grouped").get<bool>() ? " grouped by " + r.at("group_key").get<std::string>() : "") << '\n';
        for (const auto& rep : r.at("plans")) {
            os << "  repeat " << rep.at("repeat").get<std::size_t>() << ": fold sizes";
            for (const auto& f : rep.at("folds"))
                os << ' ' << f.size();
            os << '\n';
        }
    } else if (sub == "scan" || sub == "synth") {
        os << (sub == "scan" ? "Scan" : "Synthetic corpus") << ": " << r.at("record_count").get<std::size_t>()
           << " records\n";
        for (auto it = r.at("classes").begin(); it != r.at("classes").end(); ++it)
            os << "  " << std::left << std::setw(20) << it.key() << it.value().get<std::size_t>() << '\n';
    } else {
        throw Error("UnknownDocument", "no renderer for this document", {{"subcommand", sub}});
    }
}

} // namespace detail

/// Runs one command line (arguments after the program name). Exit codes:
/// 0 success, 1 domain error (JSON on `err`), 2 usage error.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Dataset split auditing and generation for sliced volumetric image data", tool_name};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::string out_path;
    auto add_out = [&](CLI::App* sub) {
        sub->add_option("--out", out_path, "output JSON path (stdout when omitted)");
    };

    // scan
    auto* scan = app.add_subcommand("scan", "scan a dataset tree into a JSON Lines manifest");
    std::string scan_root, scan_manifest_out, scan_layout = "class_subject_folders", scan_pattern, scan_class_from,
                                              scan_subject_from, scan_layout_config;
    bool scan_lenient = false, scan_hash = false;
    std::vector<std::string> scan_ext;
    scan->add_option("--root", scan_root, "dataset root directory")->required();
    scan->add_option("--write-manifest", scan_manifest_out, "manifest output path (JSON Lines)")->required();
    scan->add_option("--layout", scan_layout, "folder layout")
        ->check(CLI::IsMember({"class_subject_folders", "presplit_folders", "flat"}));
    scan->add_option("--pattern", scan_pattern, "filename pattern, e.g. {class}-{subject}-{slice}");
    scan->add_option("--class-from", scan_class_from, "folder or filename")->check(CLI::IsMember({"folder", "filename"}));
    scan->add_option("--subject-from", scan_subject_from, "folder or filename")
        ->check(CLI::IsMember({"folder", "filename"}));
    scan->add_option("--layout-config", scan_layout_config, "layout JSON document");
    scan->add_flag("--lenient", scan_lenient, "skip files that do not fit the layout instead of failing");
    scan->add_flag("--hash", scan_hash, "compute content hashes and dHashes");
    scan->add_option("--ext", scan_ext, "recognized extensions (default pgm bmp tiff jpeg png)");
    add_out(scan);

    // audit-overlap
    auto* ao = app.add_subcommand("audit-overlap", "fraction of test images whose group also occurs in training");
    std::string ao_manifest, ao_plan, ao_group = "subject";
    double ao_fail_above = -1;
    ao->add_option("--manifest", ao_manifest, "manifest (JSON Lines)")->required();
    ao->add_option("--plan", ao_plan, "split plan JSON (default: presplit field)");
    ao->add_option("--group-key", ao_group, "subject or volume")->check(CLI::IsMember({"subject", "volume"}));
    auto* ao_fail_opt = ao->add_option("--fail-above", ao_fail_above, "exit 1 when the fraction exceeds this value")
                            ->check(CLI::Range(0.0, 1.0));
    add_out(ao);

    // audit-dups
    auto* ad = app.add_subcommand("audit-dups", "exact and near-duplicate images across train and test");
    std::string ad_manifest, ad_test_manifest, ad_plan;
    int ad_threshold = 10;
    bool ad_flip = false, ad_fail = false;
    ad->add_option("--manifest", ad_manifest, "manifest, or the train manifest with --test-manifest")->required();
    ad->add_option("--test-manifest", ad_test_manifest, "separate test-side manifest");
    ad->add_option("--plan", ad_plan, "split plan JSON (default: presplit field)");
    ad->add_option("--threshold", ad_threshold, "Hamming threshold for near duplicates")->check(CLI::Range(0, 64));
    ad->add_flag("--check-flip", ad_flip, "also match horizontally mirrored test images");
    ad->add_flag("--fail-on-dups", ad_fail, "exit 1 when any duplicate pair is found");
    add_out(ad);

    // split
    auto* sp = app.add_subcommand("split", "draw a per-image or per-group train/test split");
    std::string sp_manifest, sp_strategy = "per-group", sp_group = "subject", sp_preset;
    std::size_t sp_tpc = 1000;
    std::uint64_t sp_seed = 0;
    sp->add_option("--manifest", sp_manifest, "manifest (JSON Lines)")->required();
    sp->add_option("--strategy", sp_strategy, "per-image or per-group")
        ->check(CLI::IsMember({"per-image", "per-group", "per_image", "per_group"}));
    sp->add_option("--group-key", sp_group, "subject or volume")->check(CLI::IsMember({"subject", "volume"}));
    auto* sp_tpc_opt = sp->add_option("--test-per-class", sp_tpc, "test images per class")->check(CLI::PositiveNumber);
    sp->add_option("--preset", sp_preset, "kermany-like, srinivasan-like or aiims-like")
        ->check(CLI::IsMember({"default", "kermany-like", "srinivasan-like", "aiims-like"}));
    sp->add_option("--seed", sp_seed, "generator seed")->required();
    add_out(sp);

    // cv-plan
    auto* cv = app.add_subcommand("cv-plan", "repeated stratified (optionally grouped) k-fold plan");
    std::string cv_manifest, cv_group = "subject";
    std::size_t cv_k = 5, cv_repeats = 10;
    bool cv_grouped = false;
    std::uint64_t cv_seed = 0;
    cv->add_option("--manifest", cv_manifest, "manifest (JSON Lines)")->required();
    cv->add_option("--k", cv_k, "folds per repeat")->check(CLI::Range(2, 1000000));
    cv->add_option("--repeats", cv_repeats, "number of repeats")->check(CLI::PositiveNumber);
    cv->add_flag("--grouped", cv_grouped, "keep every group inside one fold");
    cv->add_option("--group-key", cv_group, "subject or volume")->check(CLI::IsMember({"subject", "volume"}));
    cv->add_option("--seed", cv_seed, "generator seed")->required();
    add_out(cv);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "metrics from a predictions CSV");
    std::string ev_predictions, ev_classes;
    std::size_t ev_k = 0;
    ev->add_option("--predictions", ev_predictions, "CSV image_id,true_label,pred_label[,score_0..]")->required();
    ev->add_option("--classes", ev_classes, "class-name JSON sidecar");
    ev->add_option("--k", ev_k, "class count (default: inferred)");
    add_out(ev);

    // null-test
    auto* nt = app.add_subcommand("null-test", "Monte-Carlo MCC null distribution of random labels");
    std::size_t nt_n = 0, nt_k = 0, nt_iters = 10000;
    std::uint64_t nt_seed = 0;
    bool nt_keep = false;
    nt->add_option("--n-test", nt_n, "test-set size")->required();
    nt->add_option("--k", nt_k, "class count")->required();
    nt->add_option("--iters", nt_iters, "iterations")->check(CLI::PositiveNumber);
    nt->add_option("--seed", nt_seed, "generator seed")->required();
    nt->add_flag("--keep-samples", nt_keep, "store the samples for later probes");
    add_out(nt);

    // probe
    auto* pr = app.add_subcommand("probe", "random-label leakage probe against the MCC null distribution");
    double pr_observed = 0, pr_alpha = 0.05;
    std::string pr_null, pr_manifest, pr_plan, pr_mode = "randomize_train_only";
    std::size_t pr_n = 0, pr_k = 0, pr_iters = 10000, pr_knn = 5;
    std::uint64_t pr_seed = 0;
    std::vector<double> pr_folds;
    auto* pr_obs_opt = pr->add_option("--observed", pr_observed, "observed MCC of a random-label model");
    pr->add_option("--manifest", pr_manifest, "manifest of PGM images; computes the observed MCC with the surrogate");
    pr->add_option("--plan", pr_plan, "split plan JSON (default: presplit field)");
    pr->add_option("--mode", pr_mode, "randomize_train_only or randomize_before_split")
        ->check(CLI::IsMember({"randomize_train_only", "randomize_before_split"}));
    pr->add_option("--knn-k", pr_knn, "neighbors for the surrogate")->check(CLI::PositiveNumber);
    pr->add_option("--null", pr_null, "null distribution JSON with samples");
    pr->add_option("--n-test", pr_n, "test-set size for a fresh null (default: test side size)");
    pr->add_option("--k", pr_k, "class count for a fresh null (default: manifest classes)");
    pr->add_option("--iters", pr_iters, "iterations for a fresh null")->check(CLI::PositiveNumber);
    pr->add_option("--alpha", pr_alpha, "significance level")->check(CLI::Range(0.0, 1.0));
    pr->add_option("--fold-mccs", pr_folds, "fold MCCs to test against the null median")->delimiter(',');
    pr->add_option("--seed", pr_seed, "generator seed")->required();
    add_out(pr);

    // synth
    auto* sy = app.add_subcommand("synth", "write a synthetic sliced-volume corpus (PGM + manifest)");
    std::string sy_dir, sy_preset = "default";
    std::uint64_t sy_seed = 0;
    sy->add_option("--out-dir", sy_dir, "corpus directory")->required();
    sy->add_option("--preset", sy_preset, "default, kermany-like, srinivasan-like or aiims-like")
        ->check(CLI::IsMember({"default", "kermany-like", "srinivasan-like", "aiims-like"}));
    sy->add_option("--seed", sy_seed, "generator seed")->required();
    detail::add_synth_options(sy);
    add_out(sy);

    // experiment
    auto* ex = app.add_subcommand("experiment", "per-image vs per-volume cross-validation on a synthetic corpus");
    std::string ex_preset = "default", ex_pred_dir;
    std::uint64_t ex_seed = 0;
    std::size_t ex_cv_k = 5, ex_repeats = 3, ex_knn = 5;
    ex->add_option("--preset", ex_preset, "default, kermany-like, srinivasan-like or aiims-like")
        ->check(CLI::IsMember({"default", "kermany-like", "srinivasan-like", "aiims-like"}));
    ex->add_option("--seed", ex_seed, "corpus and fold seed")->required();
    ex->add_option("--cv-k", ex_cv_k, "folds per repeat")->check(CLI::Range(2, 1000000));
    ex->add_option("--repeats", ex_repeats, "repeats")->check(CLI::PositiveNumber);
    ex->add_option("--knn-k", ex_knn, "neighbors for the surrogate")->check(CLI::PositiveNumber);
    ex->add_option("--predictions-dir", ex_pred_dir, "write per-fold predictions CSVs here");
    detail::add_synth_options(ex);
    add_out(ex);

    // report
    auto* rp = app.add_subcommand("report", "render a JSON report as text");
    std::string rp_input;
    rp->add_option("input", rp_input, "JSON document written by another subcommand")->required();
    rp->add_option("--out", out_path, "text output path (stdout when omitted)");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << tool_version << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        const auto subs = app.get_subcommands();
        err << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    Json doc;
    doc["tool"] = Json{{"name", tool_name}, {"version", tool_version}};
    doc["subcommand"] = name;
    doc["flags"] = detail::resolved_flags(sub);
    doc["seeds"] = Json::object();
    int exit_code = 0;

    try {
        if (sub == scan) {
            LayoutConfig cfg;
            cfg.layout_kind = layout_kind_from_string(scan_layout);
            if (cfg.layout_kind != LayoutKind::class_subject_folders) {
                cfg.subject_from = FieldSource::filename;
                cfg.pattern = NamePattern("{class}-{subject}-{slice}");
            }
            if (cfg.layout_kind == LayoutKind::flat)
                cfg.class_from = FieldSource::filename;
            if (!scan_layout_config.empty())
                cfg = layout_from_json(read_json_file(scan_layout_config), cfg);
            if (!scan_pattern.empty())
                cfg.pattern = NamePattern(scan_pattern);
            if (!scan_class_from.empty())
                cfg.class_from = field_source_from_string(scan_class_from);
            if (!scan_subject_from.empty())
                cfg.subject_from = field_source_from_string(scan_subject_from);
            ScanOptions opts;
            opts.strict = !scan_lenient;
            opts.compute_hashes = scan_hash;
            if (!scan_ext.empty())
                opts.extensions = scan_ext;
            const ScanResult res = scan_dataset(scan_root, cfg, opts);
            write_manifest(scan_manifest_out, res.manifest);
            Json violations = Json::array();
            for (const auto& v : validate_manifest(res.manifest))
                violations.push_back(Json{{"kind", v.kind}, {"id", v.id}});
            std::set<std::string> subjects;
            for (const auto& r : res.manifest.records)
                if (r.subject)
                    subjects.insert(*r.subject);
            doc["result"] = Json{{"manifest", scan_manifest_out},
                                 {"layout", Json{{"layout_kind", std::string(to_string(cfg.layout_kind))},
                                                 {"pattern", cfg.pattern.str()},
                                                 {"class_from", cfg.class_from == FieldSource::folder ? "folder" : "filename"},
                                                 {"subject_from",
                                                  cfg.subject_from == FieldSource::folder ? "folder" : "filename"}}},
                                 {"record_count", res.manifest.size()},
                                 {"classes", detail::class_counts(res.manifest)},
                                 {"subject_count", subjects.size()},
                                 {"skipped_extension", res.skipped_extension},
                                 {"skipped_mismatch", res.skipped_mismatch},
                                 {"mismatched", res.mismatched},
                                 {"violations", violations}};
            detail::emit(doc, out_path, out);
        } else if (sub == ao) {
            const Manifest m = read_manifest(ao_manifest);
            const auto [train, test] = detail::sides_for(m, ao_plan);
            const OverlapReport rep = audit_overlap(train, test, m, group_key_from_string(ao_group));
            doc["result"] = to_json(rep);
            detail::emit(doc, out_path, out);
            if (ao_fail_opt->count() > 0 && rep.fraction > ao_fail_above) {
                err << to_json_string(detail::error_json(Error(
                    "OverlapAboveThreshold", "group overlap exceeds --fail-above",
                    {{"fraction", splitgate::detail::format_real(rep.fraction)}, {"fail_above", splitgate::detail::format_real(ao_fail_above)}})));
                exit_code = 1;
            }
        } else if (sub == ad) {
            Manifest train, test;
            if (!ad_test_manifest.empty()) {
                train = read_manifest(ad_manifest);
                test = read_manifest(ad_test_manifest);
            } else {
                const Manifest m = read_manifest(ad_manifest);
                const auto [tr, te] = detail::sides_for(m, ad_plan);
                train = detail::subset(m, tr);
                test = detail::subset(m, te);
            }
            AuditOptions opt;
            opt.threshold = ad_threshold;
            opt.check_flip = ad_flip;
            const DuplicateReport rep = audit_duplicates(train, test, opt);
            doc["result"] = to_json(rep);
            detail::emit(doc, out_path, out);
            if (ad_fail && (!rep.exact_pairs.empty() || !rep.near_pairs.empty())) {
                err << to_json_string(detail::error_json(
                    Error("DuplicatesFound", "duplicate pairs across train and test",
                          {{"exact", std::to_string(rep.exact_pairs.size())},
                           {"near", std::to_string(rep.near_pairs.size())}})));
                exit_code = 1;
            }
        } else if (sub == sp) {
            const Manifest m = read_manifest(sp_manifest);
            SplitConfig cfg;
            cfg.strategy = strategy_from_string(sp_strategy);
            cfg.group_key = group_key_from_string(sp_group);
            cfg.test_per_class = sp_tpc;
            cfg.seed = sp_seed;
            if (!sp_preset.empty() && sp_tpc_opt->count() == 0)
                cfg.test_per_class = find_preset(sp_preset)->test_per_class;
            const SplitPlan plan = make_split(m, cfg);
            Json result = to_json(plan);
            const bool grouped = std::all_of(m.records.begin(), m.records.end(),
                                             [&](const ImageRecord& r) { return group_of(r, cfg.group_key).has_value(); });
            result["audit"] = grouped && !plan.test_ids.empty()
                ? to_json(audit_overlap(plan.train_ids, plan.test_ids, m, cfg.group_key))
                : Json(nullptr);
            if (!sp_preset.empty())
                result["preset"] = Json{{"name", sp_preset}, {"k_classes", find_preset(sp_preset)->k_classes}};
            doc["seeds"]["split"] = sp_seed;
            doc["result"] = std::move(result);
            detail::emit(doc, out_path, out);
        } else if (sub == cv) {
            const Manifest m = read_manifest(cv_manifest);
            const CVPlan plan = make_cv_plan(m, cv_k, cv_repeats, cv_grouped, group_key_from_string(cv_group), cv_seed);
            doc["seeds"]["cv"] = cv_seed;
            doc["result"] = to_json(plan);
            detail::emit(doc, out_path, out);
        } else if (sub == ev) {
            std::ifstream in(ev_predictions);
            if (!in)
                throw Error("IoFailure", "cannot open predictions file", {{"path", ev_predictions}});
            const Predictions p = read_predictions(in);
            std::vector<std::string> names;
            if (!ev_classes.empty())
                names = class_names_from_json(read_json_file(ev_classes));
            std::size_t k = ev_k;
            if (k == 0)
                k = names.size();
            if (k == 0)
                k = p.score_columns;
            if (k == 0) {
                for (std::size_t i = 0; i < p.truth.size(); ++i)
                    k = std::max<std::size_t>(k, static_cast<std::size_t>(std::max({p.truth[i], p.pred[i], 0})) + 1);
            }
            if (p.score_columns != 0 && p.score_columns != k)
                throw Error("LengthMismatch", "score column count differs from class count",
                            {{"score_columns", std::to_string(p.score_columns)}, {"k", std::to_string(k)}});
            if (!names.empty() && names.size() != k)
                throw Error("LengthMismatch", "class map size differs from class count");
            const auto rep = p.score_columns ? evaluate(p.truth, p.pred, k, std::span<const double>(p.scores))
                                             : evaluate(p.truth, p.pred, k);
            Json result = to_json(rep, names);
            result["k"] = k;
            result["n"] = p.truth.size();
            result["confusion_matrix"] = to_json(confusion_matrix(p.truth, p.pred, k));
            doc["result"] = std::move(result);
            detail::emit(doc, out_path, out);
        } else if (sub == nt) {
            const NullDistribution d = sample_null_mcc(nt_n, nt_k, nt_iters, nt_seed);
            doc["seeds"]["null"] = nt_seed;
            doc["result"] = to_json(d, nt_keep);
            detail::emit(doc, out_path, out);
        } else if (sub == pr) {
            const ProbeMode mode = probe_mode_from_string(pr_mode);
            double observed = pr_observed;
            std::size_t test_size = 0;
            std::size_t classes = 0;
            if (pr_obs_opt->count() == 0) {
                if (pr_manifest.empty())
                    throw CLI::RequiredError("--observed or --manifest");
                const Manifest m = read_manifest(pr_manifest);
                const auto [train, test] = detail::sides_for(m, pr_plan);
                std::vector<std::vector<int>> features(m.size());
                parallel_for(m.size(), [&](std::size_t i) {
                    try {
                        features[i] = knn_features(decode_image_file(m.records[i].path));
                    } catch (const Error& e) {
                        auto ctx = e.context();
                        ctx.emplace_back("id", m.records[i].id);
                        throw Error(e.code() == "IoFailure" ? "DecodeFailure" : e.code(), e.what(), ctx);
                    }
                });
                observed = random_label_mcc(m, features, train, test, mode, derive_seed(pr_seed, 1), pr_knn);
                test_size = test.size();
                classes = m.classes().size();
            }
            NullDistribution null;
            if (!pr_null.empty()) {
                null = null_from_json(read_json_file(pr_null));
            } else {
                const std::size_t n = pr_n ? pr_n : test_size;
                const std::size_t k = pr_k ? pr_k : classes;
                if (n == 0 || k == 0)
                    throw CLI::RequiredError("--null or --n-test/--k");
                null = sample_null_mcc(n, k, pr_iters, derive_seed(pr_seed, 2));
            }
            const ProbeReport rep = leakage_probe(observed, null, pr_alpha, mode);
            Json result = to_json(rep);
            result["null"] = to_json(null, false);
            if (!pr_folds.empty()) {
                const auto w = folds_vs_null(pr_folds, null);
                result["folds_vs_null"] = Json{{"n", pr_folds.size()}, {"median_null", median(null.samples)},
                                               {"w_plus", w.w_plus}, {"p", w.p}, {"exact", w.exact}};
            }
            doc["seeds"]["probe"] = pr_seed;
            doc["seeds"]["labels"] = derive_seed(pr_seed, 1);
            doc["seeds"]["null"] = pr_null.empty() ? Json(derive_seed(pr_seed, 2)) : Json(null.seed);
            doc["result"] = std::move(result);
            detail::emit(doc, out_path, out);
        } else if (sub == sy) {
            SynthParams p = synth_params_for(*find_preset(sy_preset));
            detail::apply_synth_overrides(sy, p);
            p.seed = sy_seed;
            const SynthCorpus c = generate_synth(p, sy_dir);
            doc["seeds"]["corpus"] = sy_seed;
            doc["result"] = Json{{"params", to_json(p)},
                                 {"manifest", (std::filesystem::path(sy_dir) / "manifest.jsonl").generic_string()},
                                 {"record_count", c.manifest.size()},
                                 {"classes", detail::class_counts(c.manifest)}};
            detail::emit(doc, out_path, out);
        } else if (sub == ex) {
            SynthParams p = synth_params_for(*find_preset(ex_preset));
            detail::apply_synth_overrides(ex, p);
            p.seed = ex_seed;
            const ExperimentReport rep = run_inflation_experiment(p, ex_cv_k, ex_repeats, ex_knn, ex_seed);
            if (!ex_pred_dir.empty()) {
                // same folds as the report, re-run for the CSVs
                const SynthCorpus corpus = synthesize(p);
                std::vector<std::vector<int>> features;
                for (const auto& img : corpus.images)
                    features.push_back(knn_features(img));
                std::filesystem::create_directories(ex_pred_dir);
                for (bool grouped : {false, true}) {
                    const CVPlan plan = make_cv_plan(corpus.manifest, ex_cv_k, ex_repeats, grouped, GroupKey::volume, ex_seed);
                    evaluate_cv_plan(corpus.manifest, features, plan, ex_knn,
                                     [&](std::size_t r, std::size_t f, const std::vector<std::string>& ids,
                                         const std::vector<int>& truth, const std::vector<KnnPrediction>& preds) {
                                         Predictions out_p;
                                         out_p.ids = ids;
                                         out_p.truth = truth;
                                         out_p.score_columns = p.k_classes;
                                         for (const auto& kp : preds) {
                                             out_p.pred.push_back(kp.label);
                                             out_p.scores.insert(out_p.scores.end(), kp.scores.begin(), kp.scores.end());
                                         }
                                         const std::string file = std::string(grouped ? "per_group" : "per_image")
                                             + "_r" + std::to_string(r) + "_f" + std::to_string(f) + ".csv";
                                         write_text_file(std::filesystem::path(ex_pred_dir) / file, write_predictions(out_p));
                                     });
                }
            }
            doc["seeds"]["corpus"] = ex_seed;
            doc["seeds"]["cv"] = ex_seed;
            doc["result"] = to_json(rep);
            detail::emit(doc, out_path, out);
        } else if (sub == rp) {
            const Json in = read_json_file(rp_input);
            if (!in.contains("subcommand") || !in.contains("result"))
                throw Error("UnknownDocument", "input is not a splitgate report", {{"path", rp_input}});
            const std::string kind = in["subcommand"].get<std::string>();
            std::ostringstream text;
            text << tool_name << ' ' << in.value("tool", Json::object()).value("version", "?") << " | " << kind << '\n';
            if (kind == "experiment")
                detail::render_experiment(in["result"], text);
            else
                detail::render_generic(kind, in["result"], text);
            if (out_path.empty() || out_path == "-")
                out << text.str();
            else
                write_text_file(out_path, text.str());
        }
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << sub->help();
        return 2;
    } catch (const Error& e) {
        err << to_json_string(detail::error_json(e));
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << to_json_string(detail::error_json(Error("InvalidJson", e.what())));
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << to_json_string(detail::error_json(Error("IoFailure", e.what(), {{"path", e.path1().string()}})));
        return 1;
    }
    return exit_code;
}

} // namespace splitgate::cli

#endif // SPLITGATE_CLI_HPP
