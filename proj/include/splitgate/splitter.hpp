#ifndef SPLITGATE_SPLITTER_HPP
#define SPLITGATE_SPLITTER_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "splitgate/error.hpp"
#include "splitgate/ingest.hpp"
#include "splitgate/json_io.hpp"
#include "splitgate/rng.hpp"

namespace splitgate {

enum class Strategy { per_image, per_group };

inline std::string_view to_string(Strategy s) { return s == Strategy::per_image ? "per_image" : "per_group"; }

inline Strategy strategy_from_string(std::string_view s)
{
    if (s == "per_image" || s == "per-image")
        return Strategy::per_image;
    if (s == "per_group" || s == "per-group")
        return Strategy::per_group;
    throw Error("InvalidArgument", "strategy must be per-image or per-group", {{"strategy", std::string(s)}});
}

struct SplitConfig {
    Strategy strategy = Strategy::per_group;
    GroupKey group_key = GroupKey::subject;
    std::size_t test_per_class = 1000;
    std::uint64_t seed = 0;
};

struct SplitPlan {
    SplitConfig config;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    // Test images per class. Under per_group this may exceed test_per_class
    // because groups are never cut.
    std::map<std::string, std::size_t> test_counts;
};

namespace detail {

inline std::map<std::string, std::vector<std::string>> ids_by_class(const Manifest& m)
{
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& r : m.records)
        out[r.class_label].push_back(r.id);
    for (auto& [cls, ids] : out)
        std::sort(ids.begin(), ids.end());
    return out;
}

// class -> group -> image count, plus id -> group. Throws MissingGroupKey
// for the lexicographically first record without the key.
struct GroupIndex {
    std::map<std::string, std::map<std::string, std::size_t>> class_groups;
    std::map<std::string, std::string> group_of_id;
};

inline GroupIndex index_groups(const Manifest& m, GroupKey key)
{
    GroupIndex gi;
    std::optional<std::string> first_missing;
    for (const auto& r : m.records) {
        const auto& g = group_of(r, key);
        if (!g) {
            if (!first_missing || r.id < *first_missing)
                first_missing = r.id;
            continue;
        }
        ++gi.class_groups[r.class_label][*g];
        gi.group_of_id[r.id] = *g;
    }
    if (first_missing)
        throw Error("MissingGroupKey", "record lacks the group key",
                    {{"id", *first_missing}, {"group_key", std::string(to_string(key))}});
    return gi;
}

} // namespace detail

/// Draws a train/test split. per_image samples test_per_class images per
/// class without replacement. per_group shuffles each class's groups and
/// moves whole groups to test until the class reaches test_per_class.
/// Classes are processed in sorted order from one generator seeded with
/// config.seed; groups spanning several classes move as a unit.
inline SplitPlan make_split(const Manifest& m, const SplitConfig& config)
{
    if (config.test_per_class == 0)
        throw Error("InvalidArgument", "test_per_class must be positive");
    (void)m.index();

    SplitPlan plan;
    plan.config = config;
    Xoshiro256 rng(config.seed);
    const auto by_class = detail::ids_by_class(m);

    if (config.strategy == Strategy::per_image) {
        std::set<std::string> test;
        for (const auto& [cls, sorted_ids] : by_class) {
            if (sorted_ids.size() < config.test_per_class)
                throw Error("InsufficientImages", "class has fewer images than test_per_class",
                            {{"class", cls}, {"available", std::to_string(sorted_ids.size())},
                             {"requested", std::to_string(config.test_per_class)}});
            auto ids = sorted_ids;
            shuffle(std::span<std::string>(ids), rng);
            test.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(config.test_per_class));
            plan.test_counts[cls] = config.test_per_class;
        }
        for (const auto& r : m.records)
            (test.count(r.id) ? plan.test_ids : plan.train_ids).push_back(r.id);
    } else {
        const auto gi = detail::index_groups(m, config.group_key);
        std::set<std::string> test_groups;
        for (const auto& [cls, groups] : gi.class_groups) {
            std::size_t total = 0;
            std::size_t in_test = 0;
            std::vector<std::string> candidates;
            for (const auto& [g, n] : groups) {
                total += n;
                if (test_groups.count(g))
                    in_test += n;
                else
                    candidates.push_back(g);
            }
            if (total < config.test_per_class)
                throw Error("InsufficientImages", "class has fewer images than test_per_class",
                            {{"class", cls}, {"available", std::to_string(total)},
                             {"requested", std::to_string(config.test_per_class)}});
            shuffle(std::span<std::string>(candidates), rng);
            for (const auto& g : candidates) {
                if (in_test >= config.test_per_class)
                    break;
                test_groups.insert(g);
                in_test += groups.at(g);
            }
            if (in_test == total)
                throw Error("SingleGroupClass", "per-group split leaves no training images for class",
                            {{"class", cls}, {"groups", std::to_string(groups.size())}});
        }
        for (const auto& r : m.records) {
            const bool is_test = test_groups.count(gi.group_of_id.at(r.id)) > 0;
            (is_test ? plan.test_ids : plan.train_ids).push_back(r.id);
            if (is_test)
                ++plan.test_counts[r.class_label];
        }
        for (const auto& [cls, groups] : gi.class_groups)
            plan.test_counts.try_emplace(cls, 0);
    }
    std::sort(plan.train_ids.begin(), plan.train_ids.end());
    std::sort(plan.test_ids.begin(), plan.test_ids.end());
    return plan;
}

/// Repeated k-fold plan. fold_of[r] maps every id to a fold in [0, k).
struct CVPlan {
    std::size_t k = 5;
    std::size_t repeats = 10;
    bool grouped = false;
    GroupKey group_key = GroupKey::subject;
    std::uint64_t seed = 0;
    std::vector<std::map<std::string, std::size_t>> fold_of;

    /// Held-out ids of (repeat, fold), sorted.
    std::vector<std::string> fold_ids(std::size_t repeat, std::size_t fold) const
    {
        std::vector<std::string> out;
        for (const auto& [id, f] : fold_of.at(repeat))
            if (f == fold)
                out.push_back(id);
        return out;
    }

    /// Training ids of (repeat, fold): every id outside the fold, sorted.
    std::vector<std::string> train_ids(std::size_t repeat, std::size_t fold) const
    {
        std::vector<std::string> out;
        for (const auto& [id, f] : fold_of.at(repeat))
            if (f != fold)
                out.push_back(id);
        return out;
    }
};

/// Each repeat uses a generator seeded with derive_seed(seed, repeat).
/// Ungrouped: each class's ids are shuffled and dealt round-robin, with one
/// running counter across classes so fold sizes stay balanced. Grouped: each
/// class's groups are shuffled and dealt the same way; a group keeps the
/// fold it received first.
inline CVPlan make_cv_plan(const Manifest& m, std::size_t k, std::size_t repeats, bool grouped, GroupKey group_key,
                           std::uint64_t seed)
{
    if (k < 2)
        throw Error("InvalidArgument", "k must be at least 2", {{"k", std::to_string(k)}});
    if (repeats < 1)
        throw Error("InvalidArgument", "repeats must be at least 1");
    (void)m.index();

    CVPlan plan;
    plan.k = k;
    plan.repeats = repeats;
    plan.grouped = grouped;
    plan.group_key = group_key;
    plan.seed = seed;

    const auto by_class = detail::ids_by_class(m);
    std::optional<detail::GroupIndex> gi;
    if (grouped) {
        gi = detail::index_groups(m, group_key);
        for (const auto& [cls, groups] : gi->class_groups)
            if (groups.size() < k)
                throw Error("TooFewGroups", "class has fewer groups than folds",
                            {{"class", cls}, {"groups", std::to_string(groups.size())}, {"k", std::to_string(k)}});
    } else {
        for (const auto& [cls, ids] : by_class)
            if (ids.size() < k)
                throw Error("TooFewImages", "class has fewer images than folds",
                            {{"class", cls}, {"images", std::to_string(ids.size())}, {"k", std::to_string(k)}});
    }

    for (std::size_t rep = 0; rep < repeats; ++rep) {
        Xoshiro256 rng(derive_seed(seed, rep));
        std::map<std::string, std::size_t> fold_of;
        std::size_t counter = 0;
        if (!grouped) {
            for (const auto& [cls, sorted_ids] : by_class) {
                auto ids = sorted_ids;
                shuffle(std::span<std::string>(ids), rng);
                for (const auto& id : ids)
                    fold_of[id] = counter++ % k;
            }
        } else {
            std::map<std::string, std::size_t> group_fold;
            for (const auto& [cls, groups] : gi->class_groups) {
                std::vector<std::string> names;
                for (const auto& [g, n] : groups)
                    names.push_back(g);
                shuffle(std::span<std::string>(names), rng);
                for (const auto& g : names)
                    if (group_fold.try_emplace(g, counter).second)
                        counter = (counter + 1) % k;
            }
            for (const auto& [id, g] : gi->group_of_id)
                fold_of[id] = group_fold.at(g);
        }
        plan.fold_of.push_back(std::move(fold_of));
    }
    return plan;
}

struct OverlapReport {
    std::size_t test_total = 0; // test images carrying the group key
    std::size_t test_with_shared_group = 0;
    std::size_t ungrouped = 0; // test images without the key, excluded from the fraction
    double fraction = 0.0;
    std::vector<std::string> shared_groups;
};

/// Share of test images whose group also occurs among the training images.
inline OverlapReport audit_overlap(std::span<const std::string> train_ids, std::span<const std::string> test_ids,
                                   const Manifest& m, GroupKey key)
{
    if (test_ids.empty())
        throw Error("EmptyTest", "test side is empty");
    const auto idx = m.index();
    auto lookup = [&](const std::string& id) -> const ImageRecord& {
        auto it = idx.find(id);
        if (it == idx.end())
            throw Error("UnknownId", "id not present in manifest", {{"id", id}});
        return m.records[it->second];
    };

    std::set<std::string> train_groups;
    for (const auto& id : train_ids)
        if (const auto& g = group_of(lookup(id), key))
            train_groups.insert(*g);

    OverlapReport rep;
    std::set<std::string> shared;
    for (const auto& id : test_ids) {
        const auto& g = group_of(lookup(id), key);
        if (!g) {
            ++rep.ungrouped;
            continue;
        }
        ++rep.test_total;
        if (train_groups.count(*g)) {
            ++rep.test_with_shared_group;
            shared.insert(*g);
        }
    }
    rep.fraction = rep.test_total == 0 ? 0.0
                                       : static_cast<double>(rep.test_with_shared_group) / static_cast<double>(rep.test_total);
    rep.shared_groups.assign(shared.begin(), shared.end());
    return rep;
}

/// Train/test sides from the presplit field (val records are ignored).
inline std::pair<std::vector<std::string>, std::vector<std::string>> presplit_sides(const Manifest& m)
{
    std::vector<std::string> train, test;
    for (const auto& r : m.records) {
        if (r.presplit == SplitTag::train)
            train.push_back(r.id);
        else if (r.presplit == SplitTag::test)
            test.push_back(r.id);
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const SplitConfig& c)
{
    return Json{{"strategy", std::string(to_string(c.strategy))},
                {"group_key", std::string(to_string(c.group_key))},
                {"test_per_class", c.test_per_class},
                {"seed", c.seed}};
}

inline Json to_json(const SplitPlan& p)
{
    Json counts = Json::object();
    for (const auto& [cls, n] : p.test_counts)
        counts[cls] = n;
    Json over = Json::object();
    for (const auto& [cls, n] : p.test_counts)
        over[cls] = n > p.config.test_per_class ? n - p.config.test_per_class : 0;
    return Json{{"config", to_json(p.config)},
                {"train_count", p.train_ids.size()},
                {"test_count", p.test_ids.size()},
                {"test_counts", counts},
                {"overshoot", over},
                {"train_ids", p.train_ids},
                {"test_ids", p.test_ids}};
}

inline SplitPlan split_plan_from_json(const Json& j)
{
    const Json& body = j.contains("result") ? j["result"] : j;
    if (!body.contains("train_ids") || !body.contains("test_ids"))
        throw Error("InvalidPlan", "plan needs train_ids and test_ids");
    SplitPlan p;
    p.train_ids = body["train_ids"].get<std::vector<std::string>>();
    p.test_ids = body["test_ids"].get<std::vector<std::string>>();
    if (body.contains("config")) {
        const auto& c = body["config"];
        p.config.strategy = strategy_from_string(c.value("strategy", "per_group"));
        p.config.group_key = group_key_from_string(c.value("group_key", "subject"));
        p.config.test_per_class = c.value("test_per_class", std::size_t{1});
        p.config.seed = c.value("seed", std::uint64_t{0});
    }
    return p;
}

inline Json to_json(const CVPlan& p)
{
    Json repeats = Json::array();
    for (std::size_t r = 0; r < p.repeats; ++r) {
        Json folds = Json::array();
        for (std::size_t f = 0; f < p.k; ++f)
            folds.push_back(p.fold_ids(r, f));
        repeats.push_back(Json{{"repeat", r}, {"seed", derive_seed(p.seed, r)}, {"folds", std::move(folds)}});
    }
    return Json{{"k", p.k},
                {"repeats", p.repeats},
                {"grouped", p.grouped},
                {"group_key", std::string(to_string(p.group_key))},
                {"seed", p.seed},
                {"plans", std::move(repeats)}};
}

inline Json to_json(const OverlapReport& r)
{
    return Json{{"test_total", r.test_total},
                {"test_with_shared_group", r.test_with_shared_group},
                {"ungrouped", r.ungrouped},
                {"fraction", r.fraction},
                {"shared_groups", r.shared_groups}};
}

} // namespace splitgate

#endif // SPLITGATE_SPLITTER_HPP
