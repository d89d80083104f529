#ifndef SPLITGATE_INGEST_HPP
#define SPLITGATE_INGEST_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "splitgate/dhash.hpp"
#include "splitgate/digest.hpp"
#include "splitgate/error.hpp"
#include "splitgate/image.hpp"
#include "splitgate/json_io.hpp"
#include "splitgate/parallel.hpp"

namespace splitgate {

enum class SplitTag { train, val, test };

inline std::string_view to_string(SplitTag s)
{
    switch (s) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
    }
    return "train";
}

inline std::optional<SplitTag> split_tag_from_string(std::string_view s)
{
    if (s == "train")
        return SplitTag::train;
    if (s == "val")
        return SplitTag::val;
    if (s == "test")
        return SplitTag::test;
    return std::nullopt;
}

/// One 2D image of a dataset.
struct ImageRecord {
    std::string id;
    std::string path;
    std::string class_label;
    std::optional<std::string> subject;
    std::optional<std::string> volume;
    std::optional<std::uint64_t> slice_index;
    std::optional<std::string> content_hash; // 64 lowercase hex chars
    std::optional<std::uint64_t> dhash;
    std::optional<SplitTag> presplit;

    bool operator==(const ImageRecord&) const = default;
};

struct Manifest {
    std::vector<ImageRecord> records;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }

    /// id -> record index; throws DuplicateId.
    std::map<std::string, std::size_t> index() const
    {
        std::map<std::string, std::size_t> out;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (!out.emplace(records[i].id, i).second)
                throw Error("DuplicateId", "manifest contains a duplicate id", {{"id", records[i].id}});
        return out;
    }

    /// Sorted distinct class labels.
    std::vector<std::string> classes() const
    {
        std::set<std::string> s;
        for (const auto& r : records)
            s.insert(r.class_label);
        return {s.begin(), s.end()};
    }
};

// ---------------------------------------------------------------------------
// Manifest serialization (JSON Lines, fixed key order, absent fields omitted)

inline Json record_to_json(const ImageRecord& r)
{
    Json j;
    j["id"] = r.id;
    j["path"] = r.path;
    j["class_label"] = r.class_label;
    if (r.subject)
        j["subject"] = *r.subject;
    if (r.volume)
        j["volume"] = *r.volume;
    if (r.slice_index)
        j["slice_index"] = *r.slice_index;
    if (r.content_hash)
        j["content_hash"] = *r.content_hash;
    if (r.dhash)
        j["dhash"] = hash_to_hex(*r.dhash);
    if (r.presplit)
        j["presplit"] = std::string(to_string(*r.presplit));
    return j;
}

inline ImageRecord record_from_json(const Json& j)
{
    auto str = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key))
            return std::nullopt;
        if (!j[key].is_string())
            throw Error("InvalidManifest", "field must be a string", {{"field", key}});
        return j[key].get<std::string>();
    };
    ImageRecord r;
    auto id = str("id");
    auto cls = str("class_label");
    if (!id || !cls || cls->empty())
        throw Error("InvalidManifest", "record needs id and non-empty class_label");
    r.id = *id;
    r.class_label = *cls;
    r.path = str("path").value_or(r.id);
    r.subject = str("subject");
    r.volume = str("volume");
    if (j.contains("slice_index")) {
        if (!j["slice_index"].is_number_unsigned())
            throw Error("InvalidManifest", "slice_index must be a non-negative integer", {{"id", r.id}});
        r.slice_index = j["slice_index"].get<std::uint64_t>();
    }
    r.content_hash = str("content_hash");
    if (auto d = str("dhash"))
        r.dhash = hash_from_hex(*d);
    if (auto p = str("presplit")) {
        r.presplit = split_tag_from_string(*p);
        if (!r.presplit)
            throw Error("InvalidManifest", "presplit must be train, val or test", {{"id", r.id}});
    }
    return r;
}

inline std::string manifest_to_jsonl(const Manifest& m)
{
    std::string out;
    for (const auto& r : m.records) {
        out += to_json_string(record_to_json(r), -1);
        out += '\n';
    }
    return out;
}

inline Manifest manifest_from_jsonl(std::string_view text)
{
    Manifest m;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos)
            continue;
        try {
            m.records.push_back(record_from_json(Json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error("InvalidManifest", e.what(), {{"line", std::to_string(line_no)}});
        } catch (const Error& e) {
            auto ctx = e.context();
            ctx.emplace_back("line", std::to_string(line_no));
            throw Error(e.code(), e.what(), ctx);
        }
    }
    return m;
}

inline Manifest read_manifest(const std::filesystem::path& path)
{
    return manifest_from_jsonl(read_text_file(path));
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m)
{
    write_text_file(path, manifest_to_jsonl(m));
}

// ---------------------------------------------------------------------------
// Filename patterns

/// Identity fields recoverable from a filename.
struct NameFields {
    std::optional<std::string> class_label;
    std::optional<std::string> subject;
    std::optional<std::string> volume;
    std::optional<std::uint64_t> slice_index;

    bool operator==(const NameFields&) const = default;
};

/// Filename template such as "{class}-{subject}-{slice}". Each placeholder
/// captures up to the next occurrence of the literal that follows it; the
/// last placeholder captures the remainder.
class NamePattern {
public:
    enum class Field { class_label, subject, volume, slice };

    struct Token {
        bool is_field = false;
        Field field = Field::class_label;
        std::string literal;
    };

    NamePattern() = default;

    explicit NamePattern(std::string tmpl) : template_(std::move(tmpl))
    {
        std::set<Field> seen;
        std::size_t pos = 0;
        while (pos < template_.size()) {
            if (template_[pos] == '{') {
                const auto close = template_.find('}', pos);
                if (close == std::string::npos)
                    throw invalid("unterminated placeholder");
                const auto name = template_.substr(pos + 1, close - pos - 1);
                Field f;
                if (name == "class")
                    f = Field::class_label;
                else if (name == "subject")
                    f = Field::subject;
                else if (name == "volume")
                    f = Field::volume;
                else if (name == "slice")
                    f = Field::slice;
                else
                    throw invalid("unknown placeholder {" + name + "}");
                if (!seen.insert(f).second)
                    throw invalid("placeholder {" + name + "} appears twice");
                if (!tokens_.empty() && tokens_.back().is_field)
                    throw invalid("adjacent placeholders need a delimiter between them");
                tokens_.push_back({true, f, {}});
                pos = close + 1;
            } else {
                const auto next = template_.find('{', pos);
                const auto end = next == std::string::npos ? template_.size() : next;
                if (template_.find('}', pos) < end)
                    throw invalid("stray '}'");
                tokens_.push_back({false, Field::class_label, template_.substr(pos, end - pos)});
                pos = end;
            }
        }
        if (seen.empty())
            throw invalid("pattern needs at least one placeholder");
    }

    const std::string& str() const noexcept { return template_; }
    bool empty() const noexcept { return template_.empty(); }
    const std::vector<Token>& tokens() const noexcept { return tokens_; }

    bool has(Field f) const
    {
        return std::any_of(tokens_.begin(), tokens_.end(),
                           [f](const Token& t) { return t.is_field && t.field == f; });
    }

private:
    Error invalid(const std::string& why) const
    {
        return Error("InvalidPattern", why, {{"pattern", template_}});
    }

    std::string template_;
    std::vector<Token> tokens_;
};

/// Parses a bare filename (no directory, no extension). Never returns a
/// partial result: a mismatch throws PatternMismatch, a non-numeric slice
/// throws SliceNotNumeric.
inline NameFields parse_filename(std::string_view name, const NamePattern& pattern)
{
    auto mismatch = [&]() {
        return Error("PatternMismatch", "filename does not fit the pattern",
                     {{"name", std::string(name)}, {"pattern", pattern.str()}});
    };
    const auto& tokens = pattern.tokens();
    if (tokens.empty())
        throw mismatch();
    NameFields out;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& tok = tokens[i];
        if (!tok.is_field) {
            if (name.substr(pos, tok.literal.size()) != tok.literal)
                throw mismatch();
            pos += tok.literal.size();
            continue;
        }
        std::size_t end = name.size();
        if (i + 1 < tokens.size()) {
            end = name.find(tokens[i + 1].literal, pos);
            if (end == std::string_view::npos)
                throw mismatch();
        }
        if (end == pos)
            throw mismatch();
        const std::string value(name.substr(pos, end - pos));
        pos = end;
        switch (tok.field) {
        case NamePattern::Field::class_label: out.class_label = value; break;
        case NamePattern::Field::subject: out.subject = value; break;
        case NamePattern::Field::volume: out.volume = value; break;
        case NamePattern::Field::slice: {
            std::uint64_t v = 0;
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v, 10);
            if (ec != std::errc() || ptr != value.data() + value.size())
                throw Error("SliceNotNumeric", "slice field is not a base-10 integer",
                            {{"name", std::string(name)}, {"slice", value}});
            out.slice_index = v;
            break;
        }
        }
    }
    if (pos != name.size())
        throw mismatch();
    return out;
}

/// Inverse of parse_filename for fields that contain no delimiter text.
inline std::string render_filename(const NameFields& fields, const NamePattern& pattern)
{
    std::string out;
    for (const auto& tok : pattern.tokens()) {
        if (!tok.is_field) {
            out += tok.literal;
            continue;
        }
        switch (tok.field) {
        case NamePattern::Field::class_label: out += fields.class_label.value_or(""); break;
        case NamePattern::Field::subject: out += fields.subject.value_or(""); break;
        case NamePattern::Field::volume: out += fields.volume.value_or(""); break;
        case NamePattern::Field::slice:
            out += fields.slice_index ? std::to_string(*fields.slice_index) : std::string();
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Directory scanning

enum class LayoutKind { class_subject_folders, presplit_folders, flat };
enum class FieldSource { folder, filename };

struct LayoutConfig {
    LayoutKind layout_kind = LayoutKind::class_subject_folders;
    NamePattern pattern;
    FieldSource class_from = FieldSource::folder;
    FieldSource subject_from = FieldSource::folder;
};

inline std::string_view to_string(LayoutKind k)
{
    switch (k) {
    case LayoutKind::class_subject_folders: return "class_subject_folders";
    case LayoutKind::presplit_folders: return "presplit_folders";
    case LayoutKind::flat: return "flat";
    }
    return "flat";
}

inline LayoutKind layout_kind_from_string(std::string_view s)
{
    if (s == "class_subject_folders" || s == "class-subject-folders")
        return LayoutKind::class_subject_folders;
    if (s == "presplit_folders" || s == "presplit-folders")
        return LayoutKind::presplit_folders;
    if (s == "flat")
        return LayoutKind::flat;
    throw Error("InvalidLayout", "unknown layout kind", {{"layout_kind", std::string(s)}});
}

inline FieldSource field_source_from_string(std::string_view s)
{
    if (s == "folder")
        return FieldSource::folder;
    if (s == "filename")
        return FieldSource::filename;
    throw Error("InvalidLayout", "field source must be folder or filename", {{"value", std::string(s)}});
}

/// Reads {"layout_kind", "pattern", "class_from", "subject_from"}; missing
/// keys keep the defaults of `base`.
inline LayoutConfig layout_from_json(const Json& j, LayoutConfig base = {})
{
    if (j.contains("layout_kind"))
        base.layout_kind = layout_kind_from_string(j["layout_kind"].get<std::string>());
    if (j.contains("pattern"))
        base.pattern = NamePattern(j["pattern"].get<std::string>());
    if (j.contains("class_from"))
        base.class_from = field_source_from_string(j["class_from"].get<std::string>());
    if (j.contains("subject_from"))
        base.subject_from = field_source_from_string(j["subject_from"].get<std::string>());
    return base;
}

struct ScanOptions {
    bool strict = true;
    bool compute_hashes = false;
    std::vector<std::string> extensions{"pgm", "bmp", "tiff", "jpeg", "png"};
};

struct ScanResult {
    Manifest manifest;
    std::size_t skipped_extension = 0;
    std::size_t skipped_mismatch = 0;
    std::vector<std::string> mismatched; // relative paths, lenient mode
};

namespace detail {

inline std::string lowercase(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline void check_layout(const LayoutConfig& cfg)
{
    const bool need_pattern = cfg.class_from == FieldSource::filename || cfg.subject_from == FieldSource::filename;
    if (need_pattern && cfg.pattern.empty())
        throw Error("InvalidLayout", "fields taken from filenames need a pattern");
    if (cfg.class_from == FieldSource::filename && !cfg.pattern.has(NamePattern::Field::class_label))
        throw Error("InvalidLayout", "class_from=filename needs a {class} placeholder", {{"pattern", cfg.pattern.str()}});
    if (cfg.layout_kind == LayoutKind::flat
        && (cfg.class_from == FieldSource::folder || cfg.subject_from == FieldSource::folder))
        throw Error("InvalidLayout", "flat layout takes every field from the filename");
}

// Builds a record from a root-relative path; throws PatternMismatch /
// SliceNotNumeric / LayoutMismatch for files that do not fit.
inline ImageRecord record_for(const std::filesystem::path& root, const std::filesystem::path& rel,
                              const LayoutConfig& cfg)
{
    std::vector<std::string> dirs;
    for (const auto& part : rel.parent_path())
        dirs.push_back(part.string());
    auto layout_mismatch = [&](const char* why) {
        return Error("LayoutMismatch", why, {{"path", rel.generic_string()}});
    };

    ImageRecord r;
    r.id = rel.generic_string();
    r.path = (root / rel).generic_string();

    std::size_t next_dir = 0;
    if (cfg.layout_kind == LayoutKind::presplit_folders) {
        if (dirs.empty())
            throw layout_mismatch("file is not inside a train/val/test folder");
        r.presplit = split_tag_from_string(dirs[0]);
        if (!r.presplit)
            throw layout_mismatch("top-level folder is not train, val or test");
        next_dir = 1;
    }
    if (cfg.class_from == FieldSource::folder) {
        if (dirs.size() <= next_dir)
            throw layout_mismatch("missing class folder");
        r.class_label = dirs[next_dir++];
    }
    if (cfg.subject_from == FieldSource::folder) {
        if (dirs.size() <= next_dir)
            throw layout_mismatch("missing subject folder");
        r.subject = dirs[next_dir++];
    }

    if (!cfg.pattern.empty()) {
        const auto fields = parse_filename(rel.stem().string(), cfg.pattern);
        if (cfg.class_from == FieldSource::filename)
            r.class_label = fields.class_label.value_or("");
        if (cfg.subject_from == FieldSource::filename)
            r.subject = fields.subject;
        r.volume = fields.volume;
        r.slice_index = fields.slice_index;
    }
    if (r.class_label.empty())
        throw layout_mismatch("empty class label");
    return r;
}

} // namespace detail

/// Walks `root` and builds one record per recognized image file, sorted by
/// root-relative path. Files with unknown extensions are skipped and
/// counted. Files that do not fit the layout abort the scan in strict mode
/// and are skipped and counted otherwise.
inline ScanResult scan_dataset(const std::filesystem::path& root, const LayoutConfig& config,
                               const ScanOptions& options = {})
{
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(root, ec))
        throw Error("RootNotFound", "dataset root is not a readable directory", {{"root", root.generic_string()}});
    detail::check_layout(config);
    if (config.layout_kind == LayoutKind::presplit_folders
        && (!fs::is_directory(root / "train") || !fs::is_directory(root / "test")))
        throw Error("InvalidLayout", "presplit_folders needs top-level train and test folders",
                    {{"root", root.generic_string()}});

    std::set<std::string> allowed;
    for (const auto& e : options.extensions)
        allowed.insert(detail::lowercase(e));

    ScanResult result;
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (!it->is_regular_file())
            continue;
        fs::path rel = fs::relative(it->path(), root);
        std::string ext = rel.extension().string();
        if (!ext.empty())
            ext.erase(0, 1);
        if (!allowed.count(detail::lowercase(ext))) {
            ++result.skipped_extension;
            continue;
        }
        files.push_back(std::move(rel));
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });

    std::vector<std::optional<ImageRecord>> built(files.size());
    std::vector<std::optional<Error>> failures(files.size());
    parallel_for(files.size(), [&](std::size_t i) {
        try {
            ImageRecord r = detail::record_for(root, files[i], config);
            if (options.compute_hashes) {
                const std::string bytes = read_text_file(root / files[i]);
                r.content_hash = sha256_hex(bytes);
                try {
                    const GrayImage img = decode_pnm(bytes);
                    if (img.width >= 9 && img.height >= 8)
                        r.dhash = compute_dhash(img);
                } catch (const Error&) {
                    // not a PGM/PPM; dhash stays absent
                }
            }
            built[i] = std::move(r);
        } catch (const Error& e) {
            if (e.code() == "IoFailure")
                throw;
            failures[i] = e;
        }
    });

    for (std::size_t i = 0; i < files.size(); ++i) {
        if (failures[i]) {
            if (options.strict)
                throw *failures[i];
            ++result.skipped_mismatch;
            result.mismatched.push_back(files[i].generic_string());
            continue;
        }
        result.manifest.records.push_back(std::move(*built[i]));
    }
    if (result.manifest.empty())
        throw Error("EmptyDataset", "no image records found", {{"root", root.generic_string()}});
    return result;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    std::string kind; // DuplicateId, MissingFile, MissingGroupKey, EmptyClass
    std::string id;

    bool operator==(const Violation&) const = default;
};

enum class GroupKey { subject, volume };

inline std::string_view to_string(GroupKey k) { return k == GroupKey::subject ? "subject" : "volume"; }

inline GroupKey group_key_from_string(std::string_view s)
{
    if (s == "subject")
        return GroupKey::subject;
    if (s == "volume")
        return GroupKey::volume;
    throw Error("InvalidArgument", "group key must be subject or volume", {{"group_key", std::string(s)}});
}

inline const std::optional<std::string>& group_of(const ImageRecord& r, GroupKey key)
{
    return key == GroupKey::subject ? r.subject : r.volume;
}

/// Lists problems without throwing. `required_group` adds a check that every
/// record carries that key; `check_files` stats each path.
inline std::vector<Violation> validate_manifest(const Manifest& m, std::optional<GroupKey> required_group = std::nullopt,
                                                bool check_files = true)
{
    std::vector<Violation> out;
    std::set<std::string> seen;
    std::set<std::string> reported;
    for (const auto& r : m.records) {
        if (!seen.insert(r.id).second && reported.insert(r.id).second)
            out.push_back({"DuplicateId", r.id});
        if (r.class_label.empty())
            out.push_back({"EmptyClass", r.id});
        std::error_code ec;
        if (check_files && !std::filesystem::is_regular_file(r.path, ec))
            out.push_back({"MissingFile", r.id});
        if (required_group && !group_of(r, *required_group))
            out.push_back({"MissingGroupKey", r.id});
    }
    return out;
}

} // namespace splitgate

#endif // SPLITGATE_INGEST_HPP
