#ifndef SPLITGATE_HASHDUP_HPP
#define SPLITGATE_HASHDUP_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "splitgate/dhash.hpp"
#include "splitgate/digest.hpp"
#include "splitgate/error.hpp"
#include "splitgate/image.hpp"
#include "splitgate/ingest.hpp"
#include "splitgate/json_io.hpp"
#include "splitgate/parallel.hpp"

namespace splitgate {

/// Per-image hashes used by the duplicate audit.
struct Fingerprint {
    std::string id;
    std::optional<std::string> content_hash;
    std::uint64_t dhash = 0;
    std::uint64_t dhash_mirrored = 0;
};

inline Fingerprint fingerprint_image(std::string id, const GrayImage& img, std::optional<std::string> content_hash = {})
{
    Fingerprint fp;
    fp.id = std::move(id);
    fp.content_hash = std::move(content_hash);
    fp.dhash = compute_dhash(img);
    fp.dhash_mirrored = compute_dhash(mirror_horizontal(img));
    return fp;
}

/// Fingerprints every record from its file: content hash over the raw
/// bytes, dHash over the decoded luminance image. Failures are reported
/// with the record id (DecodeFailure, ImageTooSmall).
inline std::vector<Fingerprint> fingerprint_manifest(const Manifest& m, const ImageDecoder& decoder = decode_image_file)
{
    std::vector<Fingerprint> out(m.records.size());
    parallel_for(m.records.size(), [&](std::size_t i) {
        const auto& r = m.records[i];
        try {
            const std::string bytes = read_text_file(r.path);
            out[i] = fingerprint_image(r.id, decoder(r.path), sha256_hex(bytes));
        } catch (const Error& e) {
            auto ctx = e.context();
            ctx.emplace_back("id", r.id);
            throw Error(e.code() == "IoFailure" ? "DecodeFailure" : e.code(), e.what(), ctx);
        }
    });
    return out;
}

struct NearPair {
    std::string id_a;
    std::string id_b;
    int hamming = 0;
    bool flipped = false;

    bool operator==(const NearPair&) const = default;
};

struct DuplicateReport {
    std::vector<std::pair<std::string, std::string>> exact_pairs;
    std::vector<NearPair> near_pairs;
    int threshold = 10;
    bool check_flip = false;
    std::uint64_t compared = 0;
    bool banded = false;      // candidate pairs came from the 4x16-bit band index
    bool approximate = false; // banded and threshold >= 4: pairs may be missed
};

struct AuditOptions {
    int threshold = 10;
    bool check_flip = false;
    // Pair counts above this use the band index instead of a full scan.
    std::uint64_t full_scan_limit = 20000ULL * 20000ULL;
};

namespace detail {

inline std::uint16_t band(std::uint64_t h, int b) noexcept
{
    return static_cast<std::uint16_t>(h >> (16 * b));
}

} // namespace detail

/// Cross-split duplicate audit. Pairs always run train (id_a) to test (id_b).
/// Exact pairs share a content hash; near pairs are the remaining pairs whose
/// dHash distance (or, with check_flip, the distance to the mirrored test
/// image, whichever is smaller) is within the threshold.
inline DuplicateReport audit_duplicates(const std::vector<Fingerprint>& train, const std::vector<Fingerprint>& test,
                                        const AuditOptions& opt = {})
{
    if (opt.threshold < 0 || opt.threshold > 64)
        throw Error("InvalidArgument", "threshold must be within 0..64", {{"threshold", std::to_string(opt.threshold)}});

    DuplicateReport rep;
    rep.threshold = opt.threshold;
    rep.check_flip = opt.check_flip;
    rep.compared = static_cast<std::uint64_t>(train.size()) * test.size();
    rep.banded = rep.compared > opt.full_scan_limit;
    rep.approximate = rep.banded && opt.threshold >= 4;

    std::unordered_map<std::string, std::vector<std::size_t>> by_content;
    for (std::size_t i = 0; i < train.size(); ++i)
        if (train[i].content_hash)
            by_content[*train[i].content_hash].push_back(i);

    std::array<std::unordered_map<std::uint16_t, std::vector<std::size_t>>, 4> bands;
    if (rep.banded)
        for (std::size_t i = 0; i < train.size(); ++i)
            for (int b = 0; b < 4; ++b)
                bands[b][detail::band(train[i].dhash, b)].push_back(i);

    struct Found {
        std::vector<std::pair<std::string, std::string>> exact;
        std::vector<NearPair> near;
    };
    std::vector<Found> found(test.size());

    parallel_for(test.size(), [&](std::size_t j) {
        const auto& t = test[j];
        std::vector<std::size_t> exact_idx;
        if (t.content_hash)
            if (auto it = by_content.find(*t.content_hash); it != by_content.end())
                exact_idx = it->second;
        for (std::size_t i : exact_idx)
            found[j].exact.emplace_back(train[i].id, t.id);

        auto consider = [&](std::size_t i) {
            if (std::binary_search(exact_idx.begin(), exact_idx.end(), i))
                return;
            const int direct = hamming(train[i].dhash, t.dhash);
            const int mirrored = opt.check_flip ? hamming(train[i].dhash, t.dhash_mirrored) : 65;
            const int best = std::min(direct, mirrored);
            if (best <= opt.threshold)
                found[j].near.push_back({train[i].id, t.id, best, mirrored < direct});
        };

        if (!rep.banded) {
            for (std::size_t i = 0; i < train.size(); ++i)
                consider(i);
            return;
        }
        std::vector<std::size_t> candidates;
        const int probes = opt.check_flip ? 2 : 1;
        for (int p = 0; p < probes; ++p) {
            const std::uint64_t h = p == 0 ? t.dhash : t.dhash_mirrored;
            for (int b = 0; b < 4; ++b)
                if (auto it = bands[b].find(detail::band(h, b)); it != bands[b].end())
                    candidates.insert(candidates.end(), it->second.begin(), it->second.end());
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        for (std::size_t i : candidates)
            consider(i);
    });

    for (auto& f : found) {
        rep.exact_pairs.insert(rep.exact_pairs.end(), f.exact.begin(), f.exact.end());
        rep.near_pairs.insert(rep.near_pairs.end(), f.near.begin(), f.near.end());
    }
    std::sort(rep.exact_pairs.begin(), rep.exact_pairs.end());
    std::sort(rep.near_pairs.begin(), rep.near_pairs.end(), [](const NearPair& a, const NearPair& b) {
        return std::tie(a.id_a, a.id_b) < std::tie(b.id_a, b.id_b);
    });
    return rep;
}

inline DuplicateReport audit_duplicates(const Manifest& train, const Manifest& test, const AuditOptions& opt = {},
                                        const ImageDecoder& decoder = decode_image_file)
{
    return audit_duplicates(fingerprint_manifest(train, decoder), fingerprint_manifest(test, decoder), opt);
}

inline Json to_json(const DuplicateReport& rep)
{
    Json j;
    j["threshold"] = rep.threshold;
    j["check_flip"] = rep.check_flip;
    j["compared"] = rep.compared;
    j["banded"] = rep.banded;
    j["approximate"] = rep.approximate;
    j["exact_count"] = rep.exact_pairs.size();
    j["near_count"] = rep.near_pairs.size();
    Json exact = Json::array();
    for (const auto& [a, b] : rep.exact_pairs)
        exact.push_back({{"id_a", a}, {"id_b", b}});
    j["exact_pairs"] = std::move(exact);
    Json near = Json::array();
    for (const auto& p : rep.near_pairs)
        near.push_back({{"id_a", p.id_a}, {"id_b", p.id_b}, {"hamming", p.hamming}, {"flipped", p.flipped}});
    j["near_pairs"] = std::move(near);
    return j;
}

} // namespace splitgate

#endif // SPLITGATE_HASHDUP_HPP
