#ifndef SPLITGATE_TESTS_SUPPORT_HPP
#define SPLITGATE_TESTS_SUPPORT_HPP

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "splitgate/image.hpp"
#include "splitgate/ingest.hpp"
#include "splitgate/json_io.hpp"
#include "splitgate/rng.hpp"

namespace splitgate::fixtures {

class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path()
            / ("splitgate-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline void touch(const std::filesystem::path& p, const std::string& content = "x")
{
    std::filesystem::create_directories(p.parent_path());
    write_text_file(p, content);
}

inline ImageRecord record(std::string id, std::string cls, std::optional<std::string> subject,
                          std::optional<std::string> volume = std::nullopt)
{
    ImageRecord r;
    r.path = "/nonexistent/" + id;
    r.id = std::move(id);
    r.class_label = std::move(cls);
    r.subject = std::move(subject);
    r.volume = std::move(volume);
    return r;
}

/// Manifest with `classes` classes, groups_per_class[c] subjects per class
/// and 1..max_images images per subject. Subject names are unique per class.
inline Manifest random_grouped_manifest(Xoshiro256& rng, std::size_t min_classes, std::size_t max_classes,
                                        std::size_t min_groups, std::size_t max_groups, std::size_t max_images)
{
    Manifest m;
    const std::size_t classes = min_classes + rng.bounded(max_classes - min_classes + 1);
    for (std::size_t c = 0; c < classes; ++c) {
        const std::size_t groups = min_groups + rng.bounded(max_groups - min_groups + 1);
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t images = 1 + rng.bounded(max_images);
            const std::string subject = "s" + std::to_string(c) + "_" + std::to_string(g);
            for (std::size_t i = 0; i < images; ++i)
                m.records.push_back(record("k" + std::to_string(c) + "-" + subject + "-" + std::to_string(i),
                                           "k" + std::to_string(c), subject, subject));
        }
    }
    return m;
}

/// Uniform random 8-bit image.
inline GrayImage noise_image(int w, int h, std::uint64_t seed)
{
    Xoshiro256 rng(seed);
    GrayImage img(w, h);
    for (auto& p : img.pixels)
        p = static_cast<std::uint8_t>(rng.bounded(256));
    return img;
}

/// Smooth image with structure at the dHash grid scale.
inline GrayImage smooth_image(int w, int h, std::uint64_t seed)
{
    Xoshiro256 rng(seed);
    const int cols = 9, rows = 8;
    std::vector<int> cells(cols * rows);
    for (auto& c : cells)
        c = 20 + static_cast<int>(rng.bounded(216));
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = static_cast<std::uint8_t>(cells[(y * rows / h) * cols + (x * cols / w)]);
    return img;
}

/// Adds uniform integer noise in [-amplitude, amplitude], clamped to 0..255.
inline GrayImage add_noise(const GrayImage& src, int amplitude, std::uint64_t seed)
{
    Xoshiro256 rng(seed);
    GrayImage out = src;
    for (auto& p : out.pixels) {
        const int v = static_cast<int>(p) + static_cast<int>(rng.bounded(2 * amplitude + 1)) - amplitude;
        p = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
    return out;
}

} // namespace splitgate::fixtures

#endif // SPLITGATE_TESTS_SUPPORT_HPP
