#ifndef SPLITGATE_IMAGE_HPP
#define SPLITGATE_IMAGE_HPP

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "splitgate/error.hpp"
#include "splitgate/json_io.hpp"

namespace splitgate {

/// 8-bit luminance image, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill)
    {
    }

    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const GrayImage&) const = default;
};

inline GrayImage mirror_horizontal(const GrayImage& img)
{
    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(img.width - 1 - x, y) = img.at(x, y);
    return out;
}

/// Integer luminance 0.299R + 0.587G + 0.114B, rounded half up.
inline std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept
{
    const unsigned sum = 299u * r + 587u * g + 114u * b;
    return static_cast<std::uint8_t>((sum + 500u) / 1000u);
}

namespace detail {

struct PnmHeader {
    char kind = 0;
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::size_t data_offset = 0;
};

inline bool read_pnm_int(std::string_view data, std::size_t& pos, int& value)
{
    for (;;) {
        while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos])))
            ++pos;
        if (pos < data.size() && data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n')
                ++pos;
            continue;
        }
        break;
    }
    if (pos >= data.size() || !std::isdigit(static_cast<unsigned char>(data[pos])))
        return false;
    long v = 0;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) {
        v = v * 10 + (data[pos] - '0');
        if (v > 1'000'000'000)
            return false;
        ++pos;
    }
    value = static_cast<int>(v);
    return true;
}

inline bool parse_pnm_header(std::string_view data, PnmHeader& h)
{
    if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '6'))
        return false;
    h.kind = data[1];
    std::size_t pos = 2;
    if (!read_pnm_int(data, pos, h.width) || !read_pnm_int(data, pos, h.height)
        || !read_pnm_int(data, pos, h.maxval))
        return false;
    // exactly one whitespace byte separates the header from the raster
    if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
        return false;
    h.data_offset = pos + 1;
    return h.width > 0 && h.height > 0 && h.maxval > 0 && h.maxval <= 255;
}

} // namespace detail

/// Decodes binary PGM (P5) bit-exactly and binary PPM (P6) through the
/// integer luminance conversion. Only 8-bit rasters are accepted.
inline GrayImage decode_pnm(std::string_view data)
{
    detail::PnmHeader h;
    if (!detail::parse_pnm_header(data, h))
        throw Error("DecodeFailure", "not an 8-bit binary PGM/PPM image");
    const std::size_t count = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
    const std::size_t channels = h.kind == '5' ? 1 : 3;
    if (data.size() - h.data_offset < count * channels)
        throw Error("DecodeFailure", "truncated raster");
    GrayImage img(h.width, h.height);
    const auto* raster = reinterpret_cast<const unsigned char*>(data.data() + h.data_offset);
    if (channels == 1) {
        std::copy(raster, raster + count, img.pixels.begin());
    } else {
        for (std::size_t i = 0; i < count; ++i)
            img.pixels[i] = luminance(raster[3 * i], raster[3 * i + 1], raster[3 * i + 2]);
    }
    return img;
}

inline std::string encode_pgm(const GrayImage& img)
{
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
    return out;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img)
{
    write_text_file(path, encode_pgm(img));
}

/// Decode boundary: maps a file to a luminance image or throws
/// Error("DecodeFailure"). Callers may substitute their own decoder for
/// formats beyond PGM/PPM.
using ImageDecoder = std::function<GrayImage(const std::filesystem::path&)>;

inline GrayImage decode_image_file(const std::filesystem::path& path)
{
    return decode_pnm(read_text_file(path));
}

} // namespace splitgate

#endif // SPLITGATE_IMAGE_HPP
