#ifndef SPLITGATE_DHASH_HPP
#define SPLITGATE_DHASH_HPP

#include <bit>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "splitgate/error.hpp"
#include "splitgate/image.hpp"

namespace splitgate {

/// Block-average downsample to cols x rows. Cell (r, c) covers source rows
/// [floor(r*H/rows), floor((r+1)*H/rows)) and the analogous columns; the
/// value is the mean rounded half up. Requires width >= cols, height >= rows.
inline std::vector<int> block_average(const GrayImage& img, int cols, int rows)
{
    std::vector<int> cells(static_cast<std::size_t>(cols) * rows);
    const long long w = img.width;
    const long long h = img.height;
    for (int r = 0; r < rows; ++r) {
        const int y0 = static_cast<int>(r * h / rows);
        const int y1 = static_cast<int>((r + 1) * h / rows);
        for (int c = 0; c < cols; ++c) {
            const int x0 = static_cast<int>(c * w / cols);
            const int x1 = static_cast<int>((c + 1) * w / cols);
            std::uint64_t sum = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x)
                    sum += img.at(x, y);
            const std::uint64_t count = static_cast<std::uint64_t>(y1 - y0) * static_cast<std::uint64_t>(x1 - x0);
            cells[static_cast<std::size_t>(r) * cols + c] = static_cast<int>((2 * sum + count) / (2 * count));
        }
    }
    return cells;
}

/// 64-bit difference hash. The image is reduced to 9x8 block means; bit
/// (r, c) is set when cell (r, c+1) is strictly brighter than cell (r, c).
/// Bits are packed row-major with bit (0, 0) as the most significant.
inline std::uint64_t compute_dhash(const GrayImage& img)
{
    if (img.width < 9 || img.height < 8)
        throw Error("ImageTooSmall", "dHash needs at least 9x8 pixels",
                    {{"width", std::to_string(img.width)}, {"height", std::to_string(img.height)}});
    const auto cells = block_average(img, 9, 8);
    std::uint64_t hash = 0;
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            hash <<= 1;
            if (cells[r * 9 + c + 1] > cells[r * 9 + c])
                hash |= 1;
        }
    return hash;
}

inline int hamming(std::uint64_t a, std::uint64_t b) noexcept { return std::popcount(a ^ b); }

inline std::string hash_to_hex(std::uint64_t h)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4)
        out[i] = digits[h & 0xF];
    return out;
}

inline std::uint64_t hash_from_hex(std::string_view hex)
{
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), value, 16);
    if (hex.size() != 16 || ec != std::errc() || ptr != hex.data() + hex.size())
        throw Error("InvalidHash", "expected 16 hex digits", {{"value", std::string(hex)}});
    return value;
}

} // namespace splitgate

#endif // SPLITGATE_DHASH_HPP
