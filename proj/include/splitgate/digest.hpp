#ifndef SPLITGATE_DIGEST_HPP
#define SPLITGATE_DIGEST_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "splitgate/error.hpp"
#include "splitgate/json_io.hpp"

namespace splitgate {

inline std::string to_hex(std::span<const unsigned char> bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0F]);
    }
    return out;
}

/// Lowercase hex SHA-256 of a byte string.
inline std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("DigestFailure", "SHA-256 computation failed");
    return to_hex(std::span<const unsigned char>(md.data(), len));
}

inline std::string sha256_file(const std::filesystem::path& path)
{
    return sha256_hex(read_text_file(path));
}

} // namespace splitgate

#endif // SPLITGATE_DIGEST_HPP
