#ifndef SPLITGATE_JSON_IO_HPP
#define SPLITGATE_JSON_IO_HPP

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "splitgate/error.hpp"

namespace splitgate {

using Json = nlohmann::ordered_json;

namespace detail {

// Shortest round-trip representation, padded to at least six fractional
// digits: 0.5 -> 0.500000, 1e-300 -> 1.000000e-300.
inline std::string format_real(double v)
{
    if (!std::isfinite(v))
        return "null";
    if (v == 0.0)
        return "0.000000";
    std::array<char, 64> buf{};
    const double mag = std::fabs(v);
    const bool fixed = mag >= 1e-6 && mag < 1e16;
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                             fixed ? std::chars_format::fixed : std::chars_format::scientific);
    std::string text(buf.data(), res.ptr);
    std::string mantissa = text;
    std::string exponent;
    if (!fixed) {
        const auto e = text.find('e');
        mantissa = text.substr(0, e);
        exponent = text.substr(e);
    }
    auto dot = mantissa.find('.');
    if (dot == std::string::npos) {
        mantissa += '.';
        dot = mantissa.size() - 1;
    }
    const std::size_t frac = mantissa.size() - dot - 1;
    if (frac < 6)
        mantissa.append(6 - frac, '0');
    return mantissa + exponent;
}

inline void write_indent(std::ostream& os, int indent, int depth)
{
    if (indent >= 0) {
        os << '\n';
        for (int i = 0; i < indent * depth; ++i)
            os << ' ';
    }
}

} // namespace detail

/// Serializes like nlohmann's dump() except that floating-point numbers keep
/// full precision with a minimum of six fractional digits. indent < 0 gives
/// a single line.
inline void write_json(std::ostream& os, const Json& j, int indent = 2, int depth = 0)
{
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first)
                os << ',';
            first = false;
            detail::write_indent(os, indent, depth + 1);
            os << Json(it.key()).dump() << (indent >= 0 ? ": " : ":");
            write_json(os, it.value(), indent, depth + 1);
        }
        detail::write_indent(os, indent, depth);
        os << '}';
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            os << "[]";
            return;
        }
        os << '[';
        bool first = true;
        for (const auto& v : j) {
            if (!first)
                os << ',';
            first = false;
            detail::write_indent(os, indent, depth + 1);
            write_json(os, v, indent, depth + 1);
        }
        detail::write_indent(os, indent, depth);
        os << ']';
        return;
    }
    case Json::value_t::number_float:
        os << detail::format_real(j.get<double>());
        return;
    default:
        os << j.dump();
        return;
    }
}

inline std::string to_json_string(const Json& j, int indent = 2)
{
    std::ostringstream os;
    write_json(os, j, indent);
    if (indent >= 0)
        os << '\n';
    return os.str();
}

inline std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("IoFailure", "cannot open file for reading", {{"path", path.string()}});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("IoFailure", "cannot open file for writing", {{"path", path.string()}});
    out << text;
    if (!out)
        throw Error("IoFailure", "write failed", {{"path", path.string()}});
}

inline Json read_json_file(const std::filesystem::path& path)
{
    const std::string text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("InvalidJson", e.what(), {{"path", path.string()}});
    }
}

} // namespace splitgate

#endif // SPLITGATE_JSON_IO_HPP
