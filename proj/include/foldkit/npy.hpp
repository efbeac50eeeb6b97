#pragma once

// Minimal NPY reader/writer for dense 2-D float arrays.
//
// Reads versions 1.0, 2.0 and 3.0 with dtype f4/f8 of either byte order and
// either memory order; always widens to double. Writes version 1.0,
// '<f8', C order, with the header padded to a 64-byte boundary like numpy.

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "matrix.hpp"

namespace foldkit {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace npy_detail {

inline constexpr std::string_view kMagic = "\x93NUMPY";

struct Header {
    char byte_order = '<';
    char kind = 'f';
    std::size_t item_size = 8;
    bool fortran_order = false;
    std::vector<std::size_t> shape;
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Returns the raw text of the value for `key` in a Python dict literal.
inline std::string_view dict_value(std::string_view dict, std::string_view key) {
    for (char quote : {'\'', '"'}) {
        std::string needle;
        needle += quote;
        needle += key;
        needle += quote;
        const auto pos = dict.find(needle);
        if (pos == std::string_view::npos) continue;
        auto rest = dict.substr(pos + needle.size());
        rest = trim(rest);
        if (rest.empty() || rest.front() != ':') break;
        rest = trim(rest.substr(1));
        std::size_t end = 0;
        if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
            end = rest.find(rest.front(), 1);
            if (end == std::string_view::npos) break;
            return rest.substr(0, end + 1);
        }
        if (!rest.empty() && rest.front() == '(') {
            end = rest.find(')');
            if (end == std::string_view::npos) break;
            return rest.substr(0, end + 1);
        }
        end = rest.find_first_of(",}");
        return trim(rest.substr(0, end));
    }
    throw Error(ErrorKind::format, "NPY header is missing '" + std::string(key) + "'");
}

inline Header parse_header(std::string_view dict) {
    dict = trim(dict);
    if (dict.size() < 2 || dict.front() != '{' || dict.back() != '}') {
        throw Error(ErrorKind::format, "NPY header is not a dict literal");
    }
    Header h;

    auto descr = dict_value(dict, "descr");
    if (descr.size() < 2) throw Error(ErrorKind::format, "bad descr");
    descr = descr.substr(1, descr.size() - 2);
    if (descr.size() < 3) {
        throw Error(ErrorKind::unsupported_shape, "unsupported dtype '" + std::string(descr) + "'");
    }
    h.byte_order = descr[0];
    h.kind = descr[1];
    const auto size_text = descr.substr(2);
    if (h.kind != 'f' || (size_text != "4" && size_text != "8") ||
        (h.byte_order != '<' && h.byte_order != '>' && h.byte_order != '=' &&
         h.byte_order != '|')) {
        throw Error(ErrorKind::unsupported_shape, "unsupported dtype '" + std::string(descr) + "'");
    }
    h.item_size = size_text == "4" ? 4 : 8;

    const auto fortran = dict_value(dict, "fortran_order");
    if (fortran == "True") {
        h.fortran_order = true;
    } else if (fortran == "False") {
        h.fortran_order = false;
    } else {
        throw Error(ErrorKind::format, "bad fortran_order '" + std::string(fortran) + "'");
    }

    auto shape = dict_value(dict, "shape");
    if (shape.size() < 2 || shape.front() != '(' || shape.back() != ')') {
        throw Error(ErrorKind::format, "bad shape");
    }
    shape = shape.substr(1, shape.size() - 2);
    while (!shape.empty()) {
        const auto comma = shape.find(',');
        const auto item = trim(shape.substr(0, comma));
        if (!item.empty()) {
            std::size_t value = 0;
            for (char c : item) {
                if (!std::isdigit(static_cast<unsigned char>(c))) {
                    throw Error(ErrorKind::format, "bad shape entry '" + std::string(item) + "'");
                }
                value = value * 10 + static_cast<std::size_t>(c - '0');
            }
            h.shape.push_back(value);
        }
        if (comma == std::string_view::npos) break;
        shape.remove_prefix(comma + 1);
    }
    return h;
}

template <typename T>
T load_scalar(const char* p, bool swap) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits;
    std::memcpy(&bits, p, sizeof(U));
    if (swap) {
        if constexpr (sizeof(U) == 4) {
            bits = __builtin_bswap32(bits);
        } else {
            bits = __builtin_bswap64(bits);
        }
    }
    return std::bit_cast<T>(bits);
}

}  // namespace npy_detail

inline WeightMatrix parse_array(std::string_view bytes, const std::string& origin = "<memory>") {
    using namespace npy_detail;
    if (bytes.size() < 10 || bytes.substr(0, 6) != kMagic) {
        throw Error(ErrorKind::format, origin + ": missing NPY magic");
    }
    const auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t offset = 0;
    if (major == 1) {
        header_len = static_cast<unsigned char>(bytes[8]) |
                     (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
        offset = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) throw Error(ErrorKind::format, origin + ": truncated header");
        for (int b = 3; b >= 0; --b) {
            header_len = (header_len << 8) | static_cast<unsigned char>(bytes[8 + b]);
        }
        offset = 12;
    } else {
        throw Error(ErrorKind::format, origin + ": unsupported NPY version " +
                                           std::to_string(major));
    }
    if (bytes.size() < offset + header_len) {
        throw Error(ErrorKind::format, origin + ": truncated header");
    }
    const Header h = parse_header(bytes.substr(offset, header_len));
    if (h.shape.size() != 2) {
        throw Error(ErrorKind::unsupported_shape,
                    origin + ": expected a 2-D array, got " + std::to_string(h.shape.size()) +
                        "-D");
    }
    const std::size_t m = h.shape[0];
    const std::size_t p = h.shape[1];
    if (m == 0 || p == 0) {
        throw Error(ErrorKind::unsupported_shape, origin + ": empty array");
    }
    const auto payload = bytes.substr(offset + header_len);
    if (payload.size() != m * p * h.item_size) {
        throw Error(ErrorKind::format, origin + ": payload has " + std::to_string(payload.size()) +
                                           " bytes, expected " +
                                           std::to_string(m * p * h.item_size));
    }

    const bool swap = h.byte_order == '>';
    std::vector<double> values(m * p);
    for (std::size_t n = 0; n < values.size(); ++n) {
        const char* src = payload.data() + n * h.item_size;
        const double v = h.item_size == 4 ? static_cast<double>(load_scalar<float>(src, swap))
                                          : load_scalar<double>(src, swap);
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::invalid_value, origin + ": non-finite entry at flat index " +
                                                      std::to_string(n));
        }
        // Fortran order stores column-major; n indexes (i + j*m).
        const std::size_t dst = h.fortran_order ? (n % m) * p + n / m : n;
        values[dst] = v;
    }
    return WeightMatrix(m, p, std::move(values));
}

inline WeightMatrix read_array(const std::filesystem::path& path) {
    return parse_array(read_file(path), path.string());
}

inline std::string serialize_array(const Matrix& w) {
    std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       std::to_string(w.rows()) + ", " + std::to_string(w.cols()) + "), }";
    // magic(6) + version(2) + len(2) + dict + padding + '\n' == multiple of 64
    const std::size_t unpadded = 10 + dict.size() + 1;
    dict.append((64 - unpadded % 64) % 64, ' ');
    dict.push_back('\n');

    std::string out(npy_detail::kMagic);
    out.push_back('\x01');
    out.push_back('\x00');
    out.push_back(static_cast<char>(dict.size() & 0xff));
    out.push_back(static_cast<char>((dict.size() >> 8) & 0xff));
    out += dict;
    const auto data = w.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
    return out;
}

inline void write_array(const Matrix& w, const std::filesystem::path& path) {
    atomic_write_file(path, serialize_array(w));
}

}  // namespace foldkit
