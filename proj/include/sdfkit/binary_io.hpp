#pragma once

#include "sdfkit/types.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace sdfkit::io {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError(std::string("truncated file reading ") + what);
    return v;
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
    char got[4] = {};
    if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0)
        throw FormatError(std::string("bad magic, expected ") + magic);
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_pod(out, std::uint32_t(s.size()));
    out.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_string(std::istream& in, const char* what, std::uint32_t limit = 1u << 24) {
    const auto n = read_pod<std::uint32_t>(in, what);
    if (n > limit) throw FormatError(std::string("implausible length for ") + what);
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n)) throw FormatError(std::string("truncated file reading ") + what);
    return s;
}

}  // namespace sdfkit::io
