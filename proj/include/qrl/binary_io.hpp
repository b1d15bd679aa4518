#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "error.hpp"

namespace qrl::io {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw format_error("unexpected end of file");
    return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::uint64_t max_len = 1u << 30) {
    auto n = read_pod<std::uint64_t>(in);
    if (n > max_len) throw format_error("string length out of range");
    std::string s(n, '\0');
    if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw format_error("unexpected end of file");
    return s;
}

template <typename T>
void write_vector(std::ostream& out, const std::vector<T>& v) {
    write_pod<std::uint64_t>(out, v.size());
    if (!v.empty()) out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_vector(std::istream& in, std::uint64_t max_len = 1ull << 34) {
    auto n = read_pod<std::uint64_t>(in);
    if (n > max_len) throw format_error("vector length out of range");
    std::vector<T> v(n);
    if (n && !in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)))) {
        throw format_error("unexpected end of file");
    }
    return v;
}

}  // namespace qrl::io
