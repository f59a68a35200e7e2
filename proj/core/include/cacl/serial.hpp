#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cacl/errors.hpp"

// Little-endian binary stream helpers shared by checkpoints and environment
// state blobs. Readers take a section label so corrupt files fail with the
// offending section named.
namespace cacl::serial {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void write_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void write_f64_vec(std::ostream& out, const std::vector<double>& v) {
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void check(std::istream& in, const char* section) {
    if (!in) {
        throw IoError(std::string("checkpoint: truncated or corrupt section '") + section + "'");
    }
}

inline std::uint32_t read_u32(std::istream& in, const char* section) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    check(in, section);
    return v;
}

inline std::uint64_t read_u64(std::istream& in, const char* section) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    check(in, section);
    return v;
}

inline std::int64_t read_i64(std::istream& in, const char* section) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    check(in, section);
    return v;
}

inline double read_f64(std::istream& in, const char* section) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    check(in, section);
    return v;
}

inline std::string read_string(std::istream& in, const char* section) {
    std::uint64_t n = read_u64(in, section);
    if (n > (1ULL << 32)) {
        throw IoError(std::string("checkpoint: implausible string size in section '") + section +
                      "'");
    }
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    check(in, section);
    return s;
}

inline std::vector<double> read_f64_vec(std::istream& in, const char* section) {
    std::uint64_t n = read_u64(in, section);
    if (n > (1ULL << 32)) {
        throw IoError(std::string("checkpoint: implausible array size in section '") + section +
                      "'");
    }
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    check(in, section);
    return v;
}

} // namespace cacl::serial
