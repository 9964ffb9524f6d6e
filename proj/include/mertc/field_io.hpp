#pragma once

// Field dumps. Binary layout (little-endian host order):
//
//   8 bytes   magic "MERTCFLD"
//   u32       format version
//   u64       spec hash
//   u64       node count n
//   u64       slice count m
//   u8        stationary flag
//   f64 x n   node coordinates
//   f64 x n*m values, row-major by slice (slice 0 first)
//   u8  x n*m contact flags, same order
//
// The CSV form has a "# spec_hash=" comment line, then one row per node:
// x followed by the value in every slice.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "mertc/boundary.hpp"
#include "mertc/error.hpp"
#include "mertc/solver.hpp"

namespace mertc {

inline constexpr std::array<char, 8> field_magic{'M', 'E', 'R', 'T', 'C', 'F', 'L', 'D'};
inline constexpr std::uint32_t field_format_version = 1;

namespace detail {

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw usage_error("truncated field dump");
    return v;
}

}  // namespace detail

inline void write_binary(std::ostream& os, const SolutionField& f) {
    os.write(field_magic.data(), field_magic.size());
    detail::put(os, field_format_version);
    detail::put(os, spec_hash(f.spec));
    detail::put(os, static_cast<std::uint64_t>(f.nodes()));
    detail::put(os, static_cast<std::uint64_t>(f.slices()));
    detail::put(os, static_cast<std::uint8_t>(f.stationary ? 1 : 0));
    os.write(reinterpret_cast<const char*>(f.grid.x.data()),
             static_cast<std::streamsize>(f.grid.x.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(f.contact.data()),
             static_cast<std::streamsize>(f.contact.size()));
    if (!os) throw usage_error("failed to write field dump");
}

/// Reads a dump produced for `spec`. Rejects dumps whose stored hash or shape
/// does not match the spec.
[[nodiscard]] inline SolutionField read_binary(std::istream& is, const ProblemSpec& spec) {
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != field_magic) {
        throw usage_error("not a field dump");
    }
    if (detail::get<std::uint32_t>(is) != field_format_version) {
        throw usage_error("unsupported field dump version");
    }
    if (detail::get<std::uint64_t>(is) != spec_hash(spec)) {
        throw usage_error("field dump was produced for a different spec");
    }
    const auto n = detail::get<std::uint64_t>(is);
    const auto m = detail::get<std::uint64_t>(is);
    const bool stationary = detail::get<std::uint8_t>(is) != 0;
    SolutionField f = make_field(spec, static_cast<int>(m), stationary);
    if (n != f.nodes() || stationary != (spec.variant == Variant::infinite_horizon_log)) {
        throw usage_error("field dump shape does not match the spec");
    }
    std::vector<double> x(n);
    is.read(reinterpret_cast<char*>(x.data()), static_cast<std::streamsize>(n * sizeof(double)));
    is.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(f.contact.data()), static_cast<std::streamsize>(f.contact.size()));
    if (!is) throw usage_error("truncated field dump");
    for (std::size_t i = 0; i < n; ++i) {
        if (std::memcmp(&x[i], &f.grid.x[i], sizeof(double)) != 0) {
            throw usage_error("field dump grid does not match the spec");
        }
    }
    return f;
}

inline void write_field_csv(std::ostream& os, const SolutionField& f) {
    os << "# spec_hash=" << hex64(spec_hash(f.spec)) << '\n';
    os << 'x';
    for (int k = 0; k < f.slices(); ++k) os << ",t=" << format_value(f.time(k));
    os << '\n';
    char buf[32];
    for (std::size_t i = 0; i < f.nodes(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", f.grid.x[i]);
        os << buf;
        for (int k = 0; k < f.slices(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", f.at(i, k));
            os << ',' << buf;
        }
        os << '\n';
    }
}

inline void save_field(const std::string& path, const SolutionField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw usage_error("cannot open " + path + " for writing");
    write_binary(os, f);
}

[[nodiscard]] inline SolutionField load_field(const std::string& path, const ProblemSpec& spec) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw usage_error("cannot open " + path);
    return read_binary(is, spec);
}

}  // namespace mertc
