#pragma once

// MGF1 binary grid files and CSV exports.
//
// MGF1 layout (all little-endian):
//   "MGF1" | u32 n | n x u32 axis sizes | f64 spacing | u8 support (0 periodic,
//   1 compact) | prod(axis sizes) x f64 values, row-major.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "fmlab/error.hpp"
#include "fmlab/grid.hpp"

namespace fmlab::io {

static_assert(std::endian::native == std::endian::little, "MGF1 I/O assumes a little-endian host");

// Raw MGF1 payload; used directly for kernel matrices, which are not
// GridFunctions of their own grid.
struct Mgf1Data {
    std::vector<std::uint32_t> axes;
    double spacing = 1.0;
    SupportTag support = SupportTag::Periodic;
    std::vector<double> values;
};

namespace detail {

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) {
        throw Error(ErrorCode::Truncated, "MGF1 payload ends at byte " + std::to_string(in.size()));
    }
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace detail

inline std::string encode_mgf1(const Mgf1Data& d) {
    std::string out = "MGF1";
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(d.axes.size()));
    for (auto a : d.axes) detail::put<std::uint32_t>(out, a);
    detail::put<double>(out, d.spacing);
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(d.support));
    for (double v : d.values) detail::put<double>(out, v);
    return out;
}

inline Mgf1Data decode_mgf1(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "MGF1") != 0) {
        throw Error(ErrorCode::BadMagic, "missing MGF1 magic");
    }
    std::size_t pos = 4;
    Mgf1Data d;
    const auto n = detail::take<std::uint32_t>(bytes, pos);
    require(n >= 1 && n <= 2, ErrorCode::InvalidArgument, "MGF1 dimension must be 1 or 2, got " + std::to_string(n));
    std::size_t total = 1;
    for (std::uint32_t a = 0; a < n; ++a) {
        const auto size = detail::take<std::uint32_t>(bytes, pos);
        require(size >= 2 && std::has_single_bit(size), ErrorCode::NonPowerOfTwo,
                "MGF1 axis size " + std::to_string(size) + " is not a power of two");
        d.axes.push_back(size);
        total *= size;
    }
    d.spacing = detail::take<double>(bytes, pos);
    require(std::isfinite(d.spacing) && d.spacing > 0.0, ErrorCode::InvalidArgument, "MGF1 spacing must be positive");
    const auto tag = detail::take<std::uint8_t>(bytes, pos);
    require(tag <= 1, ErrorCode::InvalidArgument, "MGF1 support tag must be 0 or 1");
    d.support = static_cast<SupportTag>(tag);
    if (bytes.size() - pos < total * sizeof(double)) {
        throw Error(ErrorCode::Truncated, "MGF1 payload holds " + std::to_string((bytes.size() - pos) / 8) +
                                              " of " + std::to_string(total) + " values");
    }
    d.values.resize(total);
    std::memcpy(d.values.data(), bytes.data() + pos, total * sizeof(double));
    return d;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::IoFailure, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::IoFailure, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::IoFailure, "short write to " + path.string());
}

inline std::string encode_grid(const GridFunction& f) {
    const auto& spec = f.spec();
    Mgf1Data d;
    d.axes.assign(static_cast<std::size_t>(spec.dimension()), static_cast<std::uint32_t>(spec.points_per_axis()));
    d.spacing = spec.spacing();
    d.support = f.support();
    d.values.assign(f.values().begin(), f.values().end());
    return encode_mgf1(d);
}

inline GridFunction decode_grid(const std::string& bytes, int padding_factor = 2) {
    Mgf1Data d = decode_mgf1(bytes);
    if (d.axes.size() == 2) {
        require(d.axes[0] == d.axes[1], ErrorCode::InvalidArgument, "MGF1 grid axes must have equal size");
    }
    const std::size_t N = d.axes[0];
    GridSpec spec(static_cast<int>(d.axes.size()), N, d.spacing * static_cast<double>(N), padding_factor);
    return GridFunction(spec, std::move(d.values), d.support);
}

inline void write_grid(const GridFunction& f, const std::filesystem::path& path) { write_file(path, encode_grid(f)); }

inline GridFunction read_grid(const std::filesystem::path& path) { return decode_grid(read_file(path)); }

/// One "x1[,x2],value" row per node.
inline std::string grid_csv(const GridFunction& f) {
    std::ostringstream out;
    out << std::setprecision(17);
    const auto& spec = f.spec();
    out << (spec.dimension() == 1 ? "x1,value\n" : "x1,x2,value\n");
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Point x = spec.node(i);
        out << x[0] << ',';
        if (spec.dimension() == 2) out << x[1] << ',';
        out << f[i] << '\n';
    }
    return out.str();
}

}  // namespace fmlab::io
