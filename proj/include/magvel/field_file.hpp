#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "magvel/errors.hpp"
#include "magvel/fields.hpp"
#include "magvel/transport.hpp"

namespace magvel {

/**
 * VFLD field file, version 1. Little-endian throughout:
 *
 *   "VFLD"  magic, 4 bytes
 *   u16     format version = 1
 *   u16     flags; bit 0 selects torus (0) or slab (1)
 *   u8      d
 *   u32 x d grid counts N_i (slab: surface counts then the s count)
 *   f64 x d extents (torus: periods L_i; slab: half widths W_i then S)
 *   slab only: chart vectors as f64 blocks - normal (d), F (d),
 *              tangent basis rows ((d-1) x d)
 *   u8      component count = d
 *   u64     checksum: sum of payload bytes mod 2^64
 *   f64 x d*prod(N_i)  payload, component-outermost, row-major
 */
namespace vfld {

constexpr std::uint16_t format_version = 1;
constexpr std::uint16_t flag_slab = 1;

} // namespace vfld

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const char* p, std::size_t n) { buf_.append(p, n); }
    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(const std::string& data, std::string name)
        : data_(data), name_(std::move(name)) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint16_t u16() {
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= std::uint16_t(u8()) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(u8()) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t remaining() const { return data_.size() - pos_; }
    const char* cursor() const { return data_.data() + pos_; }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n)
            throw IoError(name_ + ": truncated field file");
    }

    const std::string& data_;
    std::string name_;
    std::size_t pos_ = 0;
};

inline std::uint64_t payload_checksum(const char* p, std::size_t n) {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += static_cast<std::uint8_t>(p[i]);
    return sum;
}

inline std::string read_file_bytes(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError(path + ": cannot open for reading");
    std::string data;
    char chunk[1 << 16];
    std::size_t got;
    while ((got = std::fread(chunk, 1, sizeof chunk, f)) > 0) data.append(chunk, got);
    const bool bad = std::ferror(f) != 0;
    std::fclose(f);
    if (bad) throw IoError(path + ": read failure");
    return data;
}

/// Writes through a temp file and renames, so readers never observe a
/// half-written file and a failed write leaves any previous version intact.
inline void atomic_write_file(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw IoError(tmp + ": cannot open for writing");
    const bool wrote = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
    const bool closed = std::fclose(f) == 0;
    if (!wrote || !closed) {
        std::remove(tmp.c_str());
        throw IoError(tmp + ": write failure");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw IoError(path + ": rename failure");
    }
}

inline void read_preamble(ByteReader& r, const std::string& path, bool expect_slab) {
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::string(magic, 4) != "VFLD") throw IoError(path + ": not a VFLD field file");
    const std::uint16_t version = r.u16();
    if (version != vfld::format_version)
        throw IoError(path + ": unsupported VFLD version " + std::to_string(version));
    const std::uint16_t flags = r.u16();
    const bool slab = (flags & vfld::flag_slab) != 0;
    if (slab != expect_slab)
        throw IoError(path + (expect_slab ? ": expected a slab field file"
                                          : ": expected a torus field file"));
}

/// Payload + component count + checksum; shared tail of both layouts.
inline std::vector<double> read_tail(ByteReader& r, const std::string& path, int dim,
                                     std::size_t points) {
    const int components = r.u8();
    if (components != dim)
        throw IoError(path + ": component count does not match dimension");
    const std::uint64_t stored_sum = r.u64();
    const std::size_t payload_bytes = 8 * static_cast<std::size_t>(dim) * points;
    if (r.remaining() != payload_bytes)
        throw IoError(path + ": payload length does not match the declared grid");
    if (payload_checksum(r.cursor(), payload_bytes) != stored_sum)
        throw IoError(path + ": checksum mismatch");
    std::vector<double> data(static_cast<std::size_t>(dim) * points);
    for (double& v : data) v = r.f64();
    return data;
}

} // namespace detail

struct FieldFileInfo {
    bool slab = false;
    int dim = 0;
};

/// Reads just enough of the header to dispatch on kind and dimension.
inline FieldFileInfo peek_field_file(const std::string& path) {
    const std::string bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::string(magic, 4) != "VFLD") throw IoError(path + ": not a VFLD field file");
    const std::uint16_t version = r.u16();
    if (version != vfld::format_version)
        throw IoError(path + ": unsupported VFLD version " + std::to_string(version));
    FieldFileInfo info;
    info.slab = (r.u16() & vfld::flag_slab) != 0;
    info.dim = r.u8();
    return info;
}

template <int D>
void write_torus_field(const std::string& path, const GridVectorField<D>& field) {
    detail::ByteWriter w;
    w.bytes("VFLD", 4);
    w.u16(vfld::format_version);
    w.u16(0);
    w.u8(static_cast<std::uint8_t>(D));
    for (int i = 0; i < D; ++i) w.u32(static_cast<std::uint32_t>(field.lattice().counts()[i]));
    for (int i = 0; i < D; ++i) w.f64(field.lattice().periods()[i]);
    w.u8(static_cast<std::uint8_t>(D));

    detail::ByteWriter payload;
    for (double v : field.data()) payload.f64(v);
    w.u64(detail::payload_checksum(payload.str().data(), payload.str().size()));
    w.bytes(payload.str().data(), payload.str().size());
    detail::atomic_write_file(path, w.str());
}

template <int D>
GridVectorField<D> read_torus_field(const std::string& path) {
    const std::string bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    detail::read_preamble(r, path, false);
    const int dim = r.u8();
    if (dim != D)
        throw IoError(path + ": stores a " + std::to_string(dim) + "-dimensional field, expected " +
                      std::to_string(D));
    std::array<int, D> counts{};
    for (int i = 0; i < D; ++i) counts[i] = static_cast<int>(r.u32());
    Vec<D> periods{};
    for (int i = 0; i < D; ++i) periods[i] = r.f64();
    try {
        TorusLattice<D> lattice(periods, counts);
        auto data = detail::read_tail(r, path, D, lattice.point_count());
        return GridVectorField<D>(lattice, std::move(data));
    } catch (const std::invalid_argument& e) {
        throw IoError(path + ": invalid field data (" + e.what() + ")");
    }
}

template <int D>
void write_slab_field(const std::string& path, const SlabGrid<D>& grid) {
    detail::ByteWriter w;
    w.bytes("VFLD", 4);
    w.u16(vfld::format_version);
    w.u16(vfld::flag_slab);
    w.u8(static_cast<std::uint8_t>(D));
    for (int i = 0; i < D - 1; ++i)
        w.u32(static_cast<std::uint32_t>(grid.spec().surface_counts[i]));
    w.u32(static_cast<std::uint32_t>(grid.spec().s_count));
    for (int i = 0; i < D - 1; ++i) w.f64(grid.spec().half_widths[i]);
    w.f64(grid.spec().s_half_width);
    for (int i = 0; i < D; ++i) w.f64(grid.chart().normal()[i]);
    for (int i = 0; i < D; ++i) w.f64(grid.chart().background().value()[i]);
    for (int j = 0; j < D - 1; ++j)
        for (int i = 0; i < D; ++i) w.f64(grid.chart().surface_basis()[j][i]);
    w.u8(static_cast<std::uint8_t>(D));

    detail::ByteWriter payload;
    for (double v : grid.values()) payload.f64(v);
    w.u64(detail::payload_checksum(payload.str().data(), payload.str().size()));
    w.bytes(payload.str().data(), payload.str().size());
    detail::atomic_write_file(path, w.str());
}

template <int D>
SlabGrid<D> read_slab_field(const std::string& path) {
    const std::string bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    detail::read_preamble(r, path, true);
    const int dim = r.u8();
    if (dim != D)
        throw IoError(path + ": stores a " + std::to_string(dim) + "-dimensional field, expected " +
                      std::to_string(D));
    SlabSpec<D> spec;
    for (int i = 0; i < D - 1; ++i) spec.surface_counts[i] = static_cast<int>(r.u32());
    spec.s_count = static_cast<int>(r.u32());
    for (int i = 0; i < D - 1; ++i) spec.half_widths[i] = r.f64();
    spec.s_half_width = r.f64();
    Vec<D> normal{}, background{};
    for (int i = 0; i < D; ++i) normal[i] = r.f64();
    for (int i = 0; i < D; ++i) background[i] = r.f64();
    std::array<Vec<D>, D - 1> basis{};
    for (int j = 0; j < D - 1; ++j)
        for (int i = 0; i < D; ++i) basis[j][i] = r.f64();
    try {
        auto chart =
            HyperplaneChart<D>::adopt(normal, BackgroundField<D>(background), basis);
        SlabGrid<D> grid(chart, spec);
        grid.values() = detail::read_tail(r, path, D, grid.node_count());
        for (double v : grid.values())
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite sample");
        return grid;
    } catch (const std::invalid_argument& e) {
        throw IoError(path + ": invalid field data (" + e.what() + ")");
    }
}

} // namespace magvel
