#pragma once

// Tensor file layout (all integers little-endian, no padding):
//
//   "MVST" | version u8 = 1 | dtype u8 = 1 (f32) | reserved u16 = 0
//   | rank u32 | rank x dim u32 | row-major f32 payload
//
// Model packs embed the same body without the magic.

#include "mvs/core.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

namespace mvs {

inline constexpr char kTensorMagic[4] = {'M', 'V', 'S', 'T'};
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;

class ByteWriter {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const char*>(data);
        buf_.append(p, n);
    }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(std::span<const char> data, std::string context) : data_(data), ctx_(std::move(context)) {}

    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw Error(ErrorCode::TruncatedFile, ctx_ + ": unexpected end of data");
    }
    std::span<const char> bytes(std::size_t n) {
        need(n);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
    std::uint16_t u16() {
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(u8()) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }

    std::size_t remaining() const { return data_.size() - pos_; }
    const std::string& context() const { return ctx_; }

private:
    std::span<const char> data_;
    std::size_t pos_ = 0;
    std::string ctx_;
};

struct Tensor {
    std::vector<double> values;
    std::vector<std::uint32_t> dims;

    std::uint64_t element_count() const {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

/// Body without the magic: version, dtype, reserved, rank, dims, payload.
inline void encode_tensor_body(ByteWriter& w, std::span<const double> values, std::span<const std::uint32_t> dims) {
    std::uint64_t count = 1;
    for (auto d : dims) count *= d;
    if (count != values.size()) {
        throw Error(ErrorCode::ShapeMismatch, "tensor dims describe " + std::to_string(count) + " values, got " +
                                                  std::to_string(values.size()));
    }
    w.u8(kTensorVersion);
    w.u8(kDtypeF32);
    w.u16(0);
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.u32(d);
    for (double v : values) {
        const auto f = static_cast<float>(v);
        if (!std::isfinite(v) || !std::isfinite(f)) throw Error(ErrorCode::NonFiniteValue, "tensor value not finite in f32");
        w.f32(f);
    }
}

inline Tensor decode_tensor_body(ByteReader& r) {
    const auto version = r.u8();
    if (version != kTensorVersion) {
        throw Error(ErrorCode::UnsupportedVersion, r.context() + ": tensor version " + std::to_string(version));
    }
    const auto dtype = r.u8();
    if (dtype != kDtypeF32) throw Error(ErrorCode::UnsupportedVersion, r.context() + ": dtype " + std::to_string(dtype));
    const auto reserved = r.u16();
    if (reserved != 0) throw Error(ErrorCode::UnsupportedVersion, r.context() + ": nonzero reserved field");
    const auto rank = r.u32();
    r.need(std::size_t{4} * rank);

    Tensor t;
    t.dims.reserve(rank);
    for (std::uint32_t i = 0; i < rank; ++i) t.dims.push_back(r.u32());
    const auto count = t.element_count();
    if (count > r.remaining() / 4) throw Error(ErrorCode::TruncatedFile, r.context() + ": payload shorter than dims");
    t.values.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const float f = r.f32();
        if (!std::isfinite(f)) throw Error(ErrorCode::NonFiniteValue, r.context() + ": non-finite payload value");
        t.values.push_back(static_cast<double>(f));
    }
    return t;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::DanglingPath, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

inline std::string encode_tensor(std::span<const double> values, std::span<const std::uint32_t> dims) {
    ByteWriter w;
    w.bytes(kTensorMagic, 4);
    encode_tensor_body(w, values, dims);
    return w.str();
}

inline Tensor decode_tensor(std::span<const char> bytes, const std::string& context) {
    ByteReader r(bytes, context);
    const auto magic = r.bytes(4);
    if (std::memcmp(magic.data(), kTensorMagic, 4) != 0) throw Error(ErrorCode::BadMagic, context + ": not a tensor file");
    auto t = decode_tensor_body(r);
    if (r.remaining() != 0) throw Error(ErrorCode::TrailingData, context + ": bytes after payload");
    return t;
}

inline void write_tensor(const std::filesystem::path& path, std::span<const double> values,
                         std::span<const std::uint32_t> dims) {
    write_file_bytes(path, encode_tensor(values, dims));
}

inline Tensor read_tensor(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode_tensor(bytes, path.string());
}

inline void write_vector(const std::filesystem::path& path, const Vector& v) {
    const std::uint32_t dims[] = {static_cast<std::uint32_t>(v.size())};
    write_tensor(path, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), dims);
}

/// Rows of equal length; an empty list is written as shape (0, dim).
inline void write_rows(const std::filesystem::path& path, std::span<const Vector> rows, Index dim) {
    std::vector<double> flat;
    flat.reserve(rows.size() * static_cast<std::size_t>(dim));
    for (const auto& row : rows) {
        if (row.size() != dim) throw Error(ErrorCode::DimMismatch, "row length differs from dim");
        flat.insert(flat.end(), row.data(), row.data() + row.size());
    }
    const std::uint32_t dims[] = {static_cast<std::uint32_t>(rows.size()), static_cast<std::uint32_t>(dim)};
    write_tensor(path, flat, dims);
}

/// Accepts rank 1 (D) or rank 2 with a single row (1, D).
inline Vector read_vector(const std::filesystem::path& path) {
    const auto t = read_tensor(path);
    if (!(t.dims.size() == 1 || (t.dims.size() == 2 && t.dims[0] == 1))) {
        throw Error(ErrorCode::ShapeMismatch, path.string() + ": expected a vector");
    }
    if (t.values.empty()) throw Error(ErrorCode::ShapeMismatch, path.string() + ": empty vector");
    return Eigen::Map<const Vector>(t.values.data(), static_cast<Index>(t.values.size()));
}

inline std::vector<Vector> read_rows(const std::filesystem::path& path) {
    const auto t = read_tensor(path);
    if (t.dims.size() != 2) throw Error(ErrorCode::ShapeMismatch, path.string() + ": expected a rank-2 tensor");
    std::vector<Vector> rows;
    const auto cols = static_cast<Index>(t.dims[1]);
    for (std::uint32_t i = 0; i < t.dims[0]; ++i) {
        rows.emplace_back(Eigen::Map<const Vector>(t.values.data() + i * t.dims[1], cols));
    }
    return rows;
}

}  // namespace mvs
