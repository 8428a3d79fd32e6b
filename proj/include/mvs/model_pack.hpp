#pragma once

// Model pack layout (little-endian):
//
//   "MVSP" | version u8 = 1 | entry count u32
//   | per entry: name length u16, UTF-8 name, tensor body (no magic)
//   | config length u32, UTF-8 JSON config echo
//
// Entry names are "<combiner>.<tensor>", e.g. "mod.proj.0" or "final.attn.bias".
// Matrices are stored row-major as rank-2 tensors, vectors as rank 1.

#include "mvs/config.hpp"
#include "mvs/fusion.hpp"
#include "mvs/tensor_io.hpp"

#include <map>
#include <set>

namespace mvs {

inline constexpr char kPackMagic[4] = {'M', 'V', 'S', 'P'};
inline constexpr std::uint8_t kPackVersion = 1;

struct ModelPack {
    FusionModel model;
    RunConfig config;
};

namespace detail {

template <class T>
void tensor_to_rows(const T& t, std::vector<double>& values, std::vector<std::uint32_t>& dims) {
    values.clear();
    dims.clear();
    if constexpr (T::ColsAtCompileTime == 1) {
        dims = {static_cast<std::uint32_t>(t.size())};
        values.assign(t.data(), t.data() + t.size());
    } else {
        dims = {static_cast<std::uint32_t>(t.rows()), static_cast<std::uint32_t>(t.cols())};
        for (Index r = 0; r < t.rows(); ++r)
            for (Index c = 0; c < t.cols(); ++c) values.push_back(t(r, c));
    }
}

template <class T>
void rows_to_tensor(const Tensor& src, T& t, const std::string& name) {
    if constexpr (T::ColsAtCompileTime == 1) {
        if (src.dims.size() != 1 || src.dims[0] != t.size()) {
            throw Error(ErrorCode::ShapeMismatch, "pack entry " + name + " has the wrong shape");
        }
        for (Index i = 0; i < t.size(); ++i) t[i] = src.values[static_cast<std::size_t>(i)];
    } else {
        if (src.dims.size() != 2 || src.dims[0] != t.rows() || src.dims[1] != t.cols()) {
            throw Error(ErrorCode::ShapeMismatch, "pack entry " + name + " has the wrong shape");
        }
        std::size_t k = 0;
        for (Index r = 0; r < t.rows(); ++r)
            for (Index c = 0; c < t.cols(); ++c) t(r, c) = src.values[k++];
    }
}

}  // namespace detail

inline std::string encode_model_pack(const FusionModel& model, const RunConfig& config) {
    RunConfig echo = config;
    echo.variant = model.variant;
    echo.dim = model.dim;
    echo.hidden = model.hidden;

    std::vector<std::pair<std::string, std::string>> entries;
    model.for_each_combiner([&](const std::string& cname, const CombinerParams& c) {
        c.for_each_tensor([&](const std::string& tname, const auto& t) {
            std::vector<double> values;
            std::vector<std::uint32_t> dims;
            detail::tensor_to_rows(t, values, dims);
            ByteWriter body;
            encode_tensor_body(body, values, dims);
            entries.emplace_back(cname + "." + tname, body.str());
        });
    });

    ByteWriter w;
    w.bytes(kPackMagic, 4);
    w.u8(kPackVersion);
    w.u32(static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, body] : entries) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.bytes(body.data(), body.size());
    }
    const auto json = to_json(echo).dump();
    w.u32(static_cast<std::uint32_t>(json.size()));
    w.bytes(json.data(), json.size());
    return w.str();
}

inline ModelPack decode_model_pack(std::span<const char> bytes, const std::string& context) {
    ByteReader r(bytes, context);
    const auto magic = r.bytes(4);
    if (std::memcmp(magic.data(), kPackMagic, 4) != 0) throw Error(ErrorCode::BadMagic, context + ": not a model pack");
    const auto version = r.u8();
    if (version != kPackVersion) {
        throw Error(ErrorCode::UnsupportedVersion, context + ": pack version " + std::to_string(version));
    }

    std::map<std::string, Tensor> entries;
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = r.u16();
        const auto name_bytes = r.bytes(len);
        std::string name(name_bytes.begin(), name_bytes.end());
        auto tensor = decode_tensor_body(r);
        if (!entries.emplace(name, std::move(tensor)).second) {
            throw Error(ErrorCode::DuplicateId, context + ": duplicate pack entry " + name);
        }
    }
    const auto json_len = r.u32();
    const auto json_bytes = r.bytes(json_len);
    if (r.remaining() != 0) throw Error(ErrorCode::TrailingData, context + ": bytes after config echo");

    nlohmann::json echo;
    try {
        echo = nlohmann::json::parse(json_bytes.begin(), json_bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadConfig, context + ": config echo: " + e.what());
    }
    // the echo carries the variant name for readers; it is derived, not a key
    if (echo.contains("variant") && echo["variant"].is_object()) echo["variant"].erase("name");

    ModelPack pack;
    pack.config = config_from_json(echo);
    if (pack.config.dim < 1) throw Error(ErrorCode::BadConfig, context + ": config echo lacks the model dimension");
    pack.model = init_fusion(pack.config.variant, pack.config.dim, pack.config.hidden_for(pack.config.dim), 0);

    std::set<std::string> used;
    pack.model.for_each_combiner([&](const std::string& cname, CombinerParams& c) {
        c.for_each_tensor([&](const std::string& tname, auto& t) {
            const auto name = cname + "." + tname;
            const auto it = entries.find(name);
            if (it == entries.end()) throw Error(ErrorCode::ShapeMismatch, context + ": missing pack entry " + name);
            detail::rows_to_tensor(it->second, t, name);
            used.insert(name);
        });
    });
    if (used.size() != entries.size()) {
        for (const auto& [name, _] : entries)
            if (!used.count(name)) throw Error(ErrorCode::ShapeMismatch, context + ": unexpected pack entry " + name);
    }
    return pack;
}

inline void save_model_pack(const std::filesystem::path& path, const FusionModel& model, const RunConfig& config) {
    write_file_bytes(path, encode_model_pack(model, config));
}

inline ModelPack load_model_pack(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode_model_pack(bytes, path.string());
}

}  // namespace mvs
