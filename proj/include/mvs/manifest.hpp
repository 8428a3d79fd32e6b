#pragma once

// Dataset manifests: line-oriented JSON. `manifest.jsonl` holds one query per
// line, `gallery.jsonl` (same directory) one gallery entry per line. Tensor
// paths are relative to the manifest's directory.
//
//   {"id", "split", "patches", "cls", "instances" (path or null), "text_mod",
//    "text_retained", "text_deleted", "text_target", "target_id"}
//   {"id", "embedding"}

#include "mvs/retrieval.hpp"
#include "mvs/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mvs {

inline constexpr const char* kManifestName = "manifest.jsonl";
inline constexpr const char* kGalleryName = "gallery.jsonl";

struct LoadedManifest {
    Dataset data;
    std::vector<std::string> warnings;
};

/// `path` may be the data directory or the manifest file itself.
inline std::filesystem::path manifest_path(const std::filesystem::path& path) {
    return std::filesystem::is_directory(path) ? path / kManifestName : path;
}

namespace detail {

inline std::string location(const std::filesystem::path& file, std::size_t line) {
    return file.filename().string() + ":" + std::to_string(line);
}

inline std::string required_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_string()) {
        throw Error(ErrorCode::BadManifest, where + ": missing string field '" + key + "'");
    }
    auto s = obj.at(key).get<std::string>();
    if (s.empty()) throw Error(ErrorCode::BadManifest, where + ": empty field '" + key + "'");
    return s;
}

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (!known.count(key)) throw Error(ErrorCode::BadManifest, where + ": unknown field '" + key + "'");
    }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel,
                                     const std::string& where) {
    const auto p = base / rel;
    if (!std::filesystem::is_regular_file(p)) {
        throw Error(ErrorCode::DanglingPath, where + ": referenced file does not exist: " + rel);
    }
    return p;
}

template <class F>
void for_each_json_line(const std::filesystem::path& file, F&& f) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::DanglingPath, "cannot open " + file.string());
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = location(file, number);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::BadManifest, where + ": " + e.what());
        }
        if (!obj.is_object()) throw Error(ErrorCode::BadManifest, where + ": expected a JSON object");
        f(obj, where);
    }
}

inline void check_dim(Index got, Index& dim, const std::string& where, const char* what) {
    if (dim == 0) dim = got;
    if (got != dim) {
        throw Error(ErrorCode::DimMismatch, where + ": " + what + " has dimension " + std::to_string(got) +
                                                ", expected " + std::to_string(dim));
    }
}

}  // namespace detail

inline LoadedManifest load_manifest(const std::filesystem::path& path) {
    const auto manifest = manifest_path(path);
    const auto base = manifest.parent_path();
    const auto gallery_file = base / kGalleryName;
    if (!std::filesystem::is_regular_file(manifest)) throw Error(ErrorCode::DanglingPath, "no manifest at " + manifest.string());
    if (!std::filesystem::is_regular_file(gallery_file)) {
        throw Error(ErrorCode::DanglingPath, "no gallery file next to " + manifest.string());
    }

    LoadedManifest out;
    auto& data = out.data;
    Index dim = 0;

    std::set<std::string> gallery_ids;
    detail::for_each_json_line(gallery_file, [&](const nlohmann::json& obj, const std::string& where) {
        detail::reject_unknown(obj, {"id", "embedding"}, where);
        GalleryEntry g;
        g.id = detail::required_string(obj, "id", where);
        if (!gallery_ids.insert(g.id).second) throw Error(ErrorCode::DuplicateId, where + ": duplicate gallery id " + g.id);
        g.embedding = read_vector(detail::resolve(base, detail::required_string(obj, "embedding", where), where));
        detail::check_dim(g.embedding.size(), dim, where, "embedding");
        data.gallery.push_back(std::move(g));
    });

    std::map<std::string, std::set<std::string>> ids_per_split;
    detail::for_each_json_line(manifest, [&](const nlohmann::json& obj, const std::string& where) {
        detail::reject_unknown(obj,
                               {"id", "split", "patches", "cls", "instances", "text_mod", "text_retained",
                                "text_deleted", "text_target", "target_id"},
                               where);
        QuerySample s;
        s.id = detail::required_string(obj, "id", where);
        s.split = detail::required_string(obj, "split", where);
        if (s.split != "train" && s.split != "val" && s.split != "test") {
            throw Error(ErrorCode::BadManifest, where + ": split must be train, val or test");
        }
        if (!ids_per_split[s.split].insert(s.id).second) {
            throw Error(ErrorCode::DuplicateId, where + ": duplicate id " + s.id + " in split " + s.split);
        }
        s.target_id = detail::required_string(obj, "target_id", where);
        if (!gallery_ids.count(s.target_id)) {
            throw Error(ErrorCode::UnresolvedTarget, where + ": target_id " + s.target_id + " not in gallery");
        }

        auto vec = [&](const char* key) {
            auto v = read_vector(detail::resolve(base, detail::required_string(obj, key, where), where));
            detail::check_dim(v.size(), dim, where, key);
            return v;
        };
        s.patch_set.patches = read_rows(detail::resolve(base, detail::required_string(obj, "patches", where), where));
        if (s.patch_set.patches.empty()) throw Error(ErrorCode::BadManifest, where + ": patch set is empty");
        detail::check_dim(s.patch_set.patches.front().size(), dim, where, "patches");
        s.patch_set.cls = vec("cls");

        if (!obj.contains("instances")) throw Error(ErrorCode::BadManifest, where + ": missing field 'instances'");
        const auto& inst = obj.at("instances");
        if (!inst.is_null()) {
            if (!inst.is_string()) throw Error(ErrorCode::BadManifest, where + ": instances must be a path or null");
            auto rows = read_rows(detail::resolve(base, inst.get<std::string>(), where));
            if (!rows.empty()) detail::check_dim(rows.front().size(), dim, where, "instances");
            s.instance_set.instances = std::move(rows);
        }
        if (s.instance_set.empty()) out.warnings.push_back(where + ": sample " + s.id + " has no instances");

        s.s_mt = vec("text_mod");
        s.r_rt = vec("text_retained");
        s.r_dt = vec("text_deleted");
        s.r_tt = vec("text_target");
        data.samples.push_back(std::move(s));
    });

    data.dim = dim;
    return out;
}

}  // namespace mvs
