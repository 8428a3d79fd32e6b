#pragma once

// Planted retrieval fixtures. Every feature is a unit-normalized Gaussian
// draw; the retained/deleted texts point near two distinct patches so that
// the selection weights carry signal; each target embedding is a fixed
// weighted mix of the selected visual streams and the two texts plus noise.
//
//   equal:  (patch, instance, mod text, target text) weights 1/4 each
//   skewed: weights (0.7, 0.1, 0.1, 0.1); an equal-weight sum cannot match it

#include "mvs/manifest.hpp"
#include "mvs/random.hpp"
#include "mvs/selection.hpp"
#include "mvs/tensor_io.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace mvs {

enum class Plant { Equal, Skewed };

inline Plant parse_plant(std::string_view s) {
    if (s == "equal") return Plant::Equal;
    if (s == "skewed") return Plant::Skewed;
    throw Error(ErrorCode::BadConfig, "plant must be equal or skewed, got '" + std::string(s) + "'");
}

inline std::string_view to_string(Plant p) { return p == Plant::Equal ? "equal" : "skewed"; }

inline std::array<double, 4> plant_weights(Plant p) {
    if (p == Plant::Equal) return {0.25, 0.25, 0.25, 0.25};
    return {0.7, 0.1, 0.1, 0.1};
}

struct SynthSpec {
    std::uint64_t seed = 124;
    Index dim = 64;
    int n_train = 256;
    int n_eval = 64;
    int gallery_extra = 64;
    int patches = 8;
    int instances = 4;
    double noise_sigma = 0.05;
    Plant plant = Plant::Equal;
    std::string eval_split = "test";

    void validate() const {
        if (dim < 2) throw Error(ErrorCode::BadConfig, "synth dim must be >= 2");
        if (n_train < 1 || n_eval < 1) throw Error(ErrorCode::BadConfig, "synth sample counts must be >= 1");
        if (gallery_extra < 0 || instances < 0) throw Error(ErrorCode::BadConfig, "synth counts must be >= 0");
        if (patches < 2) throw Error(ErrorCode::BadConfig, "synth needs at least 2 patches per sample");
        if (noise_sigma < 0.0) throw Error(ErrorCode::BadConfig, "noise must be >= 0");
        if (eval_split != "val" && eval_split != "test") throw Error(ErrorCode::BadConfig, "eval split must be val or test");
    }
};

inline nlohmann::ordered_json to_json(const SynthSpec& s) {
    return {{"seed", s.seed},       {"dim", s.dim},           {"train_n", s.n_train},
            {"eval_n", s.n_eval},   {"gallery_extra", s.gallery_extra}, {"patches", s.patches},
            {"instances", s.instances}, {"noise", s.noise_sigma}, {"plant", to_string(s.plant)}};
}

namespace detail {

/// Values are rounded through f32 so the planted targets are computed from
/// exactly what a reader will load.
inline Vector as_stored(Vector v) {
    for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(static_cast<float>(v[i]));
    return v;
}

inline Vector unit_gaussian(Rng& rng, Index dim) {
    Vector v(dim);
    double n = 0.0;
    do {
        for (Index i = 0; i < dim; ++i) v[i] = rng.normal();
        n = v.norm();
    } while (n == 0.0);
    return v / n;
}

inline Vector normalized(const Vector& v) {
    const double n = v.norm();
    if (n == 0.0) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
    return v / n;
}

inline std::string numbered(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%06d", prefix, i);
    return buf;
}

inline constexpr std::uint64_t kSampleStream = 0x73616d706c65ULL;
inline constexpr std::uint64_t kDistractorStream = 0x6469737472ULL;

}  // namespace detail

/// Writes manifest.jsonl, gallery.jsonl and the tensors under `out_dir`.
/// Returns the dataset exactly as load_manifest will read it back.
inline Dataset synth_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir / "tensors", ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (out_dir / "tensors").string() + ": " + ec.message());
    fs::create_directories(out_dir / "gallery", ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (out_dir / "gallery").string() + ": " + ec.message());

    const auto w = plant_weights(spec.plant);
    const Index d = spec.dim;
    Dataset data;
    data.dim = d;

    std::ofstream manifest(out_dir / kManifestName, std::ios::trunc);
    std::ofstream gallery(out_dir / kGalleryName, std::ios::trunc);
    if (!manifest || !gallery) throw Error(ErrorCode::IoFailure, "cannot write manifests under " + out_dir.string());

    auto add_gallery = [&](const std::string& id, const Vector& embedding) {
        const auto rel = "gallery/" + id + ".mvst";
        write_vector(out_dir / rel, embedding);
        nlohmann::ordered_json line{{"id", id}, {"embedding", rel}};
        gallery << line.dump() << '\n';
        data.gallery.push_back({id, embedding});
    };

    const int total = spec.n_train + spec.n_eval;
    for (int i = 0; i < total; ++i) {
        Rng rng(derive_seed(spec.seed, detail::kSampleStream, static_cast<std::uint64_t>(i)));
        QuerySample s;
        s.id = detail::numbered("q", i);
        s.split = i < spec.n_train ? "train" : spec.eval_split;
        s.target_id = detail::numbered("t", i);

        s.patch_set.cls = detail::as_stored(detail::unit_gaussian(rng, d));
        for (int p = 0; p < spec.patches; ++p) s.patch_set.patches.push_back(detail::as_stored(detail::unit_gaussian(rng, d)));
        for (int m = 0; m < spec.instances; ++m) {
            s.instance_set.instances.push_back(detail::as_stored(detail::unit_gaussian(rng, d)));
        }
        s.s_mt = detail::as_stored(detail::unit_gaussian(rng, d));
        s.r_tt = detail::as_stored(detail::unit_gaussian(rng, d));

        const auto n = static_cast<std::uint64_t>(spec.patches);
        const auto j1 = rng.below(n);
        auto j2 = rng.below(n - 1);
        if (j2 >= j1) ++j2;
        s.r_rt = detail::as_stored(
            detail::normalized(s.patch_set.patches[j1] + 0.1 * detail::unit_gaussian(rng, d)));
        s.r_dt = detail::as_stored(
            detail::normalized(s.patch_set.patches[j2] + 0.1 * detail::unit_gaussian(rng, d)));

        const Vector v_p = pvrs_select(s.patch_set, s.r_rt, s.r_dt);
        const Vector v_i = ivrs_select(s.instance_set, s.r_rt, s.r_dt, d);
        const Vector noise = detail::unit_gaussian(rng, d);
        const Vector target = detail::as_stored(detail::normalized(
            w[0] * v_p + w[1] * v_i + w[2] * s.s_mt + w[3] * s.r_tt + spec.noise_sigma * noise));

        const auto stem = "tensors/" + s.id;
        write_rows(out_dir / (stem + ".patches.mvst"), s.patch_set.patches, d);
        write_vector(out_dir / (stem + ".cls.mvst"), s.patch_set.cls);
        nlohmann::ordered_json line{{"id", s.id}, {"split", s.split}, {"patches", stem + ".patches.mvst"},
                                    {"cls", stem + ".cls.mvst"}};
        if (spec.instances > 0) {
            write_rows(out_dir / (stem + ".instances.mvst"), s.instance_set.instances, d);
            line["instances"] = stem + ".instances.mvst";
        } else {
            line["instances"] = nullptr;
        }
        const std::pair<const char*, const Vector*> texts[] = {
            {"text_mod", &s.s_mt}, {"text_retained", &s.r_rt}, {"text_deleted", &s.r_dt}, {"text_target", &s.r_tt}};
        for (const auto& [key, vec] : texts) {
            const auto rel = stem + "." + key + ".mvst";
            write_vector(out_dir / rel, *vec);
            line[key] = rel;
        }
        line["target_id"] = s.target_id;
        manifest << line.dump() << '\n';

        add_gallery(s.target_id, target);
        data.samples.push_back(std::move(s));
    }

    for (int i = 0; i < spec.gallery_extra; ++i) {
        Rng rng(derive_seed(spec.seed, detail::kDistractorStream, static_cast<std::uint64_t>(i)));
        add_gallery(detail::numbered("d", i), detail::as_stored(detail::unit_gaussian(rng, d)));
    }

    manifest.flush();
    gallery.flush();
    if (!manifest || !gallery) throw Error(ErrorCode::IoFailure, "failed writing manifests under " + out_dir.string());
    return data;
}

}  // namespace mvs
