#include "mvs/gradcheck.hpp"
#include "mvs/manifest.hpp"
#include "mvs/model_pack.hpp"
#include "mvs/synth.hpp"
#include "mvs/tensor_io.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

using mvs::ErrorCode;
using mvs::Vector;
namespace fs = std::filesystem;

namespace {

mvs::SynthSpec tiny_spec() {
    mvs::SynthSpec s;
    s.dim = 8;
    s.n_train = 4;
    s.n_eval = 2;
    s.gallery_extra = 2;
    s.patches = 3;
    s.instances = 2;
    return s;
}

std::string slurp(const fs::path& p) { return mvs::read_file_bytes(p); }

void replace_in_file(const fs::path& p, const std::string& from, const std::string& to) {
    auto text = slurp(p);
    const auto pos = text.find(from);
    ASSERT_NE(pos, std::string::npos) << from;
    text.replace(pos, from.size(), to);
    mvs::write_file_bytes(p, text);
}

std::vector<double> flatten(const mvs::FusionModel& m) {
    std::vector<double> v;
    m.for_each_combiner([&](const std::string&, const mvs::CombinerParams& c) {
        c.for_each_tensor([&](const std::string&, const auto& t) { v.insert(v.end(), t.data(), t.data() + t.size()); });
    });
    return v;
}

void round_to_f32(mvs::FusionModel& m) {
    m.for_each_combiner([](const std::string&, mvs::CombinerParams& c) {
        c.for_each_tensor([](const std::string&, auto& t) {
            for (mvs::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<double>(static_cast<float>(t.data()[i]));
        });
    });
}

}  // namespace

TEST(TensorFile, LayoutOfSmallVector) {
    const std::vector<double> values{1.0, -2.5};
    const std::uint32_t dims[] = {2};
    const auto bytes = mvs::encode_tensor(values, dims);
    ASSERT_EQ(bytes.size(), 24u);
    EXPECT_EQ(bytes.substr(0, 4), "MVST");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5], 1);
    EXPECT_EQ(bytes[6], 0);
    EXPECT_EQ(bytes[7], 0);
    std::uint32_t rank = 0, d0 = 0;
    std::memcpy(&rank, bytes.data() + 8, 4);
    std::memcpy(&d0, bytes.data() + 12, 4);
    EXPECT_EQ(rank, 1u);
    EXPECT_EQ(d0, 2u);
    float f = 0;
    std::memcpy(&f, bytes.data() + 20, 4);
    EXPECT_EQ(f, -2.5f);
}

TEST(TensorFile, RoundTrip) {
    const auto dir = oracle::temp_dir("tensor_rt");
    mvs::Rng rng(4);
    std::vector<double> values;
    for (int i = 0; i < 12; ++i) values.push_back(static_cast<float>(rng.uniform(-3, 3)));
    const std::uint32_t dims[] = {3, 4};
    mvs::write_tensor(dir / "a.mvst", values, dims);
    const auto t = mvs::read_tensor(dir / "a.mvst");
    EXPECT_EQ(t.values, values);
    EXPECT_EQ(t.dims, (std::vector<std::uint32_t>{3, 4}));
    const auto rows = mvs::read_rows(dir / "a.mvst");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][2], values[6]);

    mvs::write_rows(dir / "empty.mvst", std::vector<Vector>{}, 8);
    EXPECT_EQ(mvs::read_tensor(dir / "empty.mvst").dims, (std::vector<std::uint32_t>{0, 8}));
    EXPECT_TRUE(mvs::read_rows(dir / "empty.mvst").empty());
}

TEST(TensorFile, RejectsCorruptInput) {
    const std::vector<double> values{1.0, 2.0};
    const std::uint32_t dims[] = {2};
    const auto good = mvs::encode_tensor(values, dims);
    auto check = [](std::string bytes) {
        return oracle::code_of([&] { mvs::decode_tensor(bytes, "t"); });
    };
    EXPECT_EQ(check("XVST" + good.substr(4)), ErrorCode::BadMagic);
    EXPECT_EQ(check(good.substr(0, 22)), ErrorCode::TruncatedFile);
    EXPECT_EQ(check(good.substr(0, 10)), ErrorCode::TruncatedFile);
    EXPECT_EQ(check(good + "x"), ErrorCode::TrailingData);
    auto v2 = good;
    v2[4] = 2;
    EXPECT_EQ(check(v2), ErrorCode::UnsupportedVersion);
    auto dt = good;
    dt[5] = 2;
    EXPECT_EQ(check(dt), ErrorCode::UnsupportedVersion);
    auto nan = good;
    const float bad = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan.data() + 16, &bad, 4);
    EXPECT_EQ(check(nan), ErrorCode::NonFiniteValue);

    const std::vector<double> inf{std::numeric_limits<double>::infinity()};
    const std::uint32_t one[] = {1};
    EXPECT_EQ(oracle::code_of([&] { mvs::encode_tensor(inf, one); }), ErrorCode::NonFiniteValue);
    const std::vector<double> huge{1e300};
    EXPECT_EQ(oracle::code_of([&] { mvs::encode_tensor(huge, one); }), ErrorCode::NonFiniteValue);
    EXPECT_EQ(oracle::code_of([] { mvs::read_tensor("/nonexistent/x.mvst"); }), ErrorCode::DanglingPath);
}

TEST(ModelPack, RoundTripIsExactOnStoredPrecision) {
    const auto dir = oracle::temp_dir("pack_rt");
    for (int row = 1; row <= 8; ++row) {
        mvs::RunConfig cfg;
        cfg.variant = mvs::ablation_row(row);
        cfg.tau = 0.07;
        auto model = mvs::init_fusion(cfg.variant, 6, 24, 11);
        round_to_f32(model);
        const auto path = dir / ("m" + std::to_string(row) + ".mvsp");
        mvs::save_model_pack(path, model, cfg);
        const auto pack = mvs::load_model_pack(path);
        EXPECT_EQ(flatten(pack.model), flatten(model));
        EXPECT_EQ(pack.config.tau, 0.07);
        EXPECT_EQ(pack.config.dim, 6);
        EXPECT_EQ(pack.config.hidden, 24);
        EXPECT_TRUE(pack.config.variant == cfg.variant);

        mvs::Rng rng(row);
        mvs::QueryStreams s = mvs::random_streams(rng, 6);
        EXPECT_EQ(mvs::fusion_forward(pack.model, s).q, mvs::fusion_forward(model, s).q);

        const auto again = dir / ("again" + std::to_string(row) + ".mvsp");
        mvs::save_model_pack(again, pack.model, pack.config);
        EXPECT_EQ(slurp(path), slurp(again));
    }
}

TEST(ModelPack, RejectsCorruptInput) {
    const auto model = mvs::init_fusion(mvs::ablation_row(7), 4, 8, 1);
    const auto good = mvs::encode_model_pack(model, {});
    auto check = [](const std::string& bytes) { return oracle::code_of([&] { mvs::decode_model_pack(bytes, "p"); }); };
    EXPECT_EQ(check("MVST" + good.substr(4)), ErrorCode::BadMagic);
    EXPECT_EQ(check(good.substr(0, good.size() - 3)), ErrorCode::TruncatedFile);
    EXPECT_EQ(check(good + "!"), ErrorCode::TrailingData);
    auto version = good;
    version[4] = 9;
    EXPECT_EQ(check(version), ErrorCode::UnsupportedVersion);

    // A pack whose config says the model is 5-dimensional but whose tensors are 4-dimensional.
    auto wrong_dim = good;
    const auto pos = wrong_dim.find("\"dim\":4");
    ASSERT_NE(pos, std::string::npos);
    wrong_dim[pos + 6] = '5';
    EXPECT_EQ(check(wrong_dim), ErrorCode::ShapeMismatch);
}

TEST(Manifest, LoadsSynthFixture) {
    const auto dir = oracle::temp_dir("manifest_ok");
    const auto written = mvs::synth_dataset(tiny_spec(), dir);
    const auto loaded = mvs::load_manifest(dir);
    EXPECT_TRUE(loaded.warnings.empty());
    EXPECT_EQ(loaded.data.dim, 8);
    ASSERT_EQ(loaded.data.samples.size(), written.samples.size());
    ASSERT_EQ(loaded.data.gallery.size(), written.gallery.size());
    for (std::size_t i = 0; i < written.samples.size(); ++i) {
        const auto& a = written.samples[i];
        const auto& b = loaded.data.samples[i];
        EXPECT_EQ(a.id, b.id);
        EXPECT_EQ(a.split, b.split);
        EXPECT_EQ(a.target_id, b.target_id);
        EXPECT_EQ(a.patch_set.cls, b.patch_set.cls);
        EXPECT_EQ(a.patch_set.patches, b.patch_set.patches);
        EXPECT_EQ(a.instance_set.instances, b.instance_set.instances);
        EXPECT_EQ(a.r_rt, b.r_rt);
        EXPECT_EQ(a.r_tt, b.r_tt);
    }
    for (std::size_t i = 0; i < written.gallery.size(); ++i) {
        EXPECT_EQ(written.gallery[i].embedding, loaded.data.gallery[i].embedding);
    }
    EXPECT_EQ(mvs::load_manifest(dir / "manifest.jsonl").data.samples.size(), written.samples.size());
}

TEST(Manifest, UnresolvedTargetNamesTheId) {
    const auto dir = oracle::temp_dir("manifest_target");
    mvs::synth_dataset(tiny_spec(), dir);
    replace_in_file(dir / "manifest.jsonl", "\"target_id\":\"t-000002\"", "\"target_id\":\"t-999999\"");
    try {
        mvs::load_manifest(dir);
        FAIL();
    } catch (const mvs::Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnresolvedTarget);
        EXPECT_NE(std::string(e.what()).find("t-999999"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("manifest.jsonl:3"), std::string::npos);
    }
}

TEST(Manifest, DimensionMismatch) {
    const auto dir = oracle::temp_dir("manifest_dim");
    mvs::synth_dataset(tiny_spec(), dir);
    mvs::write_vector(dir / "tensors/q-000001.text_mod.mvst", Vector::Ones(16));
    EXPECT_EQ(oracle::code_of([&] { mvs::load_manifest(dir); }), ErrorCode::DimMismatch);
}

TEST(Manifest, DuplicateIds) {
    const auto dir = oracle::temp_dir("manifest_dup");
    mvs::synth_dataset(tiny_spec(), dir);
    replace_in_file(dir / "manifest.jsonl", "\"id\":\"q-000001\"", "\"id\":\"q-000000\"");
    EXPECT_EQ(oracle::code_of([&] { mvs::load_manifest(dir); }), ErrorCode::DuplicateId);

    const auto dir2 = oracle::temp_dir("manifest_dup_gallery");
    mvs::synth_dataset(tiny_spec(), dir2);
    replace_in_file(dir2 / "gallery.jsonl", "\"id\":\"d-000001\"", "\"id\":\"d-000000\"");
    EXPECT_EQ(oracle::code_of([&] { mvs::load_manifest(dir2); }), ErrorCode::DuplicateId);
}

TEST(Manifest, DanglingPathAndBadFields) {
    const auto dir = oracle::temp_dir("manifest_dangling");
    mvs::synth_dataset(tiny_spec(), dir);
    fs::remove(dir / "tensors/q-000003.cls.mvst");
    EXPECT_EQ(oracle::code_of([&] { mvs::load_manifest(dir); }), ErrorCode::DanglingPath);
    EXPECT_EQ(oracle::code_of([&] { mvs::load_manifest(dir / "missing"); }), ErrorCode::DanglingPath);

    const auto dir2 = oracle::temp_dir("manifest_fields");
    mvs::synth_dataset(tiny_spec(), dir2);
    replace_in_file(dir2 / "manifest.jsonl", "\"split\":\"train\"", "\"split\":\"dev\"");
    EXPECT_EQ(oracle::code_of([&] { mvs::load_manifest(dir2); }), ErrorCode::BadManifest);

    const auto dir3 = oracle::temp_dir("manifest_unknown");
    mvs::synth_dataset(tiny_spec(), dir3);
    replace_in_file(dir3 / "manifest.jsonl", "\"split\":", "\"colour\":1,\"split\":");
    EXPECT_EQ(oracle::code_of([&] { mvs::load_manifest(dir3); }), ErrorCode::BadManifest);
}

TEST(Manifest, NullInstancesWarn) {
    const auto dir = oracle::temp_dir("manifest_null");
    auto spec = tiny_spec();
    spec.instances = 0;
    mvs::synth_dataset(spec, dir);
    const auto loaded = mvs::load_manifest(dir);
    EXPECT_EQ(loaded.warnings.size(), loaded.data.samples.size());
    for (const auto& s : loaded.data.samples) EXPECT_TRUE(s.instance_set.empty());
}

TEST(Synth, ByteIdenticalPerSeed) {
    const auto a = oracle::temp_dir("synth_a");
    const auto b = oracle::temp_dir("synth_b");
    const auto c = oracle::temp_dir("synth_c");
    mvs::synth_dataset(tiny_spec(), a);
    mvs::synth_dataset(tiny_spec(), b);
    auto other = tiny_spec();
    other.seed = 7;
    mvs::synth_dataset(other, c);
    std::size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        EXPECT_EQ(slurp(entry.path()), slurp(b / rel)) << rel;
        ++files;
    }
    EXPECT_GT(files, 10u);
    EXPECT_NE(slurp(a / "tensors/q-000000.cls.mvst"), slurp(c / "tensors/q-000000.cls.mvst"));
}

TEST(Synth, RejectsBadSpecs) {
    auto s = tiny_spec();
    s.patches = 1;
    EXPECT_EQ(oracle::code_of([&] { s.validate(); }), ErrorCode::BadConfig);
    s = tiny_spec();
    s.eval_split = "train";
    EXPECT_EQ(oracle::code_of([&] { s.validate(); }), ErrorCode::BadConfig);
    EXPECT_EQ(oracle::code_of([] { mvs::parse_plant("flat"); }), ErrorCode::BadConfig);
}

TEST(Config, RoundTripAndUnknownKeys) {
    mvs::RunConfig c;
    c.tau = 0.05;
    c.variant = mvs::ablation_row(5);
    c.init = mvs::InitMode::ZeroMlp;
    auto j = nlohmann::json(mvs::to_json(c));
    j["variant"].erase("name");
    const auto back = mvs::config_from_json(j);
    EXPECT_EQ(mvs::to_json(back), mvs::to_json(c));

    EXPECT_EQ(oracle::code_of([] { mvs::config_from_json({{"temperature", 0.1}}); }), ErrorCode::BadConfig);
    EXPECT_EQ(oracle::code_of([] { mvs::config_from_json({{"variant", {{"fusion", "whc"}, {"colour", 1}}}}); }),
              ErrorCode::BadConfig);
    EXPECT_EQ(oracle::code_of([] { mvs::config_from_json({{"tau", -1.0}}); }), ErrorCode::NonPositiveTau);
    EXPECT_TRUE(mvs::config_from_json({{"variant", 3}}).variant == mvs::ablation_row(3));

    const auto cirr = mvs::config_from_json({{"preset", "paper-CIRR"}});
    EXPECT_EQ(cirr.tau, 0.01);
    EXPECT_EQ(cirr.learning_rate, 1e-6);
    EXPECT_EQ(mvs::config_from_json({{"preset", "paper-CIRR"}, {"tau", 0.2}}).tau, 0.2);
}
