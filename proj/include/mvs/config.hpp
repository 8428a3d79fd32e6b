#pragma once

#include "mvs/combiner.hpp"
#include "mvs/fusion.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <set>
#include <string>

namespace mvs {

struct RunConfig {
    double tau = 0.1;
    int batch_size = 16;
    int epochs = 10;
    double learning_rate = 1e-4;
    std::uint64_t seed = 124;
    Index dim = 0;     // 0: taken from the data
    Index hidden = 0;  // 0: 4 * dim
    AblationVariant variant;
    InitMode init = InitMode::Xavier;
    std::string train_split = "train";
    std::string eval_split = "test";
    int eval_every = 0;  // 0: no evaluation during training
    double minmax_eps = 1e-12;

    void validate() const {
        if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTau, "tau must be > 0");
        if (batch_size < 1) throw Error(ErrorCode::BadConfig, "batch_size must be >= 1");
        if (epochs < 1) throw Error(ErrorCode::BadConfig, "epochs must be >= 1");
        if (!(learning_rate > 0.0)) throw Error(ErrorCode::BadConfig, "learning_rate must be > 0");
        if (dim < 0 || hidden < 0) throw Error(ErrorCode::BadConfig, "dim and hidden must be >= 0");
        if (eval_every < 0) throw Error(ErrorCode::BadConfig, "eval_every must be >= 0");
        if (!(minmax_eps > 0.0)) throw Error(ErrorCode::BadConfig, "minmax_eps must be > 0");
        variant.validate();
    }

    Index hidden_for(Index d) const { return hidden > 0 ? hidden : 4 * d; }
};

inline std::string_view to_string(InitMode m) { return m == InitMode::Xavier ? "xavier" : "zero_mlp"; }

inline nlohmann::ordered_json to_json(const AblationVariant& v) {
    return {{"fusion", to_string(v.fusion)},
            {"use_mod_text", v.use_mod_text},
            {"use_target_text", v.use_target_text},
            {"use_pvrs", v.use_pvrs},
            {"use_ivrs", v.use_ivrs}};
}

inline AblationVariant variant_from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) return ablation_row(j.get<int>());
    if (!j.is_object()) throw Error(ErrorCode::BadConfig, "variant must be an ablation row number or an object");
    static const std::set<std::string> known{"fusion", "use_mod_text", "use_target_text", "use_pvrs", "use_ivrs"};
    AblationVariant v;
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw Error(ErrorCode::BadConfig, "unknown variant key '" + key + "'");
        try {
            if (key == "fusion") v.fusion = parse_fusion_kind(value.get<std::string>());
            else if (key == "use_mod_text") v.use_mod_text = value.get<bool>();
            else if (key == "use_target_text") v.use_target_text = value.get<bool>();
            else if (key == "use_pvrs") v.use_pvrs = value.get<bool>();
            else if (key == "use_ivrs") v.use_ivrs = value.get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::BadConfig, "variant." + key + ": " + e.what());
        }
    }
    v.validate();
    return v;
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
    auto variant = to_json(c.variant);
    variant["name"] = c.variant.name();
    return {{"tau", c.tau},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"seed", c.seed},
            {"dim", c.dim},
            {"hidden", c.hidden},
            {"variant", variant},
            {"init", to_string(c.init)},
            {"train_split", c.train_split},
            {"eval_split", c.eval_split},
            {"eval_every", c.eval_every},
            {"minmax_eps", c.minmax_eps}};
}

/// Parses a config object. Unknown keys are rejected. A "preset" key applies
/// the reference temperatures and learning rates ("paper-CIRR": tau 0.01,
/// lr 1e-6; "paper-FashionIQ": tau 0.1, lr 1e-5) before explicit keys.
inline RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
    static const std::set<std::string> known{"tau",        "batch_size", "epochs",      "learning_rate", "seed",
                                             "dim",        "hidden",     "variant",     "init",          "train_split",
                                             "eval_split", "eval_every", "minmax_eps",  "preset"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw Error(ErrorCode::BadConfig, "unknown config key '" + key + "'");
    }

    RunConfig c;
    if (j.contains("preset")) {
        const auto preset = j.at("preset").get<std::string>();
        if (preset == "paper-CIRR") {
            c.tau = 0.01;
            c.learning_rate = 1e-6;
        } else if (preset == "paper-FashionIQ") {
            c.tau = 0.1;
            c.learning_rate = 1e-5;
        } else if (preset != "desk") {
            throw Error(ErrorCode::BadConfig, "unknown preset '" + preset + "'");
        }
    }

    try {
        if (j.contains("tau")) c.tau = j.at("tau").get<double>();
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
        if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("dim")) c.dim = j.at("dim").get<Index>();
        if (j.contains("hidden")) c.hidden = j.at("hidden").get<Index>();
        if (j.contains("variant")) c.variant = variant_from_json(j.at("variant"));
        if (j.contains("init")) {
            const auto init = j.at("init").get<std::string>();
            if (init == "xavier") c.init = InitMode::Xavier;
            else if (init == "zero_mlp") c.init = InitMode::ZeroMlp;
            else throw Error(ErrorCode::BadConfig, "unknown init '" + init + "'");
        }
        if (j.contains("train_split")) c.train_split = j.at("train_split").get<std::string>();
        if (j.contains("eval_split")) c.eval_split = j.at("eval_split").get<std::string>();
        if (j.contains("eval_every")) c.eval_every = j.at("eval_every").get<int>();
        if (j.contains("minmax_eps")) c.minmax_eps = j.at("minmax_eps").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadConfig, e.what());
    }
    c.validate();
    return c;
}

}  // namespace mvs
