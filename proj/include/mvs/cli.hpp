#pragma once

// Command-line surface: synth, train, eval, retrieve, gradcheck, inspect.
// Exit codes: 0 success, 1 usage or validation failure, 2 internal error.
// Reports go to `out` as JSON; resolved configuration and diagnostics go to `err`.

#include "mvs/gradcheck.hpp"
#include "mvs/inspect.hpp"
#include "mvs/manifest.hpp"
#include "mvs/model_pack.hpp"
#include "mvs/synth.hpp"
#include "mvs/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace mvs::cli {

inline nlohmann::ordered_json report_json(const RecallReport& r, const std::string& split) {
    nlohmann::ordered_json j;
    j["split"] = split;
    j["queries"] = r.query_count;
    for (std::size_t i = 0; i < r.ks.size(); ++i) j["R@" + std::to_string(r.ks[i])] = r.recalls[i];
    j["Avg"] = r.mean;
    return j;
}

inline RunConfig load_config_file(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::DanglingPath, "cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadConfig, path + ": " + e.what());
    }
    return config_from_json(j);
}

inline const QuerySample& find_query(const Dataset& data, const std::string& id) {
    const QuerySample* found = nullptr;
    for (const auto& s : data.samples) {
        if (s.id != id) continue;
        if (found) throw Error(ErrorCode::DuplicateId, "query id " + id + " occurs in several splits");
        found = &s;
    }
    if (!found) throw Error(ErrorCode::BadConfig, "no query with id " + id);
    return *found;
}

inline void echo_config(std::ostream& err, const nlohmann::ordered_json& config) {
    err << "config: " << config.dump() << '\n';
}

inline Dataset load_data(const std::string& path, std::ostream& err) {
    auto loaded = load_manifest(path);
    for (const auto& w : loaded.warnings) err << "warning: " << w << '\n';
    return std::move(loaded.data);
}

inline ModelPack load_model_for(const std::string& path, const Dataset& data, std::ostream& err) {
    auto pack = load_model_pack(path);
    echo_config(err, to_json(pack.config));
    if (pack.model.dim != data.dim) {
        throw Error(ErrorCode::DimMismatch, "model dimension " + std::to_string(pack.model.dim) +
                                                " does not match data dimension " + std::to_string(data.dim));
    }
    return pack;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Composed image retrieval fusion engine", "mvs"};
    app.require_subcommand(1);

    SynthSpec synth;
    std::string synth_out, plant = "equal";
    auto* synth_cmd = app.add_subcommand("synth", "Write a planted retrieval fixture");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--seed", synth.seed, "Random seed");
    synth_cmd->add_option("--dim", synth.dim, "Embedding dimension");
    synth_cmd->add_option("--train-n", synth.n_train, "Training queries");
    synth_cmd->add_option("--eval-n", synth.n_eval, "Evaluation queries");
    synth_cmd->add_option("--gallery-extra", synth.gallery_extra, "Distractor gallery entries");
    synth_cmd->add_option("--patches", synth.patches, "Patches per reference image");
    synth_cmd->add_option("--instances", synth.instances, "Instances per reference image");
    synth_cmd->add_option("--noise", synth.noise_sigma, "Target noise scale");
    synth_cmd->add_option("--plant", plant, "equal or skewed");

    std::string data_path, config_path, model_path, log_path, split = "test", query_id, out_path;
    auto* train_cmd = app.add_subcommand("train", "Train the fusion parameters");
    train_cmd->add_option("--data", data_path, "Data directory or manifest")->required();
    train_cmd->add_option("--config", config_path, "JSON run config");
    train_cmd->add_option("--out-model", model_path, "Model pack to write")->required();
    train_cmd->add_option("--log", log_path, "Per-epoch JSON lines log");

    std::vector<int> ks{1, 5, 10, 50};
    auto* eval_cmd = app.add_subcommand("eval", "Recall@K of a model on one split");
    eval_cmd->add_option("--data", data_path)->required();
    eval_cmd->add_option("--model", model_path)->required();
    eval_cmd->add_option("--split", split);
    eval_cmd->add_option("--k", ks, "Comma-separated cutoffs")->delimiter(',');
    eval_cmd->add_option("--out", out_path, "Also write the report here");

    int top = 10;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank the gallery for one query");
    retrieve_cmd->add_option("--data", data_path)->required();
    retrieve_cmd->add_option("--model", model_path)->required();
    retrieve_cmd->add_option("--query-id", query_id)->required();
    retrieve_cmd->add_option("--top", top)->check(CLI::PositiveNumber);

    GradcheckOptions gc;
    double tol = 1e-6;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of all reverse passes");
    grad_cmd->add_option("--seed", gc.seed);
    grad_cmd->add_option("--dim", gc.dim)->check(CLI::PositiveNumber);
    grad_cmd->add_option("--hidden", gc.hidden)->check(CLI::PositiveNumber);
    grad_cmd->add_option("--eps", gc.step, "Finite-difference step")->check(CLI::PositiveNumber);
    grad_cmd->add_option("--tol", tol, "Maximum relative error");

    auto* inspect_cmd = app.add_subcommand("inspect", "Dump attention weights of one query as CSV");
    inspect_cmd->add_option("--data", data_path)->required();
    inspect_cmd->add_option("--model", model_path)->required();
    inspect_cmd->add_option("--query-id", query_id)->required();
    inspect_cmd->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (*synth_cmd) {
            synth.plant = parse_plant(plant);
            echo_config(err, to_json(synth));
            const auto data = synth_dataset(synth, synth_out);
            out << nlohmann::ordered_json{{"out", synth_out},
                                          {"samples", data.samples.size()},
                                          {"gallery", data.gallery.size()}}
                       .dump()
                << '\n';
        } else if (*train_cmd) {
            auto cfg = load_config_file(config_path);
            const auto data = load_data(data_path, err);
            echo_config(err, to_json(cfg));
            std::ofstream log;
            if (!log_path.empty()) {
                log.open(log_path, std::ios::trunc);
                if (!log) throw Error(ErrorCode::IoFailure, "cannot write log " + log_path);
            }
            auto result = train(data, cfg, [&](const EpochLog& e) {
                nlohmann::ordered_json line{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}};
                if (e.recalls) line["recalls"] = report_json(*e.recalls, cfg.eval_split);
                if (log) log << line.dump() << '\n';
            });
            if (result.log.empty_instance_samples > 0) {
                err << "warning: " << result.log.empty_instance_samples
                    << " training samples have no instances; their instance stream is zero\n";
            }
            err << "wall_seconds: " << result.log.wall_seconds << '\n';
            save_model_pack(model_path, result.model, cfg);
            out << nlohmann::ordered_json{{"model", model_path},
                                          {"epochs", result.log.epochs.size()},
                                          {"final_loss", result.log.epochs.back().mean_loss}}
                       .dump()
                << '\n';
        } else if (*eval_cmd) {
            const auto data = load_data(data_path, err);
            const auto pack = load_model_for(model_path, data, err);
            const auto ev = evaluate(data, split, pack.model, ks, pack.config.minmax_eps);
            if (ev.empty_instance_samples > 0) {
                err << "warning: " << ev.empty_instance_samples << " queries have no instances\n";
            }
            const auto report = report_json(ev.report, split).dump();
            out << report << '\n';
            if (!out_path.empty()) write_file_bytes(out_path, report + "\n");
        } else if (*retrieve_cmd) {
            const auto data = load_data(data_path, err);
            const auto pack = load_model_for(model_path, data, err);
            const auto& sample = find_query(data, query_id);
            const auto candidates = candidate_gallery(data, sample.split);
            const auto q = fusion_forward(pack.model, compute_streams(sample, pack.config.minmax_eps)).q;
            const auto ranked = rank(sample.id, q, candidates);
            const auto n = std::min<std::size_t>(static_cast<std::size_t>(top), ranked.ordered_gallery_ids.size());
            nlohmann::ordered_json results = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < n; ++i) {
                results.push_back({{"rank", i + 1}, {"id", ranked.ordered_gallery_ids[i]}, {"score", ranked.scores[i]}});
            }
            out << nlohmann::ordered_json{{"query_id", sample.id},
                                          {"split", sample.split},
                                          {"target_id", sample.target_id},
                                          {"results", results}}
                       .dump()
                << '\n';
        } else if (*grad_cmd) {
            echo_config(err, {{"seed", gc.seed}, {"dim", gc.dim}, {"hidden", gc.hidden}, {"eps", gc.step}, {"tol", tol}});
            const auto cases = run_gradcheck(gc);
            bool ok = true;
            nlohmann::ordered_json report = nlohmann::ordered_json::array();
            for (const auto& c : cases) {
                ok = ok && c.max_rel_error <= tol;
                report.push_back({{"case", c.name}, {"entries", c.entries}, {"max_rel_error", c.max_rel_error}});
            }
            out << nlohmann::ordered_json{{"pass", ok}, {"cases", report}}.dump() << '\n';
            return ok ? 0 : 1;
        } else if (*inspect_cmd) {
            const auto data = load_data(data_path, err);
            const auto pack = load_model_for(model_path, data, err);
            const auto& sample = find_query(data, query_id);
            std::ofstream csv(out_path, std::ios::trunc);
            if (!csv) throw Error(ErrorCode::IoFailure, "cannot write " + out_path);
            write_inspect_csv(csv, sample, pack.model, pack.config.minmax_eps);
            if (!csv) throw Error(ErrorCode::IoFailure, "failed writing " + out_path);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace mvs::cli
