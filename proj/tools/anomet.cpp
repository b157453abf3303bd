// anomet: contrastive metric-learning toolkit for open-set anomaly
// detection on multi-stream clip features. Subcommands cover the whole
// pipeline: synthetic data, training, evaluation with decision-level
// fusion, continuous stream scoring, and training-set-size sweeps.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anomet/config.hpp"
#include "anomet/data.hpp"
#include "anomet/encoder.hpp"
#include "anomet/errors.hpp"
#include "anomet/optimizer.hpp"
#include "anomet/pipeline.hpp"
#include "anomet/stream.hpp"
#include "anomet/text.hpp"

namespace {

namespace fs = std::filesystem;
using namespace anomet;

ConfigEntries gather_entries(const std::string& config_path,
                             const std::vector<std::string>& overrides) {
    ConfigEntries entries;
    if (!config_path.empty()) entries = parse_config_file(config_path);
    const ConfigEntries extra = parse_overrides(overrides);
    entries.insert(entries.end(), extra.begin(), extra.end());
    return entries;
}

std::string stream_suffix(View view, Modality modality) {
    return to_string(view) + "_" + to_string(modality);
}

int cmd_synth(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir, bool features_bin) {
    const SynthConfig cfg = make_synth_config(gather_entries(config_path, overrides));
    const DatasetSplit data = generate_synthetic(cfg);

    fs::create_directories(out_dir);
    const fs::path manifest = fs::path(out_dir) / "manifest.tsv";
    save_manifest(data, manifest, features_bin);
    std::cout << "wrote " << manifest.string() << " (" << data.train.size() << " train / "
              << data.test.size() << " test records)\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& manifest_path, const std::string& out_dir) {
    const TrainConfig cfg = make_train_config(gather_entries(config_path, overrides));
    const DatasetSplit data = load_manifest(manifest_path);

    fs::create_directories(out_dir);
    const std::string suffix = stream_suffix(cfg.view, cfg.modality);
    const fs::path checkpoint = fs::path(out_dir) / ("checkpoint_" + suffix + ".bin");
    const fs::path loss_csv = fs::path(out_dir) / ("loss_" + suffix + ".csv");

    try {
        const TrainResult result = train(cfg, data);
        save_checkpoint(result.params, checkpoint);
        write_loss_csv(loss_csv, result.history);
        std::cout << "wrote " << checkpoint.string() << " after " << result.history.size()
                  << " steps";
        if (!result.history.empty()) {
            std::cout << " (final loss " << fmt_real(result.history.back().loss) << ")";
        }
        std::cout << "\n";
        return 0;
    } catch (const TrainDivergenceError& e) {
        // Keep what we have: the last healthy parameters plus the history
        // leading up to the failure, then report the numerical abort.
        save_checkpoint(e.last_params, checkpoint);
        write_loss_csv(loss_csv, e.history);
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << "wrote last healthy state to " << checkpoint.string() << "\n";
        return 3;
    }
}

int cmd_eval(const std::vector<std::string>& checkpoint_specs, const std::string& manifest_path,
             const std::string& out_dir, const std::string& fuse_spec,
             std::optional<double> gamma, size_t smooth_k, size_t threads) {
    std::map<StreamKey, EncoderParams> models;
    for (const std::string& spec : checkpoint_specs) {
        const size_t eq = spec.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--checkpoint expects view:modality=path, got '" + spec + "'");
        }
        const StreamKey key = stream_key_from_string(spec.substr(0, eq));
        if (!models.emplace(key, load_checkpoint(spec.substr(eq + 1))).second) {
            throw UsageError("duplicate checkpoint for stream " + to_string(key));
        }
    }

    std::vector<StreamKey> fuse_keys;
    if (!fuse_spec.empty()) {
        for (const std::string& item : split_on(fuse_spec, ',')) {
            fuse_keys.push_back(stream_key_from_string(trim(item)));
        }
    }

    const DatasetSplit data = load_manifest(manifest_path);
    const EvalRunResult run = run_eval(models, data, fuse_keys, gamma, smooth_k, threads);

    fs::create_directories(out_dir);
    for (const auto& [key, result] : run.streams) {
        write_scores_csv(fs::path(out_dir) /
                             ("scores_" + stream_suffix(key.view, key.modality) + ".csv"),
                         result.rows);
    }
    if (run.fused) {
        write_scores_csv(fs::path(out_dir) / "scores_fused.csv", run.fused->rows);
    }
    const std::string doc = eval_run_to_json(run);
    const fs::path report = fs::path(out_dir) / "report.json";
    std::ofstream f(report, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + report.string() + " for writing");
    f << doc << "\n";
    f.flush();
    if (!f) throw ValidationError("failed writing " + report.string());

    std::cout << doc << "\n";
    return 0;
}

int cmd_score_stream(const std::string& checkpoint_path, const std::string& manifest_path,
                     const std::string& subject, const std::string& view_name,
                     const std::string& modality_name, double gamma, size_t smooth_k,
                     const std::string& out_dir) {
    const EncoderParams params = load_checkpoint(checkpoint_path);
    const DatasetSplit data = load_manifest(manifest_path);
    const View view = view_from_string(view_name);
    const Modality modality = modality_from_string(modality_name);

    std::vector<Vec> normal_features;
    for (const ClipSample& c : filter_stream(data.train, view, modality)) {
        if (c.label == Label::normal) normal_features.push_back(c.features);
    }
    if (normal_features.empty()) {
        throw ValidationError("no normal training clips for stream " + view_name + ":" +
                              modality_name);
    }
    const TemplateVector tmpl = build_template(params, normal_features);

    std::vector<ClipSample> subject_clips;
    for (const ClipSample& c : filter_stream(data.test, view, modality)) {
        if (c.subject_id == subject) subject_clips.push_back(c);
    }
    if (subject_clips.empty()) {
        throw ValidationError("no test clips for subject '" + subject + "' on stream " +
                              view_name + ":" + modality_name);
    }

    const SubjectStreamResult result =
        score_subject_stream(params, tmpl, subject_clips, gamma, smooth_k);

    fs::create_directories(out_dir);
    const std::string base = "stream_" + subject + "_" + view_name + "_" + modality_name;
    write_series_csv(fs::path(out_dir) / (base + ".csv"), result.frame_scores);
    write_plot_csv(fs::path(out_dir) / (base + "_plot.csv"), result.frame_scores,
                   result.frame_labels, gamma);

    nlohmann::json j;
    j["frames"] = result.frame_scores.frames.size();
    j["clips"] = result.clip_scores.frames.size();
    if (result.metrics) {
        j["accuracy"] = result.metrics->accuracy;
        j["auc"] = result.metrics->auc;
    } else {
        j["accuracy"] = nullptr;
        j["auc"] = nullptr;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_fuse(const std::vector<std::string>& inputs, const std::string& out_path) {
    std::vector<ScoreSeries> series;
    series.reserve(inputs.size());
    for (const std::string& path : inputs) series.push_back(read_series_csv(path));
    write_series_csv(out_path, fuse(series));
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& manifest_path, const std::string& lambda_n_list,
              const std::string& lambda_a_list, const std::string& out_dir, size_t threads) {
    const ConfigEntries entries = gather_entries(config_path, overrides);
    const DatasetSplit data = load_manifest(manifest_path);

    auto parse_lambdas = [](const std::string& list, const char* flag) {
        std::vector<double> values;
        for (const std::string& item : split_on(list, ',')) {
            try {
                values.push_back(parse_real(trim(item)));
            } catch (const ValidationError& e) {
                throw UsageError(std::string(flag) + ": " + e.what());
            }
        }
        return values;
    };
    const std::vector<double> lambda_ns = parse_lambdas(lambda_n_list, "--lambda-n");
    const std::vector<double> lambda_as = parse_lambdas(lambda_a_list, "--lambda-a");

    fs::create_directories(out_dir);
    const fs::path csv_path = fs::path(out_dir) / "sweep.csv";
    std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) throw ValidationError("cannot open " + csv_path.string() + " for writing");
    csv << "lambda_n,lambda_a,auc,best_threshold,best_accuracy\n";

    for (double lambda_n : lambda_ns) {
        for (double lambda_a : lambda_as) {
            TrainConfig cfg = make_train_config(entries);
            cfg.lambda_n = lambda_n;
            cfg.lambda_a = lambda_a;
            validate_train_config(cfg);

            const TrainResult trained = train(cfg, data);
            std::map<StreamKey, EncoderParams> models;
            models.emplace(StreamKey{cfg.view, cfg.modality}, trained.params);
            const EvalRunResult run =
                run_eval(models, data, {}, std::nullopt, /*smooth_k=*/1, threads);
            const EvalReport& report = run.streams.begin()->second.report;

            csv << fmt_real(lambda_n) << ',' << fmt_real(lambda_a) << ',' << fmt_real(report.auc)
                << ',' << fmt_real(report.best_threshold) << ',' << fmt_real(report.best_accuracy)
                << '\n';
            std::cout << "lambda_n=" << fmt_real(lambda_n) << " lambda_a=" << fmt_real(lambda_a)
                      << " auc=" << fmt_real(report.auc) << "\n";
        }
    }
    csv.flush();
    if (!csv) throw ValidationError("failed writing " + csv_path.string());
    std::cout << "wrote " << csv_path.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Metric-learning anomaly detection over multi-stream clip features"};
    app.require_subcommand(1);
    app.fallthrough(); // let global options like --threads appear after the subcommand

    size_t threads = 1;
    app.add_option("--threads", threads, "Worker threads for evaluation scoring")
        ->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset manifest");
    std::string synth_config;
    std::vector<std::string> synth_sets;
    std::string synth_out = ".";
    bool synth_bin = false;
    synth->add_option("--config", synth_config, "Generator config file");
    synth->add_option("--set", synth_sets, "Override config entry (key=value)");
    synth->add_option("--out", synth_out, "Output directory")->capture_default_str();
    synth->add_flag("--features-bin", synth_bin, "Write binary feature sidecar files");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train an embedding on one stream");
    std::string train_config;
    std::vector<std::string> train_sets;
    std::string train_manifest;
    std::string train_out = ".";
    train_cmd->add_option("--config", train_config, "Training config file");
    train_cmd->add_option("--set", train_sets, "Override config entry (key=value)");
    train_cmd->add_option("--manifest", train_manifest, "Dataset manifest")->required();
    train_cmd->add_option("--out", train_out, "Output directory")->capture_default_str();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score the test split and report metrics");
    std::vector<std::string> eval_checkpoints;
    std::string eval_manifest;
    std::string eval_out = ".";
    std::string eval_fuse;
    double eval_gamma = 0.0;
    size_t eval_smooth = 1;
    eval_cmd->add_option("--checkpoint", eval_checkpoints, "view:modality=path (repeatable)")
        ->required();
    eval_cmd->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
    eval_cmd->add_option("--out", eval_out, "Output directory")->capture_default_str();
    eval_cmd->add_option("--fuse", eval_fuse, "Streams to fuse, e.g. top:depth,top:ir");
    CLI::Option* gamma_opt =
        eval_cmd->add_option("--gamma", eval_gamma, "Fixed decision threshold");
    eval_cmd->add_option("--smooth-k", eval_smooth, "Clip-score smoothing window")
        ->capture_default_str();

    // score-stream
    auto* stream_cmd =
        app.add_subcommand("score-stream", "Frame-level scores for one subject's recording");
    std::string ss_checkpoint;
    std::string ss_manifest;
    std::string ss_subject;
    std::string ss_view;
    std::string ss_modality;
    double ss_gamma = 0.0;
    size_t ss_smooth = 1;
    std::string ss_out = ".";
    stream_cmd->add_option("--checkpoint", ss_checkpoint, "Checkpoint path")->required();
    stream_cmd->add_option("--manifest", ss_manifest, "Dataset manifest")->required();
    stream_cmd->add_option("--subject", ss_subject, "Test subject id")->required();
    stream_cmd->add_option("--view", ss_view, "top|front")->required();
    stream_cmd->add_option("--modality", ss_modality, "depth|ir")->required();
    stream_cmd->add_option("--gamma", ss_gamma, "Decision threshold")->required();
    stream_cmd->add_option("--smooth-k", ss_smooth, "Score smoothing window")
        ->capture_default_str();
    stream_cmd->add_option("--out", ss_out, "Output directory")->capture_default_str();

    // fuse
    auto* fuse_cmd = app.add_subcommand("fuse", "Average aligned score series CSVs");
    std::vector<std::string> fuse_inputs;
    std::string fuse_out;
    fuse_cmd->add_option("--in", fuse_inputs, "Input series CSV (repeat 2+ times)")
        ->required()
        ->expected(-2);
    fuse_cmd->add_option("--out", fuse_out, "Output series CSV")->required();

    // sweep
    auto* sweep_cmd =
        app.add_subcommand("sweep", "Train/eval across training-set fractions");
    std::string sweep_config;
    std::vector<std::string> sweep_sets;
    std::string sweep_manifest;
    std::string sweep_ln = "1";
    std::string sweep_la = "1";
    std::string sweep_out = ".";
    sweep_cmd->add_option("--config", sweep_config, "Training config file");
    sweep_cmd->add_option("--set", sweep_sets, "Override config entry (key=value)");
    sweep_cmd->add_option("--manifest", sweep_manifest, "Dataset manifest")->required();
    sweep_cmd->add_option("--lambda-n", sweep_ln, "Normal-pool fractions, comma separated")
        ->capture_default_str();
    sweep_cmd->add_option("--lambda-a", sweep_la, "Anomaly-pool fractions, comma separated")
        ->capture_default_str();
    sweep_cmd->add_option("--out", sweep_out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);

        if (synth->parsed()) return cmd_synth(synth_config, synth_sets, synth_out, synth_bin);
        if (train_cmd->parsed()) {
            return cmd_train(train_config, train_sets, train_manifest, train_out);
        }
        if (eval_cmd->parsed()) {
            std::optional<double> gamma;
            if (gamma_opt->count() > 0) gamma = eval_gamma;
            return cmd_eval(eval_checkpoints, eval_manifest, eval_out, eval_fuse, gamma,
                            eval_smooth, threads);
        }
        if (stream_cmd->parsed()) {
            return cmd_score_stream(ss_checkpoint, ss_manifest, ss_subject, ss_view, ss_modality,
                                    ss_gamma, ss_smooth, ss_out);
        }
        if (fuse_cmd->parsed()) return cmd_fuse(fuse_inputs, fuse_out);
        if (sweep_cmd->parsed()) {
            return cmd_sweep(sweep_config, sweep_sets, sweep_manifest, sweep_ln, sweep_la,
                             sweep_out, threads);
        }
        std::cerr << "error: no subcommand selected\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
