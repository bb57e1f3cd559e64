// Command-line front end: train single models, evaluate checkpoints, fuse
// ensembles, and run the bagging-vs-self-weighting Monte Carlo comparison.
//
// Exit codes: 0 success, 2 bad flags, 3 data/config errors, 4 training failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "swe/swe.hpp"

namespace {

namespace fs = std::filesystem;

std::string resolve_data_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("SWE_DATA_DIR"); env && *env) return env;
    throw swe::BadConfig("no data directory: pass --data-dir or set SWE_DATA_DIR");
}

struct CommonDataFlags {
    std::string data_dir;
    swe::SplitSpec split;

    void attach(CLI::App* cmd) {
        cmd->add_option("--data-dir", data_dir, "directory with the four IDX files")
            ->envname("SWE_DATA_DIR");
        cmd->add_option("--train-count", split.train_count, "train split size");
        cmd->add_option("--val-count", split.validation_count, "validation split size");
        cmd->add_option("--test-count", split.test_count, "test split size");
        cmd->add_option("--split-seed", split.seed, "seed of the split permutation");
    }

    swe::DataSplits load() const {
        return swe::load_splits(resolve_data_dir(data_dir), split);
    }
};

struct TrainOptions {
    std::string arch;
    CommonDataFlags data;
    std::uint64_t seed = 1;
    std::string out = "model.swenet";
    swe::SgdConfig sgd;
    std::string format = "json";
    bool quiet = false;
};

int cmd_train(const TrainOptions& opt) {
    swe::ArchSpec arch;
    arch.variant = swe::parse_variant(opt.arch);
    swe::SgdConfig sgd = opt.sgd;
    sgd.seed = opt.seed;

    swe::DataSplits splits = opt.data.load();
    swe::EpochCallback progress;
    if (!opt.quiet)
        progress = [](std::size_t epoch, double loss) {
            std::fprintf(stderr, "epoch %zu  mean loss %.6f\n", epoch, loss);
        };
    swe::Network<float> net = swe::train<float>(arch, splits.train, sgd, progress);

    net.set_mode(swe::Mode::Infer);
    const double reliability = swe::measure_reliability(net, splits.validation);
    swe::save_checkpoint(net, sgd, opt.out);

    if (opt.format == "text") {
        std::printf("checkpoint           %s\n", opt.out.c_str());
        std::printf("validation macro-F1  %.5f\n", reliability);
    } else {
        nlohmann::json j = {{"checkpoint", opt.out}, {"validation_macro_f1", reliability}};
        std::printf("%s\n", j.dump().c_str());
    }
    return 0;
}

struct EvaluateOptions {
    std::string checkpoint;
    CommonDataFlags data;
    std::string split = "test";
    std::string format = "json";
};

int cmd_evaluate(const EvaluateOptions& opt) {
    auto loaded = swe::load_checkpoint<float>(opt.checkpoint);
    swe::DataSplits splits = opt.data.load();
    const swe::Dataset* ds = &splits.test;
    if (opt.split == "validation") ds = &splits.validation;
    else if (opt.split == "train") ds = &splits.train;
    else if (opt.split != "test") throw swe::BadConfig("unknown split '" + opt.split + "'");

    swe::ScoreMatrix scores = swe::score_matrix(loaded.net, *ds);
    std::vector<int> pred(scores.rows), truth(scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        pred[i] = swe::argmax_class(scores.row(i));
        truth[i] = ds->labels[i];
    }
    swe::F1Report rep = swe::macro_f1(swe::confusion(pred, truth, scores.cols));
    if (opt.format == "text") {
        std::printf("split     %s (%zu samples)\n", opt.split.c_str(), scores.rows);
        std::printf("macro-F1  %.5f\n", rep.macro_f1);
        std::printf("micro-F1  %.5f\n", rep.micro_f1);
    } else {
        std::printf("%s\n", swe::to_json(rep).dump().c_str());
    }
    return 0;
}

struct EnsemblePredictOptions {
    std::string manifest;
    CommonDataFlags data;
    std::string method = "manifest";
    std::string split = "test";
    std::string format = "json";
};

int cmd_ensemble_predict(const EnsemblePredictOptions& opt) {
    swe::EnsembleManifest manifest = swe::load_manifest(opt.manifest);
    if (manifest.members.empty()) throw swe::EmptyEnsemble("manifest lists no members");
    const fs::path base = fs::path(opt.manifest).parent_path();

    swe::DataSplits splits = opt.data.load();
    const swe::Dataset* ds = &splits.test;
    if (opt.split == "validation") ds = &splits.validation;
    else if (opt.split == "train") ds = &splits.train;
    else if (opt.split != "test") throw swe::BadConfig("unknown split '" + opt.split + "'");

    std::vector<swe::ScoreMatrix> scores;
    std::vector<double> reliabilities;
    for (const swe::ManifestEntry& entry : manifest.members) {
        fs::path p = entry.checkpoint;
        if (p.is_relative()) p = base / p;
        auto loaded = swe::load_checkpoint<float>(p);
        scores.push_back(swe::score_matrix(loaded.net, *ds));
        reliabilities.push_back(entry.reliability);
    }
    std::vector<int> truth(ds->labels.begin(), ds->labels.end());

    std::vector<swe::FusionMethod> methods;
    if (opt.method == "manifest") methods = {manifest.method};
    else if (opt.method == "both") methods = {swe::FusionMethod::Bagging, swe::FusionMethod::Swe};
    else methods = {swe::parse_fusion_method(opt.method)};

    nlohmann::json results = nlohmann::json::array();
    for (swe::FusionMethod m : methods) {
        swe::CombinedOutput out = m == swe::FusionMethod::Swe
                                      ? swe::swe_combine(scores, reliabilities)
                                      : swe::bagging_combine(scores);
        const double f1 = swe::macro_f1(swe::confusion(out.predicted, truth)).macro_f1;
        if (opt.format == "text")
            std::printf("%-8s macro-F1  %.5f\n", swe::to_string(m), f1);
        else
            results.push_back({{"method", swe::to_string(m)},
                               {"macro_f1", f1},
                               {"members", scores.size()},
                               {"samples", truth.size()}});
    }
    if (opt.format != "text") std::printf("%s\n", results.dump().c_str());
    return 0;
}

struct ExperimentOptions {
    std::string config;
    std::string data_dir;
    std::string output_dir;
    std::size_t threads = SIZE_MAX;
};

int cmd_experiment(const ExperimentOptions& opt) {
    swe::ExperimentConfig cfg = swe::load_experiment_config(opt.config);
    if (!opt.data_dir.empty()) cfg.data_dir = opt.data_dir;
    cfg.data_dir = resolve_data_dir(cfg.data_dir);
    if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
    if (opt.threads != SIZE_MAX) cfg.threads = opt.threads;

    swe::DataSplits splits = swe::load_splits(cfg.data_dir, cfg.split);
    std::fprintf(stderr, "experiment: %s, %zu members, %zu trials, %zu/%zu/%zu samples\n",
                 swe::to_string(cfg.arch.variant), cfg.ensemble_size, cfg.trials,
                 splits.train.size(), splits.validation.size(), splits.test.size());

    swe::ExperimentReport report = swe::run_experiment<float>(
        cfg, splits.train, splits.validation, splits.test,
        [&](const swe::TrialResult& t) {
            std::fprintf(stderr, "trial %zu/%zu  bagging=%.5f  swe=%.5f  (%.1fs)\n",
                         t.trial + 1, cfg.trials, t.bagging_f1, t.swe_f1, t.seconds);
        },
        [&](std::size_t done, std::size_t total) {
            std::fprintf(stderr, "trained member %zu/%zu\n", done, total);
        });
    swe::save_report(report, cfg.output_dir);
    std::fputs(swe::format_report(report).c_str(), stdout);
    return 0;
}

struct ReportOptions {
    std::string in;
};

int cmd_report(const ReportOptions& opt) {
    swe::ExperimentReport report = swe::load_report(opt.in);
    std::fputs(swe::format_report(report).c_str(), stdout);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-weighted ensembles of from-scratch convolutional classifiers"};
    app.require_subcommand(1);

    TrainOptions train_opt;
    CLI::App* train_cmd = app.add_subcommand("train", "train one model, save a checkpoint");
    train_cmd->add_option("--arch", train_opt.arch, "lenet-a | lenet-b | lenet-c")->required();
    train_opt.data.attach(train_cmd);
    train_cmd->add_option("--seed", train_opt.seed, "init + shuffle seed");
    train_cmd->add_option("--out", train_opt.out, "checkpoint path");
    train_cmd->add_option("--lr", train_opt.sgd.learning_rate, "SGD learning rate");
    train_cmd->add_option("--batch-size", train_opt.sgd.batch_size, "minibatch size");
    train_cmd->add_option("--epochs", train_opt.sgd.epochs, "training epochs");
    train_cmd->add_option("--format", train_opt.format, "json | text");
    train_cmd->add_flag("--quiet", train_opt.quiet, "suppress epoch progress");

    EvaluateOptions eval_opt;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "macro-F1 of a checkpoint on a split");
    eval_cmd->add_option("--checkpoint", eval_opt.checkpoint, "model checkpoint")->required();
    eval_opt.data.attach(eval_cmd);
    eval_cmd->add_option("--split", eval_opt.split, "test | validation | train");
    eval_cmd->add_option("--format", eval_opt.format, "json | text");

    EnsemblePredictOptions ens_opt;
    CLI::App* ens_cmd =
        app.add_subcommand("ensemble-predict", "fuse manifest members over a split");
    ens_cmd->add_option("--manifest", ens_opt.manifest, "ensemble manifest JSON")->required();
    ens_opt.data.attach(ens_cmd);
    ens_cmd->add_option("--method", ens_opt.method, "manifest | swe | bagging | both");
    ens_cmd->add_option("--split", ens_opt.split, "test | validation | train");
    ens_cmd->add_option("--format", ens_opt.format, "json | text");

    ExperimentOptions exp_opt;
    CLI::App* exp_cmd = app.add_subcommand("experiment", "run the Monte Carlo comparison");
    exp_cmd->add_option("--config", exp_opt.config, "experiment config JSON")->required();
    exp_cmd->add_option("--data-dir", exp_opt.data_dir, "override config data_dir")
        ->envname("SWE_DATA_DIR");
    exp_cmd->add_option("--output-dir", exp_opt.output_dir, "override config output_dir");
    exp_cmd->add_option("--threads", exp_opt.threads, "cap worker threads");

    ReportOptions rep_opt;
    CLI::App* rep_cmd = app.add_subcommand("report", "format a saved report.json");
    rep_cmd->add_option("--in", rep_opt.in, "path to report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train_cmd) return cmd_train(train_opt);
        if (*eval_cmd) return cmd_evaluate(eval_opt);
        if (*ens_cmd) return cmd_ensemble_predict(ens_opt);
        if (*exp_cmd) return cmd_experiment(exp_opt);
        if (*rep_cmd) return cmd_report(rep_opt);
    } catch (const swe::NonFiniteLoss& e) {
        std::fprintf(stderr, "training failure: %s\n", e.what());
        return 4;
    } catch (const swe::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
