#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "swe/dataset.hpp"
#include "swe/ensemble.hpp"
#include "swe/errors.hpp"
#include "swe/metrics.hpp"
#include "swe/network.hpp"
#include "swe/parallel.hpp"
#include "swe/rng.hpp"

namespace swe {

/// Everything a Monte Carlo run needs. One JSON file covers all fields; see
/// configs/ for the desk-scale and full-scale presets.
struct ExperimentConfig {
    ArchSpec arch;
    std::size_t ensemble_size = 5;
    std::size_t trials = 10;
    SgdConfig sgd;
    SplitSpec split;
    std::uint64_t master_seed = 1;
    std::string data_dir;
    std::string output_dir = ".";
    std::size_t threads = 0;     // 0 = hardware concurrency
    bool bootstrap = false;      // resample each member's train set

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Paired scores of the two fusion methods for one trial. Both numbers come
/// from the same trained members and the same test score matrices.
struct TrialResult {
    std::size_t trial = 0;
    double bagging_f1 = 0.0;
    double swe_f1 = 0.0;
    double soft_average_f1 = 0.0; // unweighted score averaging, reported for reference
    std::vector<double> reliabilities;
    double seconds = 0.0;

    friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

struct SuperiorityCount {
    std::size_t bagging_wins = 0;
    std::size_t draws = 0;
    std::size_t swe_wins = 0;

    friend bool operator==(const SuperiorityCount&, const SuperiorityCount&) = default;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<TrialResult> trials;
    double mean_bagging_f1 = 0.0;
    double mean_swe_f1 = 0.0;
    double mean_soft_average_f1 = 0.0;
    double mean_diff = 0.0; // mean(swe) - mean(bagging)
    SuperiorityCount superiority;
    double swe_win_percent = 0.0;

    friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

// --- config (de)serialization -------------------------------------------

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"arch", to_string(c.arch.variant)},
            {"channels", c.arch.channels},
            {"classifier_width", c.arch.classifier_width},
            {"kernel", c.arch.kernel},
            {"ensemble_size", c.ensemble_size},
            {"trials", c.trials},
            {"sgd",
             {{"learning_rate", c.sgd.learning_rate},
              {"batch_size", c.sgd.batch_size},
              {"epochs", c.sgd.epochs},
              {"seed", c.sgd.seed}}},
            {"split",
             {{"train_count", c.split.train_count},
              {"validation_count", c.split.validation_count},
              {"test_count", c.split.test_count},
              {"seed", c.split.seed}}},
            {"master_seed", c.master_seed},
            {"data_dir", c.data_dir},
            {"output_dir", c.output_dir},
            {"threads", c.threads},
            {"bootstrap", c.bootstrap}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.arch.variant = parse_variant(j.value("arch", std::string("lenet-a")));
        if (j.contains("channels")) {
            auto ch = j.at("channels").get<std::vector<std::size_t>>();
            if (ch.size() != 3) throw BadConfig("channels needs 3 entries");
            std::copy(ch.begin(), ch.end(), c.arch.channels.begin());
        }
        c.arch.classifier_width = j.value("classifier_width", std::size_t{10});
        c.arch.kernel = j.value("kernel", std::size_t{5});
        c.ensemble_size = j.value("ensemble_size", std::size_t{5});
        c.trials = j.value("trials", std::size_t{10});
        if (c.ensemble_size == 0) throw BadConfig("ensemble_size must be >= 1");
        if (c.trials == 0) throw BadConfig("trials must be >= 1");
        if (j.contains("sgd")) {
            const auto& s = j.at("sgd");
            c.sgd.learning_rate = s.value("learning_rate", 0.01);
            c.sgd.batch_size = s.value("batch_size", std::size_t{64});
            c.sgd.epochs = s.value("epochs", std::size_t{5});
            c.sgd.seed = s.value("seed", std::uint64_t{1});
        }
        if (j.contains("split")) {
            const auto& s = j.at("split");
            c.split.train_count = s.value("train_count", std::size_t{50000});
            c.split.validation_count = s.value("validation_count", std::size_t{10000});
            c.split.test_count = s.value("test_count", std::size_t{10000});
            c.split.seed = s.value("seed", std::uint64_t{1});
        }
        c.master_seed = j.value("master_seed", std::uint64_t{1});
        c.data_dir = j.value("data_dir", std::string{});
        c.output_dir = j.value("output_dir", std::string("."));
        c.threads = j.value("threads", std::size_t{0});
        c.bootstrap = j.value("bootstrap", false);
    } catch (const nlohmann::json::exception& e) {
        throw BadConfig(std::string("bad experiment config: ") + e.what());
    }
    return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw BadConfig(path.string() + ": " + e.what());
    }
    return experiment_config_from_json(j);
}

// --- the Monte Carlo protocol --------------------------------------------

/// Draw-with-replacement copy of a dataset (optional member diversity mode).
inline Dataset bootstrap_resample(const Dataset& ds, std::uint64_t seed) {
    Xorshift64Star rng(seed);
    const std::size_t n = ds.size();
    std::vector<std::uint32_t> idx(n);
    for (std::size_t i = 0; i < n; ++i)
        idx[i] = static_cast<std::uint32_t>(rng.next_below(n));
    Dataset out;
    out.split = ds.split;
    out.images = Tensor<float>(ds.images.shape());
    out.labels.resize(n);
    const std::size_t px = kImageChannels * kImageSide * kImageSide;
    for (std::size_t i = 0; i < n; ++i) {
        const float* src = ds.images.data() + std::size_t(idx[i]) * px;
        std::copy(src, src + px, out.images.data() + i * px);
        out.labels[i] = ds.labels[idx[i]];
    }
    return out;
}

namespace detail {

/// Train one ensemble member (seed derive_seed(master, trial, member)) and
/// collect what the fusion step needs: the validation reliability and the
/// test-set score matrix.
template <typename T>
struct MemberOutcome {
    double reliability = 0.0;
    ScoreMatrix test_scores;
    double seconds = 0.0;
};

template <typename T = float>
MemberOutcome<T> run_member(const ExperimentConfig& cfg, const Dataset& train_set,
                            const Dataset& validation, const Dataset& test,
                            std::size_t trial_index, std::size_t member_index) {
    const auto t0 = std::chrono::steady_clock::now();
    MemberOutcome<T> out;
    try {
        SgdConfig sgd = cfg.sgd;
        sgd.seed = derive_seed(cfg.master_seed, trial_index, member_index);
        Network<T> net;
        if (cfg.bootstrap) {
            Dataset resampled = bootstrap_resample(train_set, combine64(sgd.seed, 2));
            net = train<T>(cfg.arch, resampled, sgd);
        } else {
            net = train<T>(cfg.arch, train_set, sgd);
        }
        net.set_mode(Mode::Infer);
        out.reliability = measure_reliability(net, validation);
        out.test_scores = score_matrix(net, test);
    } catch (const Error& e) {
        throw Error("trial " + std::to_string(trial_index) + ", member " +
                    std::to_string(member_index) + ": " + e.what());
    }
    out.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Paired evaluation: both combiners consume the same member score matrices.
template <typename T>
TrialResult fuse_trial(std::size_t trial_index, std::span<MemberOutcome<T>> members,
                       std::span<const int> truth) {
    std::vector<ScoreMatrix> scores;
    std::vector<double> reliabilities;
    double seconds = 0.0;
    scores.reserve(members.size());
    for (MemberOutcome<T>& m : members) {
        scores.push_back(std::move(m.test_scores));
        reliabilities.push_back(m.reliability);
        seconds += m.seconds;
    }
    CombinedOutput swe_out = swe_combine(scores, reliabilities);
    CombinedOutput bag_out = bagging_combine(scores);
    CombinedOutput avg_out = swe_combine(scores, std::vector<double>(scores.size(), 1.0));

    TrialResult result;
    result.trial = trial_index;
    result.swe_f1 = macro_f1(confusion(swe_out.predicted, truth)).macro_f1;
    result.bagging_f1 = macro_f1(confusion(bag_out.predicted, truth)).macro_f1;
    result.soft_average_f1 = macro_f1(confusion(avg_out.predicted, truth)).macro_f1;
    result.reliabilities = std::move(reliabilities);
    result.seconds = seconds;
    return result;
}

} // namespace detail

/// One Monte Carlo trial: train the members (in parallel up to cfg.threads
/// workers), measure reliabilities, score the test set once per member, and
/// evaluate both fusion methods on those same score matrices.
template <typename T = float>
TrialResult run_trial(const ExperimentConfig& cfg, const Dataset& train_set,
                      const Dataset& validation, const Dataset& test,
                      std::size_t trial_index) {
    const std::size_t n = cfg.ensemble_size;
    std::vector<detail::MemberOutcome<T>> members(n);
    parallel_for_indexed(n, cfg.threads, [&](std::size_t m) {
        members[m] = detail::run_member<T>(cfg, train_set, validation, test, trial_index, m);
    });
    std::vector<int> truth(test.labels.begin(), test.labels.end());
    return detail::fuse_trial<T>(trial_index, members, truth);
}

/// F1 values are compared after rounding to 5 decimals; equal rounded values
/// count as a draw.
inline std::int64_t round5(double f1) {
    return std::llround(f1 * 1e5);
}

inline SuperiorityCount count_superiority(std::span<const TrialResult> trials) {
    if (trials.empty()) throw EmptyTrials("no trials to count");
    SuperiorityCount out;
    for (const TrialResult& t : trials) {
        const std::int64_t b = round5(t.bagging_f1), s = round5(t.swe_f1);
        if (s > b)
            ++out.swe_wins;
        else if (s < b)
            ++out.bagging_wins;
        else
            ++out.draws;
    }
    return out;
}

inline ExperimentReport aggregate(const ExperimentConfig& cfg,
                                  std::vector<TrialResult> trials) {
    if (trials.empty()) throw EmptyTrials("no trials to aggregate");
    ExperimentReport rep;
    rep.config = cfg;
    rep.superiority = count_superiority(trials);
    double sb = 0.0, ss = 0.0, sa = 0.0;
    for (const TrialResult& t : trials) {
        sb += t.bagging_f1;
        ss += t.swe_f1;
        sa += t.soft_average_f1;
    }
    const double n = double(trials.size());
    rep.mean_bagging_f1 = sb / n;
    rep.mean_swe_f1 = ss / n;
    rep.mean_soft_average_f1 = sa / n;
    rep.mean_diff = rep.mean_swe_f1 - rep.mean_bagging_f1;
    rep.swe_win_percent = 100.0 * double(rep.superiority.swe_wins) / n;
    rep.trials = std::move(trials);
    return rep;
}

using TrialCallback = std::function<void(const TrialResult&)>;
using MemberCallback = std::function<void(std::size_t done, std::size_t total)>;

/// Full protocol run. All trials x members training jobs go through one flat
/// worker pool (trials are independent), then trials are fused in index order,
/// so the report does not depend on scheduling.
template <typename T = float>
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& train_set,
                                const Dataset& validation, const Dataset& test,
                                const TrialCallback& on_trial = {},
                                const MemberCallback& on_member = {}) {
    const std::size_t n = cfg.ensemble_size;
    const std::size_t jobs = cfg.trials * n;
    std::vector<detail::MemberOutcome<T>> members(jobs);
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    parallel_for_indexed(jobs, cfg.threads, [&](std::size_t j) {
        members[j] = detail::run_member<T>(cfg, train_set, validation, test, j / n, j % n);
        const std::size_t k = ++done;
        if (on_member) {
            std::scoped_lock lock(progress_mutex);
            on_member(k, jobs);
        }
    });

    std::vector<int> truth(test.labels.begin(), test.labels.end());
    std::vector<TrialResult> trials;
    trials.reserve(cfg.trials);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        trials.push_back(detail::fuse_trial<T>(
            t, std::span(members).subspan(t * n, n), truth));
        if (on_trial) on_trial(trials.back());
    }
    return aggregate(cfg, std::move(trials));
}

// --- persistence -----------------------------------------------------------

namespace detail {

/// Shortest-exact decimal form of a double (17 significant digits).
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline nlohmann::json to_json(const ExperimentReport& rep) {
    nlohmann::json trials = nlohmann::json::array();
    for (const TrialResult& t : rep.trials)
        trials.push_back({{"trial", t.trial},
                          {"bagging_f1", t.bagging_f1},
                          {"swe_f1", t.swe_f1},
                          {"soft_average_f1", t.soft_average_f1},
                          {"reliabilities", t.reliabilities},
                          {"seconds", t.seconds}});
    return {{"config", to_json(rep.config)},
            {"trials", trials},
            {"mean_bagging_f1", rep.mean_bagging_f1},
            {"mean_swe_f1", rep.mean_swe_f1},
            {"mean_soft_average_f1", rep.mean_soft_average_f1},
            {"mean_diff", rep.mean_diff},
            {"superiority",
             {{"bagging_wins", rep.superiority.bagging_wins},
              {"draws", rep.superiority.draws},
              {"swe_wins", rep.superiority.swe_wins}}},
            {"swe_win_percent", rep.swe_win_percent}};
}

/// Write report.json plus the flat trial tables trials.csv and plotdata.tsv.
inline void save_report(const ExperimentReport& rep, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);

    {
        std::ofstream out(dir / "report.json");
        if (!out) throw IoFailure("cannot write " + (dir / "report.json").string());
        out << to_json(rep).dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "trials.csv");
        if (!out) throw IoFailure("cannot write " + (dir / "trials.csv").string());
        out << "trial,bagging_f1,swe_f1,diff\n";
        for (const TrialResult& t : rep.trials)
            out << t.trial << ',' << detail::fmt_double(t.bagging_f1) << ','
                << detail::fmt_double(t.swe_f1) << ','
                << detail::fmt_double(t.swe_f1 - t.bagging_f1) << '\n';
    }
    {
        std::ofstream out(dir / "plotdata.tsv");
        if (!out) throw IoFailure("cannot write " + (dir / "plotdata.tsv").string());
        out << "trial\tbagging_f1\tswe_f1\n";
        for (const TrialResult& t : rep.trials)
            out << t.trial << '\t' << detail::fmt_double(t.bagging_f1) << '\t'
                << detail::fmt_double(t.swe_f1) << '\n';
    }
}

inline ExperimentReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedReport(path.string() + ": " + e.what());
    }
    ExperimentReport rep;
    try {
        rep.config = experiment_config_from_json(j.at("config"));
        for (const auto& t : j.at("trials")) {
            TrialResult tr;
            tr.trial = t.at("trial").get<std::size_t>();
            tr.bagging_f1 = t.at("bagging_f1").get<double>();
            tr.swe_f1 = t.at("swe_f1").get<double>();
            tr.soft_average_f1 = t.value("soft_average_f1", 0.0);
            tr.reliabilities = t.at("reliabilities").get<std::vector<double>>();
            tr.seconds = t.at("seconds").get<double>();
            rep.trials.push_back(std::move(tr));
        }
        rep.mean_bagging_f1 = j.at("mean_bagging_f1").get<double>();
        rep.mean_swe_f1 = j.at("mean_swe_f1").get<double>();
        rep.mean_soft_average_f1 = j.value("mean_soft_average_f1", 0.0);
        rep.mean_diff = j.at("mean_diff").get<double>();
        const auto& s = j.at("superiority");
        rep.superiority.bagging_wins = s.at("bagging_wins").get<std::size_t>();
        rep.superiority.draws = s.at("draws").get<std::size_t>();
        rep.superiority.swe_wins = s.at("swe_wins").get<std::size_t>();
        rep.swe_win_percent = j.at("swe_win_percent").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedReport(path.string() + ": " + e.what());
    }
    if (rep.trials.empty()) throw MalformedReport(path.string() + ": report has no trials");
    if (rep.superiority.bagging_wins + rep.superiority.draws + rep.superiority.swe_wins !=
        rep.trials.size())
        throw MalformedReport(path.string() + ": superiority counts do not sum to trials");
    return rep;
}

/// Fixed-format text summary (also what `swe report` prints).
inline std::string format_report(const ExperimentReport& rep) {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof buf, "architecture   %s\n", to_string(rep.config.arch.variant));
    out += buf;
    std::snprintf(buf, sizeof buf, "members        %zu\n", rep.config.ensemble_size);
    out += buf;
    std::snprintf(buf, sizeof buf, "trials         %zu\n", rep.trials.size());
    out += buf;
    std::snprintf(buf, sizeof buf, "mean macro-F1  bagging=%.5f  swe=%.5f\n",
                  rep.mean_bagging_f1, rep.mean_swe_f1);
    out += buf;
    std::snprintf(buf, sizeof buf, "mean diff      %+.5f (swe - bagging)\n", rep.mean_diff);
    out += buf;
    std::snprintf(buf, sizeof buf, "superiority    bagging=%zu  draw=%zu  swe=%zu\n",
                  rep.superiority.bagging_wins, rep.superiority.draws,
                  rep.superiority.swe_wins);
    out += buf;
    std::snprintf(buf, sizeof buf, "swe win rate   %.2f%%\n", rep.swe_win_percent);
    out += buf;
    return out;
}

} // namespace swe
