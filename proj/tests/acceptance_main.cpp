// Acceptance runner: executes the project's acceptance criteria end to end
// and prints one PASS/FAIL line per criterion. With no arguments it runs all
// of them; otherwise pass criterion numbers (e.g. "acceptance 1 3 8").
//
// Criterion 5/7 use the four IDX files from $SWE_DATA_DIR when set, falling
// back to the bundled synthetic glyph dataset so the suite runs out of the
// box. Criterion 6 is the opt-in full-scale reproduction: it needs
// SWE_FULL_SCALE=1 and the real MNIST files, and is reported as SKIP
// otherwise (exit code 77 when invoked alone).

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_suite.hpp"
#include "swe/swe.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kPass = 0, kFail = 1, kSkip = 77;

struct Outcome {
    int code = kFail;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

// --- data resolution -------------------------------------------------------

struct DataSource {
    fs::path dir;
    bool from_env = false;
    bool looks_like_mnist = false;
};

bool has_all_idx_files(const fs::path& dir) {
    return fs::exists(dir / swe::kTrainImagesFile) && fs::exists(dir / swe::kTrainLabelsFile) &&
           fs::exists(dir / swe::kTestImagesFile) && fs::exists(dir / swe::kTestLabelsFile);
}

DataSource resolve_data() {
    DataSource src;
    if (const char* env = std::getenv("SWE_DATA_DIR"); env && *env && has_all_idx_files(env)) {
        src.dir = env;
        src.from_env = true;
        std::error_code ec;
        src.looks_like_mnist =
            fs::file_size(src.dir / swe::kTrainImagesFile, ec) == 47040016u;
        return src;
    }
    src.dir = fs::temp_directory_path() / "swe_acceptance_data";
    if (!has_all_idx_files(src.dir)) {
        fs::remove_all(src.dir);
        swe::SynthSpec spec;
        spec.seed = 2026;
        swe::write_synth_dataset(src.dir, spec);
    }
    return src;
}

swe::ExperimentConfig desk_config(const DataSource& src) {
    swe::ExperimentConfig cfg;
    cfg.arch = {.variant = swe::Variant::LeNetA};
    cfg.ensemble_size = 5;
    cfg.trials = 10;
    cfg.sgd = {.learning_rate = 0.01, .batch_size = 64, .epochs = 5, .seed = 1};
    cfg.split = {.train_count = 8000, .validation_count = 2000, .test_count = 2000, .seed = 7};
    cfg.master_seed = 1;
    cfg.data_dir = src.dir.string();
    cfg.threads = 0;
    return cfg;
}

swe::ExperimentReport run_and_save(const swe::ExperimentConfig& cfg, const fs::path& out_dir) {
    swe::DataSplits data = swe::load_splits(cfg.data_dir, cfg.split);
    swe::ExperimentReport rep = swe::run_experiment<float>(
        cfg, data.train, data.validation, data.test,
        [&](const swe::TrialResult& t) {
            std::fprintf(stderr, "  trial %zu: bagging=%.5f swe=%.5f\n", t.trial,
                         t.bagging_f1, t.swe_f1);
        },
        [&](std::size_t done, std::size_t total) {
            std::fprintf(stderr, "  trained member %zu/%zu\r", done, total);
            if (done == total) std::fputc('\n', stderr);
        });
    swe::save_report(rep, out_dir);
    return rep;
}

// --- criteria --------------------------------------------------------------

/// 1. Combiner oracle equivalence on 1000 random instances in under 10 s.
Outcome criterion1() {
    const auto t0 = Clock::now();
    swe::Xorshift64Star rng(101);
    double worst = 0.0;
    for (int iter = 0; iter < 1000; ++iter) {
        const std::size_t members = 1 + rng.next_below(5);
        const std::size_t rows = 1 + rng.next_below(100);
        auto raw = testutil::random_scores(members, rows, 10, rng);
        std::vector<double> rel(members);
        for (auto& v : rel) v = rng.next_double();
        auto mats = testutil::to_score_matrices(raw);

        auto swe_lib = swe::swe_combine(mats, rel);
        auto swe_ref = testutil::oracle_swe(raw, rel);
        auto bag_lib = swe::bagging_combine(mats);
        auto bag_ref = testutil::oracle_bagging(raw);
        for (std::size_t i = 0; i < rows; ++i) {
            if (swe_lib.predicted[i] != swe_ref.predicted[i])
                return {kFail, fmt("swe predicted class mismatch at iter %d row %zu", iter, i)};
            if (bag_lib.predicted[i] != bag_ref.predicted[i])
                return {kFail, fmt("bagging predicted class mismatch at iter %d row %zu", iter, i)};
            for (std::size_t c = 0; c < 10; ++c) {
                worst = std::max(worst, std::abs(swe_lib.fused.at(i, c) - swe_ref.fused[i][c]));
                if (bag_lib.fused.at(i, c) != bag_ref.fused[i][c])
                    return {kFail, fmt("bagging vote count mismatch at iter %d", iter)};
            }
        }
    }
    const double secs = seconds_since(t0);
    if (worst >= 1e-12) return {kFail, fmt("swe fused worst |diff| %.3e >= 1e-12", worst)};
    if (secs >= 10.0) return {kFail, fmt("took %.1f s, budget 10 s", secs)};
    return {kPass, fmt("1000 instances, swe worst |diff| %.2e, bagging exact, %.2f s", worst, secs)};
}

/// 2. FD gradient suite: every layer kind, 20 configs each, rel err < 1e-4,
/// under 2 minutes.
Outcome criterion2() {
    const auto t0 = Clock::now();
    auto results = gradsuite::run_all(20);
    const double secs = seconds_since(t0);
    std::ostringstream detail;
    bool ok = true;
    for (const auto& r : results) {
        detail << r.kind << "=" << fmt("%.2e", r.worst_rel_error) << " ";
        ok = ok && r.worst_rel_error < gradsuite::kTolerance && r.configs >= 20;
    }
    if (secs >= 120.0) return {kFail, fmt("took %.1f s, budget 120 s", secs)};
    detail << fmt("(%d configs/kind, %.1f s)", 20, secs);
    return {ok ? kPass : kFail, detail.str()};
}

/// 3. Metric oracle on 1000 random confusion matrices plus the permutation
/// and relabeling invariances on 100 cases.
Outcome criterion3() {
    swe::Xorshift64Star rng(303);
    double worst = 0.0;
    for (int iter = 0; iter < 1000; ++iter) {
        swe::ConfusionMatrix cm;
        std::vector<std::vector<long long>> counts(10, std::vector<long long>(10, 0));
        const int entries = 1 + int(rng.next_below(500));
        for (int e = 0; e < entries; ++e) {
            const int t = int(rng.next_below(10)), p = int(rng.next_below(10));
            cm.add(t, p);
            ++counts[std::size_t(t)][std::size_t(p)];
        }
        worst = std::max(worst, std::abs(swe::macro_f1(cm).macro_f1 -
                                         testutil::oracle_macro_f1(counts)));
    }
    if (worst >= 1e-12) return {kFail, fmt("worst |diff| %.3e >= 1e-12", worst)};

    for (int iter = 0; iter < 100; ++iter) {
        std::vector<int> preds(250), truths(250);
        for (int i = 0; i < 250; ++i) {
            preds[std::size_t(i)] = int(rng.next_below(10));
            truths[std::size_t(i)] = int(rng.next_below(10));
        }
        const double base = swe::macro_f1(swe::confusion(preds, truths)).macro_f1;

        auto order = swe::permutation(250, swe::combine64(1, std::uint64_t(iter)));
        std::vector<int> p2(250), t2(250);
        for (int i = 0; i < 250; ++i) {
            p2[std::size_t(i)] = preds[order[std::size_t(i)]];
            t2[std::size_t(i)] = truths[order[std::size_t(i)]];
        }
        if (swe::macro_f1(swe::confusion(p2, t2)).macro_f1 != base)
            return {kFail, fmt("pair-order invariance broken at iter %d", iter)};

        auto relabel = swe::permutation(10, swe::combine64(2, std::uint64_t(iter)));
        for (int i = 0; i < 250; ++i) {
            p2[std::size_t(i)] = int(relabel[std::size_t(preds[std::size_t(i)])]);
            t2[std::size_t(i)] = int(relabel[std::size_t(truths[std::size_t(i)])]);
        }
        if (std::abs(swe::macro_f1(swe::confusion(p2, t2)).macro_f1 - base) >= 1e-12)
            return {kFail, fmt("relabeling invariance broken at iter %d", iter)};
    }
    return {kPass, fmt("1000 matrices, worst |diff| %.2e; invariances hold on 100 cases", worst)};
}

/// 4. Argmax invariances: global reliability scaling and the
/// uniform-reliability reduction preserve predictions exactly.
Outcome criterion4() {
    swe::Xorshift64Star rng(404);
    for (int iter = 0; iter < 100; ++iter) {
        const std::size_t members = 1 + rng.next_below(5);
        const std::size_t rows = 1 + rng.next_below(60);
        auto raw = testutil::random_scores(members, rows, 10, rng);
        auto mats = testutil::to_score_matrices(raw);
        std::vector<double> rel(members);
        for (auto& v : rel) v = rng.next_double(0.05, 1.0);

        auto base = swe::swe_combine(mats, rel);
        for (double c : {1e-3, 1.0, 1e3}) {
            std::vector<double> scaled = rel;
            for (auto& v : scaled) v *= c;
            if (swe::swe_combine(mats, scaled).predicted != base.predicted)
                return {kFail, fmt("scale invariance broken at iter %d, c=%g", iter, c)};
        }

        auto uniform = swe::swe_combine(mats, std::vector<double>(members, 0.42));
        for (std::size_t i = 0; i < rows; ++i) {
            std::vector<double> avg(10, 0.0);
            for (std::size_t c = 0; c < 10; ++c) {
                for (std::size_t m = 0; m < members; ++m) avg[c] += raw[m][i][c];
                avg[c] /= double(members);
            }
            if (uniform.predicted[i] != testutil::oracle_argmax(avg))
                return {kFail, fmt("uniform-reliability reduction broken at iter %d", iter)};
        }
    }
    return {kPass, "scaling c in {1e-3,1,1e3} and uniform-reliability reduction, 100 ensembles"};
}

/// 5. Desk-scale Monte Carlo: LeNet-A, N=5, T=10, 8000/2000/2000, 5 epochs.
Outcome criterion5() {
    const auto t0 = Clock::now();
    DataSource src = resolve_data();
    swe::ExperimentConfig cfg = desk_config(src);
    const fs::path out = fs::temp_directory_path() / "swe_acceptance_desk_baseline";
    std::fprintf(stderr, "criterion 5: desk-scale run on %s data (%s)\n",
                 src.from_env ? "user-supplied" : "synthetic", src.dir.string().c_str());
    swe::ExperimentReport rep = run_and_save(cfg, out);

    double min_f1 = 1.0;
    for (const auto& t : rep.trials) min_f1 = std::min({min_f1, t.bagging_f1, t.swe_f1});
    const bool a = min_f1 >= 0.90;
    const bool b = rep.mean_swe_f1 >= rep.mean_bagging_f1 - 0.005;
    const std::size_t counted = rep.superiority.bagging_wins + rep.superiority.draws +
                                rep.superiority.swe_wins;
    const bool c = counted == 10;
    const std::string detail =
        fmt("min trial F1 %.5f (>=0.90 %s); mean bagging %.5f vs swe %.5f (band %s); "
            "counts %zu+%zu+%zu=%zu (%s); %.0f s",
            min_f1, a ? "ok" : "VIOLATED", rep.mean_bagging_f1, rep.mean_swe_f1,
            b ? "ok" : "VIOLATED", rep.superiority.bagging_wins, rep.superiority.draws,
            rep.superiority.swe_wins, counted, c ? "ok" : "VIOLATED", seconds_since(t0));
    return {(a && b && c) ? kPass : kFail, detail};
}

/// 6. Full-scale reproduction (opt-in): full train file, T=30, N=5, each
/// architecture; means in [0.975,0.995] and SWE wins within [10,30].
Outcome criterion6() {
    const char* opt_in = std::getenv("SWE_FULL_SCALE");
    if (!opt_in || std::strcmp(opt_in, "1") != 0)
        return {kSkip, "set SWE_FULL_SCALE=1 (and SWE_DATA_DIR to real MNIST) to run"};
    DataSource src = resolve_data();
    if (!src.from_env || !src.looks_like_mnist)
        return {kSkip, "needs SWE_DATA_DIR pointing at the real MNIST IDX files"};

    std::ostringstream detail;
    bool ok = true;
    for (swe::Variant v : {swe::Variant::LeNetA, swe::Variant::LeNetB, swe::Variant::LeNetC}) {
        swe::ExperimentConfig cfg = desk_config(src);
        cfg.arch.variant = v;
        cfg.trials = 30;
        cfg.split = {.train_count = 50000, .validation_count = 10000, .test_count = 10000,
                     .seed = 7};
        std::fprintf(stderr, "criterion 6: full-scale %s\n", swe::to_string(v));
        const fs::path out =
            fs::temp_directory_path() / (std::string("swe_acceptance_full_") + swe::to_string(v));
        swe::ExperimentReport rep = run_and_save(cfg, out);

        const bool means_ok = rep.mean_bagging_f1 >= 0.975 && rep.mean_bagging_f1 <= 0.995 &&
                              rep.mean_swe_f1 >= 0.975 && rep.mean_swe_f1 <= 0.995;
        const bool wins_ok = rep.superiority.swe_wins >= 10 && rep.superiority.swe_wins <= 30;
        ok = ok && means_ok && wins_ok;
        detail << swe::to_string(v) << ": bagging=" << fmt("%.5f", rep.mean_bagging_f1)
               << " swe=" << fmt("%.5f", rep.mean_swe_f1) << " wins=("
               << rep.superiority.bagging_wins << "," << rep.superiority.draws << ","
               << rep.superiority.swe_wins << ")"
               << (rep.superiority.swe_wins > rep.trials.size() / 2 ? "" : " [no majority]")
               << "; ";
    }
    return {ok ? kPass : kFail, detail.str()};
}

/// 7. Determinism: rerunning the desk-scale experiment gives a byte-identical
/// trials.csv.
Outcome criterion7() {
    DataSource src = resolve_data();
    swe::ExperimentConfig cfg = desk_config(src);
    const fs::path baseline = fs::temp_directory_path() / "swe_acceptance_desk_baseline";
    if (!fs::exists(baseline / "trials.csv")) {
        std::fprintf(stderr, "criterion 7: no baseline from criterion 5, running it\n");
        run_and_save(cfg, baseline);
    }
    const fs::path rerun = fs::temp_directory_path() / "swe_acceptance_desk_rerun";
    std::fprintf(stderr, "criterion 7: desk-scale rerun\n");
    run_and_save(cfg, rerun);

    std::ifstream a(baseline / "trials.csv", std::ios::binary);
    std::ifstream b(rerun / "trials.csv", std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    if (sa.str().empty() || sa.str() != sb.str())
        return {kFail, "trials.csv differs between identical-config runs"};
    return {kPass, fmt("trials.csv byte-identical across runs (%zu bytes)", sa.str().size())};
}

/// 8. IDX parser: round-trip property plus every documented rejection case.
Outcome criterion8() {
    swe::Xorshift64Star rng(808);
    for (int iter = 0; iter < 200; ++iter) {
        const std::uint32_t count = 1 + std::uint32_t(rng.next_below(50));
        const std::uint32_t rows = 1 + std::uint32_t(rng.next_below(16));
        const std::uint32_t cols = 1 + std::uint32_t(rng.next_below(16));
        std::vector<std::uint8_t> file;
        swe::append_be32(file, swe::kIdxImagesMagic);
        swe::append_be32(file, count);
        swe::append_be32(file, rows);
        swe::append_be32(file, cols);
        for (std::size_t i = 0; i < std::size_t(count) * rows * cols; ++i)
            file.push_back(std::uint8_t(rng.next_below(256)));
        if (swe::serialize(swe::parse_idx_images(file)) != file)
            return {kFail, fmt("image round-trip broken at iter %d", iter)};

        std::vector<std::uint8_t> lfile;
        swe::append_be32(lfile, swe::kIdxLabelsMagic);
        swe::append_be32(lfile, count);
        for (std::uint32_t i = 0; i < count; ++i)
            lfile.push_back(std::uint8_t(rng.next_below(10)));
        if (swe::serialize(swe::parse_idx_labels(lfile)) != lfile)
            return {kFail, fmt("label round-trip broken at iter %d", iter)};
    }

    int rejections = 0;
    auto expect_throw = [&rejections](auto&& fn, const char* what) -> const char* {
        try {
            fn();
            return what;
        } catch (const swe::Error&) {
            ++rejections;
            return nullptr;
        }
    };

    std::vector<std::uint8_t> img_wrong_magic, lbl_wrong_magic, short_img, short_lbl,
        img_short_payload, lbl_short_payload, lbl_bad_class;
    swe::append_be32(img_wrong_magic, swe::kIdxLabelsMagic);
    swe::append_be32(img_wrong_magic, 1);
    swe::append_be32(img_wrong_magic, 2);
    swe::append_be32(img_wrong_magic, 2);
    img_wrong_magic.resize(16 + 4, 0);
    swe::append_be32(lbl_wrong_magic, swe::kIdxImagesMagic);
    swe::append_be32(lbl_wrong_magic, 1);
    lbl_wrong_magic.push_back(0);
    short_img.resize(10, 0);
    short_lbl.resize(7, 0);
    swe::append_be32(img_short_payload, swe::kIdxImagesMagic);
    swe::append_be32(img_short_payload, 2);
    swe::append_be32(img_short_payload, 2);
    swe::append_be32(img_short_payload, 2);
    img_short_payload.resize(16 + 7, 0); // needs 8
    swe::append_be32(lbl_short_payload, swe::kIdxLabelsMagic);
    swe::append_be32(lbl_short_payload, 3);
    lbl_short_payload.resize(8 + 2, 0);
    swe::append_be32(lbl_bad_class, swe::kIdxLabelsMagic);
    swe::append_be32(lbl_bad_class, 1);
    lbl_bad_class.push_back(12);

    const char* failed = nullptr;
    if (!failed) failed = expect_throw([&] { swe::parse_idx_images(img_wrong_magic); },
                                       "image wrong magic accepted");
    if (!failed) failed = expect_throw([&] { swe::parse_idx_labels(lbl_wrong_magic); },
                                       "label wrong magic accepted");
    if (!failed) failed = expect_throw([&] { swe::parse_idx_images(short_img); },
                                       "short image header accepted");
    if (!failed) failed = expect_throw([&] { swe::parse_idx_labels(short_lbl); },
                                       "short label header accepted");
    if (!failed) failed = expect_throw([&] { swe::parse_idx_images(img_short_payload); },
                                       "short image payload accepted");
    if (!failed) failed = expect_throw([&] { swe::parse_idx_labels(lbl_short_payload); },
                                       "short label payload accepted");
    if (!failed) failed = expect_throw([&] { swe::parse_idx_labels(lbl_bad_class); },
                                       "label 12 accepted");
    if (failed) return {kFail, failed};
    return {kPass, fmt("200 round-trips, %d/7 rejection cases exercised", rejections)};
}

} // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
    if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8};

    using CriterionFn = Outcome (*)();
    const CriterionFn fns[9] = {nullptr,    criterion1, criterion2, criterion3, criterion4,
                                criterion5, criterion6, criterion7, criterion8};
    const char* names[9] = {nullptr,
                            "combiner oracle equivalence",
                            "gradient finite-difference suite",
                            "metric oracle + invariances",
                            "argmax invariances",
                            "desk-scale Monte Carlo",
                            "full-scale reproduction (opt-in)",
                            "experiment determinism",
                            "IDX parser round-trip + rejections"};

    int failures = 0;
    bool all_skipped = !which.empty();
    for (int n : which) {
        if (n < 1 || n > 8) {
            std::printf("criterion %d: unknown\n", n);
            ++failures;
            continue;
        }
        Outcome o;
        try {
            o = fns[n]();
        } catch (const std::exception& e) {
            o = {kFail, std::string("exception: ") + e.what()};
        }
        const char* verdict = o.code == kPass ? "PASS" : (o.code == kSkip ? "SKIP" : "FAIL");
        std::printf("criterion %d: %s — %s (%s)\n", n, verdict, names[n], o.detail.c_str());
        std::fflush(stdout);
        if (o.code == kFail) ++failures;
        if (o.code != kSkip) all_skipped = false;
    }
    if (failures > 0) return 1;
    if (all_skipped) return kSkip;
    return 0;
}
