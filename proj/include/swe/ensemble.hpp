#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "swe/dataset.hpp"
#include "swe/errors.hpp"
#include "swe/metrics.hpp"
#include "swe/network.hpp"

namespace swe {

enum class FusionMethod { Swe, Bagging };

inline const char* to_string(FusionMethod m) {
    return m == FusionMethod::Swe ? "swe" : "bagging";
}

inline FusionMethod parse_fusion_method(const std::string& s) {
    if (s == "swe") return FusionMethod::Swe;
    if (s == "bagging") return FusionMethod::Bagging;
    throw BadConfig("unknown fusion method '" + s + "'");
}

/// Per-sample class scores, one row per sample. Combiner arithmetic is always
/// double precision regardless of the networks' scalar type.
struct ScoreMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    ScoreMatrix() = default;
    ScoreMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;
};

/// Largest value wins; ties go to the lowest class index.
inline int argmax_class(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
        if (row[c] > row[best]) best = c;
    return static_cast<int>(best);
}

struct CombinedOutput {
    ScoreMatrix fused;               // weighted-score sums, or vote counts
    std::vector<int> predicted;      // argmax of fused per the method's tie-break
    std::vector<ScoreMatrix> partials; // per-member reliability-scaled scores, on request
};

namespace detail {

inline void check_members(std::span<const ScoreMatrix> scores) {
    if (scores.empty()) throw EmptyEnsemble("no member score matrices");
    for (const ScoreMatrix& s : scores)
        if (s.rows != scores[0].rows || s.cols != scores[0].cols)
            throw ShapeMismatch("member score matrices differ in shape");
}

} // namespace detail

/// Weighted score fusion: each member's score matrix is scaled by that
/// member's reliability and the scaled matrices are summed; predictions are
/// the row-wise argmax of the sum. Members are reduced in index order.
inline CombinedOutput swe_combine(std::span<const ScoreMatrix> scores,
                                  std::span<const double> reliabilities,
                                  bool keep_partials = false) {
    detail::check_members(scores);
    if (reliabilities.size() != scores.size())
        throw ShapeMismatch(std::to_string(scores.size()) + " members vs " +
                            std::to_string(reliabilities.size()) + " reliabilities");
    const std::size_t rows = scores[0].rows, cols = scores[0].cols;
    CombinedOutput out;
    out.fused = ScoreMatrix(rows, cols);
    for (std::size_t m = 0; m < scores.size(); ++m) {
        const double r = reliabilities[m];
        ScoreMatrix part;
        if (keep_partials) part = ScoreMatrix(rows, cols);
        for (std::size_t i = 0; i < rows * cols; ++i) {
            const double p = r * scores[m].data[i];
            out.fused.data[i] += p;
            if (keep_partials) part.data[i] = p;
        }
        if (keep_partials) out.partials.push_back(std::move(part));
    }
    out.predicted.resize(rows);
    for (std::size_t i = 0; i < rows; ++i)
        out.predicted[i] = argmax_class(out.fused.row(i));
    return out;
}

/// Majority voting: each member votes its per-row argmax; fused holds the
/// vote counts. Vote ties are broken by the largest summed raw score among
/// the tied classes, then by the lowest class index.
inline CombinedOutput bagging_combine(std::span<const ScoreMatrix> scores,
                                      bool keep_partials = false) {
    detail::check_members(scores);
    const std::size_t rows = scores[0].rows, cols = scores[0].cols;
    CombinedOutput out;
    out.fused = ScoreMatrix(rows, cols);
    if (keep_partials)
        out.partials.assign(scores.begin(), scores.end());
    std::vector<double> score_sum(cols);
    out.predicted.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        std::fill(score_sum.begin(), score_sum.end(), 0.0);
        for (const ScoreMatrix& s : scores) {
            const int vote = argmax_class(s.row(i));
            out.fused.at(i, std::size_t(vote)) += 1.0;
            for (std::size_t c = 0; c < cols; ++c) score_sum[c] += s.at(i, c);
        }
        double best_votes = -1.0;
        int pick = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = out.fused.at(i, c);
            if (v > best_votes ||
                (v == best_votes && score_sum[c] > score_sum[std::size_t(pick)])) {
                best_votes = v;
                pick = static_cast<int>(c);
            }
        }
        out.predicted[i] = pick;
    }
    return out;
}

/// Forward a whole dataset through one model in infer mode, in fixed-size
/// batches, collecting softmax scores as doubles.
template <typename T>
ScoreMatrix score_matrix(Network<T>& net, const Dataset& ds, std::size_t batch_size = 256) {
    const Mode saved = net.mode();
    net.set_mode(Mode::Infer);
    const std::size_t n = ds.size();
    const std::size_t classes = net.arch().classifier_width;
    ScoreMatrix out(n, classes);
    const std::size_t px = kImageChannels * kImageSide * kImageSide;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t b = std::min(batch_size, n - start);
        Tensor<T> x({b, kImageChannels, kImageSide, kImageSide});
        for (std::size_t i = 0; i < b * px; ++i)
            x[i] = static_cast<T>(ds.images.data()[start * px + i]);
        Tensor<T> probs = net.forward(x);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t c = 0; c < classes; ++c)
                out.at(start + i, c) = double(probs(i, c));
    }
    net.set_mode(saved);
    return out;
}

/// Validation macro-F1 of the model's argmax predictions; this is the
/// member's reliability weight.
template <typename T>
double measure_reliability(Network<T>& net, const Dataset& validation,
                           std::size_t batch_size = 256) {
    if (validation.size() == 0) throw EmptyValidation("empty validation set");
    ScoreMatrix scores = score_matrix(net, validation, batch_size);
    std::vector<int> pred(scores.rows), truth(scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        pred[i] = argmax_class(scores.row(i));
        truth[i] = validation.labels[i];
    }
    return macro_f1(confusion(pred, truth, scores.cols)).macro_f1;
}

/// A trained model plus its frozen validation reliability.
template <typename T = float>
struct EnsembleMember {
    Network<T> model;
    double reliability = 0.0;
};

template <typename T = float>
class Ensemble {
public:
    explicit Ensemble(FusionMethod method = FusionMethod::Swe) : method_(method) {}

    FusionMethod method() const { return method_; }
    void set_method(FusionMethod m) { method_ = m; }

    void add_member(Network<T> model, double reliability) {
        members_.push_back({std::move(model), reliability});
    }

    std::size_t size() const { return members_.size(); }
    std::vector<EnsembleMember<T>>& members() { return members_; }
    const std::vector<EnsembleMember<T>>& members() const { return members_; }

    std::vector<double> reliabilities() const {
        std::vector<double> r;
        r.reserve(members_.size());
        for (const auto& m : members_) r.push_back(m.reliability);
        return r;
    }

    /// Run every member over the dataset and fuse per the configured method.
    CombinedOutput predict(const Dataset& ds, bool keep_partials = false,
                           std::size_t batch_size = 256) {
        if (members_.empty()) throw EmptyEnsemble("ensemble has no members");
        std::vector<ScoreMatrix> scores;
        scores.reserve(members_.size());
        for (auto& m : members_)
            scores.push_back(score_matrix(m.model, ds, batch_size));
        return method_ == FusionMethod::Swe
                   ? swe_combine(scores, reliabilities(), keep_partials)
                   : bagging_combine(scores, keep_partials);
    }

private:
    FusionMethod method_;
    std::vector<EnsembleMember<T>> members_;
};

// --- ensemble manifest -------------------------------------------------
// JSON file listing member checkpoints and their reliabilities:
//   {"method":"swe","master_seed":1,
//    "members":[{"checkpoint":"m0.swenet","reliability":0.97}, ...]}

struct ManifestEntry {
    std::string checkpoint;
    double reliability = 0.0;
};

struct EnsembleManifest {
    FusionMethod method = FusionMethod::Swe;
    std::uint64_t master_seed = 0;
    std::vector<ManifestEntry> members;
};

inline void save_manifest(const EnsembleManifest& m, const std::filesystem::path& path) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& e : m.members)
        members.push_back({{"checkpoint", e.checkpoint}, {"reliability", e.reliability}});
    nlohmann::json j = {{"method", to_string(m.method)},
                        {"master_seed", m.master_seed},
                        {"members", members}};
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline EnsembleManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    EnsembleManifest m;
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        m.method = parse_fusion_method(j.at("method").get<std::string>());
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        for (const auto& e : j.at("members"))
            m.members.push_back({e.at("checkpoint").get<std::string>(),
                                 e.at("reliability").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw MalformedReport(path.string() + ": " + e.what());
    }
    return m;
}

} // namespace swe
