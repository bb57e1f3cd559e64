#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "swe/errors.hpp"

namespace swe {

/// Row = true class, column = predicted class.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes = 10)
        : classes_(classes), counts_(classes * classes, 0) {}

    std::size_t classes() const { return classes_; }

    void add(int truth, int predicted) {
        check(truth);
        check(predicted);
        ++counts_[std::size_t(truth) * classes_ + std::size_t(predicted)];
    }

    std::int64_t at(std::size_t truth, std::size_t predicted) const {
        return counts_[truth * classes_ + predicted];
    }

    std::int64_t total() const {
        std::int64_t t = 0;
        for (std::int64_t c : counts_) t += c;
        return t;
    }

private:
    void check(int c) const {
        if (c < 0 || std::size_t(c) >= classes_)
            throw ClassOutOfRange("class " + std::to_string(c) + " outside [0," +
                                  std::to_string(classes_) + ")");
    }

    std::size_t classes_;
    std::vector<std::int64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const int> predictions,
                                 std::span<const int> truths,
                                 std::size_t classes = 10) {
    if (predictions.size() != truths.size())
        throw LengthMismatch(std::to_string(predictions.size()) + " predictions vs " +
                             std::to_string(truths.size()) + " truths");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truths.size(); ++i)
        cm.add(truths[i], predictions[i]);
    return cm;
}

struct F1Report {
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
};

/// Per-class precision/recall/F1 and their unweighted (macro) mean.
/// The 0/0 cases are defined as 0. micro_f1 is also reported; for single-label
/// classification it equals plain accuracy.
inline F1Report macro_f1(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw EmptyMatrix("confusion matrix has no samples");
    const std::size_t k = cm.classes();
    F1Report rep;
    rep.precision.resize(k);
    rep.recall.resize(k);
    rep.f1.resize(k);
    std::int64_t diag = 0;
    double macro = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        std::int64_t tp = cm.at(c, c);
        std::int64_t fp = 0, fn = 0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        diag += tp;
        double p = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
        double r = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
        double f = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        rep.precision[c] = p;
        rep.recall[c] = r;
        rep.f1[c] = f;
        macro += f;
    }
    rep.macro_f1 = macro / double(k);
    rep.micro_f1 = double(diag) / double(cm.total());
    return rep;
}

inline nlohmann::json to_json(const F1Report& rep) {
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t c = 0; c < rep.f1.size(); ++c)
        per.push_back({{"class", c},
                       {"precision", rep.precision[c]},
                       {"recall", rep.recall[c]},
                       {"f1", rep.f1[c]}});
    return {{"macro_f1", rep.macro_f1}, {"micro_f1", rep.micro_f1}, {"per_class", per}};
}

} // namespace swe
