#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccref/common.hpp"

namespace ccref {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    size_t support = 0;
};

struct ConfusionMatrix {
    std::vector<std::string> classes;                 // sorted
    std::vector<std::vector<size_t>> counts;          // counts[true][pred]

    size_t index_of(const std::string& c) const {
        auto it = std::lower_bound(classes.begin(), classes.end(), c);
        if (it == classes.end() || *it != c) throw DataError("unknown class '" + c + "'");
        return static_cast<size_t>(it - classes.begin());
    }
};

template <typename Label>
ConfusionMatrix confusion_matrix(const std::vector<Label>& y_true,
                                 const std::vector<Label>& y_pred) {
    if (y_true.size() != y_pred.size())
        throw DataError("confusion_matrix: y_true and y_pred lengths differ");
    if (y_true.empty()) throw DataError("confusion_matrix: empty input");
    std::set<std::string> class_set;
    for (const Label& c : y_true) class_set.insert(std::string(c));
    for (const Label& c : y_pred) class_set.insert(std::string(c));
    ConfusionMatrix m;
    m.classes.assign(class_set.begin(), class_set.end());
    m.counts.assign(m.classes.size(), std::vector<size_t>(m.classes.size(), 0));
    for (size_t i = 0; i < y_true.size(); ++i)
        ++m.counts[m.index_of(std::string(y_true[i]))][m.index_of(std::string(y_pred[i]))];
    return m;
}

inline std::map<std::string, ClassMetrics> per_class_metrics(const ConfusionMatrix& m) {
    std::map<std::string, ClassMetrics> out;
    size_t k = m.classes.size();
    for (size_t c = 0; c < k; ++c) {
        size_t tp = m.counts[c][c], fp = 0, fn = 0, support = 0;
        for (size_t o = 0; o < k; ++o) {
            if (o != c) {
                fp += m.counts[o][c];
                fn += m.counts[c][o];
            }
            support += m.counts[c][o];
        }
        ClassMetrics cm;
        cm.support = support;
        cm.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        cm.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        cm.f1 = cm.precision + cm.recall > 0
                    ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                    : 0.0;  // zero-division convention
        out[m.classes[c]] = cm;
    }
    return out;
}

// Support-weighted mean of per-class F1 scores.
template <typename Label>
double weighted_f1(const std::vector<Label>& y_true, const std::vector<Label>& y_pred) {
    ConfusionMatrix m = confusion_matrix(y_true, y_pred);
    auto metrics = per_class_metrics(m);
    double total = static_cast<double>(y_true.size());
    double sum = 0.0;
    for (const auto& [cls, cm] : metrics)
        sum += static_cast<double>(cm.support) / total * cm.f1;
    return sum;
}

template <typename Label>
double accuracy(const std::vector<Label>& y_true, const std::vector<Label>& y_pred) {
    if (y_true.size() != y_pred.size() || y_true.empty())
        throw DataError("accuracy: bad input lengths");
    size_t hits = 0;
    for (size_t i = 0; i < y_true.size(); ++i)
        if (y_true[i] == y_pred[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // monotone in fpr, from (0,0) to (1,1)
    double area = 0.0;
};

// Threshold sweep over the distinct scores, equal scores grouped into one
// step; area by the trapezoid rule.
inline RocCurve roc_curve(const std::vector<int>& y_true, const std::vector<double>& scores) {
    if (y_true.size() != scores.size()) throw DataError("roc_curve: length mismatch");
    if (y_true.empty()) throw DataError("roc_curve: empty input");
    size_t pos = 0, neg = 0;
    for (int y : y_true) (y != 0 ? pos : neg) += 1;
    if (pos == 0 || neg == 0) throw DataError("roc_curve: both classes must be present");

    std::vector<size_t> order(y_true.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    size_t tp = 0, fp = 0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        double s = scores[order[i]];
        size_t j = i;
        while (j < order.size() && scores[order[j]] == s) {
            if (y_true[order[j]] != 0)
                ++tp;
            else
                ++fp;
            ++j;
        }
        double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        curve.points.push_back({fpr, tpr, s});
        curve.area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
        i = j;
    }
    return curve;
}

struct EvalReport {
    std::string taxonomy;  // "binary" or "multiclass"
    double weighted_f1 = 0.0;
    double acc = 0.0;
    std::map<std::string, ClassMetrics> per_class;
    ConfusionMatrix confusion;
    std::vector<RocPoint> roc_points;  // binary only
    double roc_area = 0.0;
    bool has_roc = false;
};

template <typename Label>
EvalReport evaluate_predictions(const std::string& taxonomy, const std::vector<Label>& y_true,
                                const std::vector<Label>& y_pred) {
    EvalReport r;
    r.taxonomy = taxonomy;
    r.confusion = confusion_matrix(y_true, y_pred);
    r.per_class = per_class_metrics(r.confusion);
    r.weighted_f1 = weighted_f1(y_true, y_pred);
    r.acc = accuracy(y_true, y_pred);
    return r;
}

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["taxonomy"] = r.taxonomy;
    j["weighted_f1"] = r.weighted_f1;
    j["accuracy"] = r.acc;
    nlohmann::json pc;
    for (const auto& [cls, m] : r.per_class)
        pc[cls] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                   {"support", m.support}};
    j["per_class"] = pc;
    j["confusion"] = {{"classes", r.confusion.classes}, {"counts", r.confusion.counts}};
    if (r.has_roc) {
        nlohmann::json pts = nlohmann::json::array();
        for (const RocPoint& p : r.roc_points)
            pts.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}});
        j["roc"] = {{"points", pts}, {"area", r.roc_area}};
    }
    return j;
}

}  // namespace ccref
