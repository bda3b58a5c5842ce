#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccref/common.hpp"
#include "ccref/features.hpp"
#include "ccref/gbdt.hpp"
#include "ccref/metrics.hpp"

namespace ccref {

// The 12 tuned hyperparameters: four tree-stage, plus the pipeline knobs of
// the encoder, reduction, and aggregation stages.
struct Hyperparameters {
    size_t n_rounds = 200;
    size_t max_depth = 3;
    double learning_rate = 0.1;
    size_t min_samples_leaf = 1;
    double subsample_fraction = 1.0;
    size_t segment_window_before = 2;
    size_t segment_window_after = 1;
    size_t reduction_dims = 2;
    std::string aggregate_set_id = "full";
    std::string encoder_kind = "tfidf";  // "tfidf" | "embedding"
    size_t tokenizer_min_len = 2;
    std::string class_weighting = "none";  // "none" | "balanced"

    void validate() const {
        if (n_rounds < 1 || n_rounds > 10000) throw InputError("n_rounds outside [1, 10000]");
        if (max_depth < 1 || max_depth > 16) throw InputError("max_depth outside [1, 16]");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw InputError("learning_rate outside (0, 1]");
        if (min_samples_leaf < 1) throw InputError("min_samples_leaf must be >= 1");
        if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0))
            throw InputError("subsample_fraction outside (0, 1]");
        if (segment_window_before > 10 || segment_window_after > 10)
            throw InputError("segment windows outside [0, 10]");
        if (reduction_dims < 1 || reduction_dims > 2)
            throw InputError("reduction_dims outside [1, 2]");
        aggregate_set(aggregate_set_id);  // throws on unknown id
        if (encoder_kind != "tfidf" && encoder_kind != "embedding")
            throw InputError("encoder_kind must be 'tfidf' or 'embedding'");
        if (tokenizer_min_len < 1 || tokenizer_min_len > 10)
            throw InputError("tokenizer_min_len outside [1, 10]");
        if (class_weighting != "none" && class_weighting != "balanced")
            throw InputError("class_weighting must be 'none' or 'balanced'");
    }

    GbdtConfig tree_config() const {
        GbdtConfig cfg;
        cfg.n_rounds = n_rounds;
        cfg.max_depth = max_depth;
        cfg.learning_rate = learning_rate;
        cfg.min_samples_leaf = min_samples_leaf;
        cfg.subsample_fraction = subsample_fraction;
        cfg.balanced_class_weights = class_weighting == "balanced";
        return cfg;
    }

    bool operator==(const Hyperparameters&) const = default;
};

inline nlohmann::json hyperparameters_to_json(const Hyperparameters& hp) {
    return {{"n_rounds", hp.n_rounds},
            {"max_depth", hp.max_depth},
            {"learning_rate", hp.learning_rate},
            {"min_samples_leaf", hp.min_samples_leaf},
            {"subsample_fraction", hp.subsample_fraction},
            {"segment_window_before", hp.segment_window_before},
            {"segment_window_after", hp.segment_window_after},
            {"reduction_dims", hp.reduction_dims},
            {"aggregate_set_id", hp.aggregate_set_id},
            {"encoder_kind", hp.encoder_kind},
            {"tokenizer_min_len", hp.tokenizer_min_len},
            {"class_weighting", hp.class_weighting}};
}

inline Hyperparameters hyperparameters_from_json(const nlohmann::json& j) {
    Hyperparameters hp;
    hp.n_rounds = j.value("n_rounds", hp.n_rounds);
    hp.max_depth = j.value("max_depth", hp.max_depth);
    hp.learning_rate = j.value("learning_rate", hp.learning_rate);
    hp.min_samples_leaf = j.value("min_samples_leaf", hp.min_samples_leaf);
    hp.subsample_fraction = j.value("subsample_fraction", hp.subsample_fraction);
    hp.segment_window_before = j.value("segment_window_before", hp.segment_window_before);
    hp.segment_window_after = j.value("segment_window_after", hp.segment_window_after);
    hp.reduction_dims = j.value("reduction_dims", hp.reduction_dims);
    hp.aggregate_set_id = j.value("aggregate_set_id", hp.aggregate_set_id);
    hp.encoder_kind = j.value("encoder_kind", hp.encoder_kind);
    hp.tokenizer_min_len = j.value("tokenizer_min_len", hp.tokenizer_min_len);
    hp.class_weighting = j.value("class_weighting", hp.class_weighting);
    hp.validate();
    return hp;
}

struct TrainedModel {
    std::vector<std::string> classes;         // class index -> name
    std::vector<std::string> feature_schema;  // column names, order fixed
    Hyperparameters hp;
    std::uint64_t seed = 0;
    GbdtModel booster;

    size_t class_index(const std::string& c) const {
        auto it = std::find(classes.begin(), classes.end(), c);
        if (it == classes.end()) throw ModelError("unknown class '" + c + "'");
        return static_cast<size_t>(it - classes.begin());
    }
};

// Trains on already-featurized edges. Classes are the sorted distinct labels.
inline TrainedModel train(const std::vector<EdgeFeatures>& features,
                          const std::vector<std::string>& labels, const Hyperparameters& hp,
                          std::uint64_t seed,
                          const std::vector<std::string>& schema = {}) {
    if (features.size() != labels.size())
        throw DataError("train: features and labels lengths differ");
    if (features.empty()) throw DataError("train: empty training set");
    hp.validate();
    std::set<std::string> class_set(labels.begin(), labels.end());
    if (class_set.size() < 2) throw DataError("train: need at least 2 distinct classes");
    TrainedModel m;
    m.classes.assign(class_set.begin(), class_set.end());
    m.feature_schema =
        schema.empty() ? feature_schema(hp.reduction_dims, hp.aggregate_set_id) : schema;
    m.hp = hp;
    m.seed = seed;
    std::vector<std::vector<double>> x;
    x.reserve(features.size());
    for (size_t i = 0; i < features.size(); ++i) {
        if (features[i].values.size() != m.feature_schema.size())
            throw DataError("train: row " + std::to_string(i) + " has " +
                            std::to_string(features[i].values.size()) +
                            " values, schema expects " +
                            std::to_string(m.feature_schema.size()));
        x.push_back(features[i].values);
    }
    std::vector<size_t> y;
    y.reserve(labels.size());
    for (const std::string& l : labels) y.push_back(m.class_index(l));
    m.booster = gbdt_train(x, y, m.classes.size(), hp.tree_config(), seed);
    return m;
}

struct Prediction {
    std::string label;
    std::vector<double> probabilities;  // aligned with model.classes
};

inline Prediction predict(const TrainedModel& m, const EdgeFeatures& x) {
    if (x.values.size() != m.feature_schema.size())
        throw ModelError("predict: feature vector has " + std::to_string(x.values.size()) +
                         " values, schema expects " + std::to_string(m.feature_schema.size()));
    for (double v : x.values)
        if (!std::isfinite(v)) throw ModelError("predict: non-finite feature value");
    Prediction p;
    p.probabilities = m.booster.probabilities(x.values);
    p.label = m.classes[m.booster.predict_class(x.values)];
    return p;
}

// i.i.d. draws from the empirical class distribution of `labels`.
inline std::vector<std::string> random_baseline(const std::vector<std::string>& labels,
                                                std::uint64_t seed) {
    if (labels.empty()) throw DataError("random_baseline: empty labels");
    std::map<std::string, size_t> counts;
    for (const std::string& l : labels) ++counts[l];
    std::vector<std::pair<std::string, double>> cumulative;
    double acc = 0.0;
    for (const auto& [cls, count] : counts) {
        acc += static_cast<double>(count) / static_cast<double>(labels.size());
        cumulative.emplace_back(cls, acc);
    }
    SplitMix64 rng(seed);
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        double u = rng.uniform01();
        size_t pick = cumulative.size() - 1;
        for (size_t c = 0; c < cumulative.size(); ++c)
            if (u <= cumulative[c].second) {
                pick = c;
                break;
            }
        out.push_back(cumulative[pick].first);
    }
    return out;
}

namespace detail {

// Round-robin deal of per-class shuffled rows into k folds.
inline std::vector<size_t> stratified_fold_of(const std::vector<std::string>& labels, size_t k,
                                              std::uint64_t seed) {
    std::map<std::string, std::vector<size_t>> by_class;
    for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::vector<size_t> fold_of(labels.size(), 0);
    SplitMix64 rng(seed);
    size_t next = 0;
    for (auto& [cls, rows] : by_class) {
        shuffle_inplace(rows, rng);
        for (size_t row : rows) fold_of[row] = next++ % k;
    }
    return fold_of;
}

inline bool folds_cover_all_classes(const std::vector<std::string>& labels,
                                    const std::vector<size_t>& fold_of, size_t k) {
    std::set<std::string> all(labels.begin(), labels.end());
    for (size_t f = 0; f < k; ++f) {
        std::set<std::string> train_classes;
        for (size_t i = 0; i < labels.size(); ++i)
            if (fold_of[i] != f) train_classes.insert(labels[i]);
        if (train_classes != all) return false;
    }
    return true;
}

}  // namespace detail

struct CvResult {
    Hyperparameters best;
    std::vector<double> mean_weighted_f1;  // one entry per grid config
};

// Stratified k-fold selection over a hyperparameter grid; ties resolved
// toward fewer rounds, then lower depth, then grid order.
inline CvResult cross_validate(const std::vector<EdgeFeatures>& features,
                               const std::vector<std::string>& labels,
                               const std::vector<Hyperparameters>& grid, size_t k,
                               std::uint64_t seed) {
    if (grid.empty()) throw InputError("cross_validate: empty grid");
    if (features.size() != labels.size())
        throw DataError("cross_validate: features and labels lengths differ");
    if (k < 2) throw InputError("cross_validate: need k >= 2");
    if (k > features.size()) throw DataError("cross_validate: k exceeds sample count");

    std::vector<size_t> fold_of = detail::stratified_fold_of(labels, k, seed);
    if (!detail::folds_cover_all_classes(labels, fold_of, k)) {
        fold_of = detail::stratified_fold_of(labels, k, seed + 1);  // one re-stratify
        if (!detail::folds_cover_all_classes(labels, fold_of, k))
            throw DataError("cross_validate: a fold is missing a class even after re-stratifying");
    }

    // CV runs on a fixed feature matrix, so the schema is positional here;
    // pipeline-stage parameters are tuned by rebuilding features upstream.
    std::vector<std::string> schema;
    for (size_t c = 0; c < features[0].values.size(); ++c)
        schema.push_back("f" + std::to_string(c));

    CvResult result;
    result.mean_weighted_f1.assign(grid.size(), 0.0);
    for (size_t gi = 0; gi < grid.size(); ++gi) {
        double sum = 0.0;
        for (size_t f = 0; f < k; ++f) {
            std::vector<EdgeFeatures> train_x, test_x;
            std::vector<std::string> train_y, test_y;
            for (size_t i = 0; i < features.size(); ++i) {
                if (fold_of[i] == f) {
                    test_x.push_back(features[i]);
                    test_y.push_back(labels[i]);
                } else {
                    train_x.push_back(features[i]);
                    train_y.push_back(labels[i]);
                }
            }
            TrainedModel m = train(train_x, train_y, grid[gi], seed, schema);
            std::vector<std::string> preds;
            preds.reserve(test_x.size());
            for (const EdgeFeatures& row : test_x) preds.push_back(predict(m, row).label);
            sum += test_y.empty() ? 0.0 : weighted_f1(test_y, preds);
        }
        result.mean_weighted_f1[gi] = sum / static_cast<double>(k);
    }
    size_t best = 0;
    for (size_t gi = 1; gi < grid.size(); ++gi) {
        double a = result.mean_weighted_f1[gi], b = result.mean_weighted_f1[best];
        if (a > b ||
            (a == b && (grid[gi].n_rounds < grid[best].n_rounds ||
                        (grid[gi].n_rounds == grid[best].n_rounds &&
                         grid[gi].max_depth < grid[best].max_depth))))
            best = gi;
    }
    result.best = grid[best];
    return result;
}

// --- model serialization -------------------------------------------------

inline nlohmann::json model_to_json(const TrainedModel& m) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& round : m.booster.rounds) {
        nlohmann::json round_json = nlohmann::json::array();
        for (const RegressionTree& t : round) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const TreeNode& n : t.nodes)
                nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left},
                                 {"r", n.right}, {"v", n.value}});
            round_json.push_back(std::move(nodes));
        }
        trees.push_back(std::move(round_json));
    }
    return {{"format", "ccref-model"},
            {"version", 1},
            {"classes", m.classes},
            {"feature_schema", m.feature_schema},
            {"hyperparameters", hyperparameters_to_json(m.hp)},
            {"seed", m.seed},
            {"n_features", m.booster.n_features},
            {"trees", trees},
            {"train_loss", m.booster.train_loss}};
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "ccref-model")
        throw ModelError("model file: unexpected format tag");
    TrainedModel m;
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.feature_schema = j.at("feature_schema").get<std::vector<std::string>>();
    m.hp = hyperparameters_from_json(j.at("hyperparameters"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.booster.n_classes = m.classes.size();
    m.booster.n_features = j.at("n_features").get<size_t>();
    m.booster.config = m.hp.tree_config();
    m.booster.seed = m.seed;
    for (const auto& round_json : j.at("trees")) {
        std::vector<RegressionTree> round;
        for (const auto& tree_json : round_json) {
            RegressionTree t;
            for (const auto& n : tree_json)
                t.nodes.push_back({n.at("f").get<int>(), n.at("t").get<double>(),
                                   n.at("l").get<int>(), n.at("r").get<int>(),
                                   n.at("v").get<double>()});
            round.push_back(std::move(t));
        }
        m.booster.rounds.push_back(std::move(round));
    }
    if (j.contains("train_loss"))
        m.booster.train_loss = j.at("train_loss").get<std::vector<double>>();
    return m;
}

}  // namespace ccref
