#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ccref/common.hpp"
#include "ccref/stats.hpp"

namespace ccref {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output, learning rate folded in
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(const std::vector<double>& x) const {
        int i = 0;
        while (nodes[i].feature >= 0)
            i = x[static_cast<size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                               : nodes[i].right;
        return nodes[i].value;
    }
};

struct GbdtConfig {
    size_t n_rounds = 200;
    size_t max_depth = 3;
    double learning_rate = 0.1;
    size_t min_samples_leaf = 1;
    double subsample_fraction = 1.0;
    bool balanced_class_weights = false;
};

// Boosted ensemble over K-1-vs-rest scores: a single logistic score for two
// classes, one softmax score (and tree) per class otherwise.
struct GbdtModel {
    size_t n_classes = 0;
    size_t n_features = 0;
    GbdtConfig config;
    std::uint64_t seed = 0;
    std::vector<std::vector<RegressionTree>> rounds;  // [round][score_dim]
    std::vector<double> train_loss;                   // optimized loss per round

    size_t score_dims() const { return n_classes == 2 ? 1 : n_classes; }

    std::vector<double> raw_scores(const std::vector<double>& x) const {
        std::vector<double> f(score_dims(), 0.0);
        for (const auto& round : rounds)
            for (size_t k = 0; k < round.size(); ++k) f[k] += round[k].predict(x);
        return f;
    }

    std::vector<double> probabilities(const std::vector<double>& x) const {
        std::vector<double> f = raw_scores(x);
        std::vector<double> p(n_classes, 0.0);
        if (n_classes == 2) {
            double s = 1.0 / (1.0 + std::exp(-f[0]));
            p[1] = s;
            p[0] = 1.0 - s;
        } else {
            double mx = *std::max_element(f.begin(), f.end());
            double sum = 0.0;
            for (size_t k = 0; k < n_classes; ++k) {
                p[k] = std::exp(f[k] - mx);
                sum += p[k];
            }
            for (double& v : p) v /= sum;
        }
        return p;
    }

    size_t predict_class(const std::vector<double>& x) const {
        std::vector<double> p = probabilities(x);
        return static_cast<size_t>(
            std::max_element(p.begin(), p.end()) - p.begin());  // first max on ties
    }
};

namespace detail {

constexpr double kLambda = 1.0;     // L2 on leaf weights
constexpr double kMaxLeaf = 10.0;   // pre-shrinkage clip, keeps Newton steps sane
constexpr double kMinGain = 1e-12;

struct SplitDecision {
    bool found = false;
    size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

inline double leaf_score(double g, double h) { return g * g / (h + kLambda); }

// Exact greedy split search over the rows in `idx`.
inline SplitDecision best_split(const std::vector<std::vector<double>>& x,
                                const std::vector<double>& grad,
                                const std::vector<double>& hess, const std::vector<size_t>& idx,
                                size_t min_samples_leaf) {
    SplitDecision best;
    double g_total = 0.0, h_total = 0.0;
    for (size_t i : idx) {
        g_total += grad[i];
        h_total += hess[i];
    }
    double parent = leaf_score(g_total, h_total);
    size_t n_features = x[0].size();
    std::vector<size_t> sorted = idx;
    for (size_t f = 0; f < n_features; ++f) {
        std::stable_sort(sorted.begin(), sorted.end(),
                         [&](size_t a, size_t b) { return x[a][f] < x[b][f]; });
        double g_left = 0.0, h_left = 0.0;
        for (size_t pos = 0; pos + 1 < sorted.size(); ++pos) {
            g_left += grad[sorted[pos]];
            h_left += hess[sorted[pos]];
            double v = x[sorted[pos]][f], next = x[sorted[pos + 1]][f];
            if (v == next) continue;
            size_t left_count = pos + 1, right_count = sorted.size() - left_count;
            if (left_count < min_samples_leaf || right_count < min_samples_leaf) continue;
            double gain = leaf_score(g_left, h_left) +
                          leaf_score(g_total - g_left, h_total - h_left) - parent;
            if (gain > best.gain + kMinGain) {
                best.found = true;
                best.feature = f;
                best.threshold = v + (next - v) / 2.0;
                best.gain = gain;
            }
        }
    }
    return best;
}

inline void grow_node(RegressionTree& tree, int node_id,
                      const std::vector<std::vector<double>>& x,
                      const std::vector<double>& grad, const std::vector<double>& hess,
                      std::vector<size_t> idx, size_t depth, const GbdtConfig& cfg) {
    double g = 0.0, h = 0.0;
    for (size_t i : idx) {
        g += grad[i];
        h += hess[i];
    }
    auto make_leaf = [&] {
        double v = -g / (h + kLambda);
        v = std::clamp(v, -kMaxLeaf, kMaxLeaf);
        tree.nodes[static_cast<size_t>(node_id)].value = v * cfg.learning_rate;
    };
    if (depth >= cfg.max_depth || idx.size() < 2 * cfg.min_samples_leaf || idx.size() < 2) {
        make_leaf();
        return;
    }
    SplitDecision split = best_split(x, grad, hess, idx, cfg.min_samples_leaf);
    if (!split.found) {
        make_leaf();
        return;
    }
    std::vector<size_t> left_idx, right_idx;
    for (size_t i : idx)
        (x[i][split.feature] <= split.threshold ? left_idx : right_idx).push_back(i);
    TreeNode& node = tree.nodes[static_cast<size_t>(node_id)];
    node.feature = static_cast<int>(split.feature);
    node.threshold = split.threshold;
    node.left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    node.right = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    int left = tree.nodes[static_cast<size_t>(node_id)].left;
    int right = tree.nodes[static_cast<size_t>(node_id)].right;
    grow_node(tree, left, x, grad, hess, std::move(left_idx), depth + 1, cfg);
    grow_node(tree, right, x, grad, hess, std::move(right_idx), depth + 1, cfg);
}

inline RegressionTree fit_tree(const std::vector<std::vector<double>>& x,
                               const std::vector<double>& grad, const std::vector<double>& hess,
                               const std::vector<size_t>& idx, const GbdtConfig& cfg) {
    RegressionTree tree;
    tree.nodes.emplace_back();
    grow_node(tree, 0, x, grad, hess, idx, 0, cfg);
    return tree;
}

}  // namespace detail

// Trains a boosted-tree classifier on logistic (2-class) or softmax loss.
// Deterministic given the seed; row subsampling uses an internal PRNG so the
// byte stream of a serialized model is reproducible across toolchains.
inline GbdtModel gbdt_train(const std::vector<std::vector<double>>& x,
                            const std::vector<size_t>& y, size_t n_classes,
                            const GbdtConfig& cfg, std::uint64_t seed) {
    if (x.empty() || x.size() != y.size()) throw DataError("gbdt_train: bad input sizes");
    for (size_t i = 0; i < x.size(); ++i)
        for (size_t j = 0; j < x[i].size(); ++j)
            if (!std::isfinite(x[i][j]))
                throw DataError("gbdt_train: non-finite feature value at row " +
                                std::to_string(i) + ", column " + std::to_string(j));
    std::vector<size_t> class_counts(n_classes, 0);
    for (size_t c : y) {
        if (c >= n_classes) throw DataError("gbdt_train: label out of range");
        ++class_counts[c];
    }
    size_t present = 0;
    for (size_t c : class_counts) present += c > 0 ? 1 : 0;
    if (present < 2) throw DataError("gbdt_train: need at least 2 classes in the labels");

    size_t n = x.size();
    std::vector<double> row_weight(n, 1.0);
    if (cfg.balanced_class_weights) {
        for (size_t i = 0; i < n; ++i)
            row_weight[i] = static_cast<double>(n) /
                            (static_cast<double>(present) * static_cast<double>(class_counts[y[i]]));
    }

    GbdtModel model;
    model.n_classes = n_classes;
    model.n_features = x[0].size();
    model.config = cfg;
    model.seed = seed;
    size_t dims = model.score_dims();
    std::vector<std::vector<double>> scores(n, std::vector<double>(dims, 0.0));
    SplitMix64 rng(seed);

    std::vector<double> probs(n_classes);
    auto row_probs = [&](size_t i) {
        if (n_classes == 2) {
            double s = 1.0 / (1.0 + std::exp(-scores[i][0]));
            probs[0] = 1.0 - s;
            probs[1] = s;
        } else {
            double mx = *std::max_element(scores[i].begin(), scores[i].end());
            double sum = 0.0;
            for (size_t k = 0; k < n_classes; ++k) {
                probs[k] = std::exp(scores[i][k] - mx);
                sum += probs[k];
            }
            for (double& p : probs) p /= sum;
        }
    };
    auto weighted_logloss = [&] {
        double loss = 0.0, wsum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            row_probs(i);
            loss -= row_weight[i] * std::log(std::max(probs[y[i]], 1e-15));
            wsum += row_weight[i];
        }
        return loss / wsum;
    };

    std::vector<double> grad(n), hess(n);
    for (size_t round = 0; round < cfg.n_rounds; ++round) {
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        if (cfg.subsample_fraction < 1.0) {
            shuffle_inplace(idx, rng);
            size_t keep = std::max<size_t>(1, static_cast<size_t>(
                                                  std::floor(cfg.subsample_fraction *
                                                             static_cast<double>(n))));
            idx.resize(keep);
            std::sort(idx.begin(), idx.end());
        }
        std::vector<RegressionTree> round_trees;
        round_trees.reserve(dims);
        for (size_t k = 0; k < dims; ++k) {
            for (size_t i = 0; i < n; ++i) {
                row_probs(i);
                double target = n_classes == 2 ? (y[i] == 1 ? 1.0 : 0.0)
                                               : (y[i] == k ? 1.0 : 0.0);
                double p = n_classes == 2 ? probs[1] : probs[k];
                grad[i] = row_weight[i] * (p - target);
                hess[i] = std::max(row_weight[i] * p * (1.0 - p), 1e-16);
            }
            round_trees.push_back(detail::fit_tree(x, grad, hess, idx, cfg));
        }
        for (size_t i = 0; i < n; ++i)
            for (size_t k = 0; k < dims; ++k) scores[i][k] += round_trees[k].predict(x[i]);
        model.rounds.push_back(std::move(round_trees));
        model.train_loss.push_back(weighted_logloss());
    }
    return model;
}

}  // namespace ccref
