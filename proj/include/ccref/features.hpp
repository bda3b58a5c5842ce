#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "ccref/common.hpp"
#include "ccref/corpus.hpp"
#include "ccref/graph.hpp"

namespace ccref {

struct TokenizerConfig {
    size_t min_len = 2;
};

// lowercase ASCII alphanumeric runs, minimum length filter
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg = {}) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= cfg.min_len) out.push_back(cur);
        cur.clear();
    };
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c))
            cur.push_back(static_cast<char>(std::tolower(c)));
        else
            flush();
    }
    flush();
    return out;
}

using SparseVec = std::vector<std::pair<size_t, double>>;  // (index, value), index ascending

// TF-IDF with the smoothed idf ln((1+N)/(1+df)) + 1; vectors L2-normalized.
struct Vectorizer {
    std::map<std::string, size_t> vocabulary;  // token -> dense index
    std::vector<double> idf;
    TokenizerConfig config;

    size_t dimension() const { return vocabulary.size(); }
};

inline Vectorizer fit_vectorizer(const std::vector<std::string>& segments,
                                 const TokenizerConfig& cfg = {}) {
    if (segments.empty()) throw DataError("fit_vectorizer: no segments");
    std::map<std::string, size_t> df;
    for (const std::string& seg : segments) {
        std::set<std::string> seen;
        for (std::string& tok : tokenize(seg, cfg)) seen.insert(std::move(tok));
        for (const std::string& tok : seen) ++df[tok];
    }
    Vectorizer v;
    v.config = cfg;
    size_t index = 0;
    double n = static_cast<double>(segments.size());
    v.idf.reserve(df.size());
    for (const auto& [tok, count] : df) {  // map order = lexicographic, indices dense
        v.vocabulary.emplace(tok, index++);
        v.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return v;
}

inline SparseVec vectorize(const Vectorizer& v, const std::string& segment) {
    std::map<size_t, double> tf;
    for (const std::string& tok : tokenize(segment, v.config)) {
        auto it = v.vocabulary.find(tok);
        if (it != v.vocabulary.end()) tf[it->second] += 1.0;
    }
    SparseVec out;
    out.reserve(tf.size());
    double norm_sq = 0.0;
    for (const auto& [idx, count] : tf) {
        double w = count * v.idf[idx];
        out.emplace_back(idx, w);
        norm_sq += w * w;
    }
    if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (auto& [idx, w] : out) w *= inv;
    }
    return out;
}

inline std::vector<double> to_dense(const SparseVec& sv, size_t dim) {
    std::vector<double> out(dim, 0.0);
    for (const auto& [idx, w] : sv) out[idx] = w;
    return out;
}

// Deterministic text -> fixed-dimension vector. The heavy external sentence
// encoder stays outside the build; its vectors arrive through the file-backed
// implementation, while the lexical fallback is TF-IDF.
class SegmentEncoder {
  public:
    virtual ~SegmentEncoder() = default;
    virtual std::vector<double> encode(const std::string& text) const = 0;
    virtual size_t dimension() const = 0;
    virtual std::string kind() const = 0;
};

class TfidfEncoder final : public SegmentEncoder {
  public:
    explicit TfidfEncoder(Vectorizer v) : vectorizer_(std::move(v)) {}
    std::vector<double> encode(const std::string& text) const override {
        return to_dense(vectorize(vectorizer_, text), vectorizer_.dimension());
    }
    size_t dimension() const override { return vectorizer_.dimension(); }
    std::string kind() const override { return "tfidf"; }
    const Vectorizer& vectorizer() const { return vectorizer_; }

  private:
    Vectorizer vectorizer_;
};

// Precomputed segment-hash -> vector map. File format: one record per line,
// "<fnv1a64 hex of segment text> <float> <float> ...".
class FileEmbeddingProvider final : public SegmentEncoder {
  public:
    static FileEmbeddingProvider parse(const std::string& content) {
        FileEmbeddingProvider p;
        long line_no = 0;
        for (const std::string& raw : split(content, '\n')) {
            ++line_no;
            std::string line = trim(raw);
            if (line.empty() || line[0] == '#') continue;
            std::vector<std::string> parts = whitespace_tokens(line);
            if (parts.size() < 2)
                throw DataError("embedding file line " + std::to_string(line_no) +
                                ": expected <hash> <floats...>");
            std::vector<double> vec;
            vec.reserve(parts.size() - 1);
            for (size_t i = 1; i < parts.size(); ++i) vec.push_back(std::stod(parts[i]));
            if (p.dim_ == 0) p.dim_ = vec.size();
            if (vec.size() != p.dim_)
                throw DataError("embedding file line " + std::to_string(line_no) +
                                ": dimension mismatch");
            p.vectors_[parts[0]] = std::move(vec);
        }
        if (p.vectors_.empty()) throw DataError("embedding file holds no vectors");
        return p;
    }

    static FileEmbeddingProvider load(const std::filesystem::path& path) {
        return parse(read_file(path));
    }

    std::vector<double> encode(const std::string& text) const override {
        std::string h = fnv1a64_hex(text);
        auto it = vectors_.find(h);
        if (it == vectors_.end())
            throw DataError("no embedding for segment hash " + h);
        return it->second;
    }
    size_t dimension() const override { return dim_; }
    std::string kind() const override { return "embedding"; }

  private:
    std::map<std::string, std::vector<double>> vectors_;
    size_t dim_ = 0;
};

namespace detail {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Deterministic;
// fine for the modest dimensions the reducer sees (the fit routine works on
// whichever of the covariance or Gram matrix is smaller).
inline void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double>& eigenvalues,
                         std::vector<std::vector<double>>& eigenvectors) {
    size_t n = a.size();
    eigenvectors.assign(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) eigenvectors[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (size_t k = 0; k < n; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (size_t k = 0; k < n; ++k) {
                    double vkp = eigenvectors[k][p], vkq = eigenvectors[k][q];
                    eigenvectors[k][p] = c * vkp - s * vkq;
                    eigenvectors[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    eigenvalues.resize(n);
    for (size_t i = 0; i < n; ++i) eigenvalues[i] = a[i][i];
}

}  // namespace detail

// PCA projection to a small number of output dimensions. Components ordered
// by descending explained variance; each component's sign is fixed so its
// largest-magnitude loading is positive.
struct Reducer {
    std::vector<double> mean;
    std::vector<std::vector<double>> components;  // out_dims x D, rows orthonormal
    std::vector<double> explained_variance_share;

    size_t input_dim() const { return mean.size(); }
    size_t output_dim() const { return components.size(); }
};

inline Reducer fit_reducer(const std::vector<std::vector<double>>& samples,
                           size_t out_dims = 2) {
    size_t n = samples.size();
    if (n < 2) throw DataError("fit_reducer: need at least 2 samples");
    size_t d = samples[0].size();
    if (d == 0) throw DataError("fit_reducer: zero-dimensional samples");
    for (const auto& s : samples)
        if (s.size() != d) throw DataError("fit_reducer: inconsistent sample dimensions");
    if (out_dims == 0) throw DataError("fit_reducer: output dimension must be positive");

    Reducer r;
    r.mean.assign(d, 0.0);
    for (const auto& s : samples)
        for (size_t j = 0; j < d; ++j) r.mean[j] += s[j];
    for (double& m : r.mean) m /= static_cast<double>(n);

    std::vector<std::vector<double>> centered(n, std::vector<double>(d));
    double total_var = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) {
            centered[i][j] = samples[i][j] - r.mean[j];
            total_var += centered[i][j] * centered[i][j];
        }
    total_var /= static_cast<double>(n - 1);

    std::vector<double> eigenvalues;
    std::vector<std::vector<double>> eigenvectors;
    std::vector<std::vector<double>> dir_buffer;  // candidate components before sign fix

    if (d <= n) {
        std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
        for (size_t i = 0; i < n; ++i)
            for (size_t a = 0; a < d; ++a)
                for (size_t b = a; b < d; ++b) cov[a][b] += centered[i][a] * centered[i][b];
        for (size_t a = 0; a < d; ++a)
            for (size_t b = a; b < d; ++b) {
                cov[a][b] /= static_cast<double>(n - 1);
                cov[b][a] = cov[a][b];
            }
        detail::jacobi_eigen(cov, eigenvalues, eigenvectors);
        std::vector<size_t> order(d);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return eigenvalues[a] > eigenvalues[b]; });
        for (size_t k = 0; k < std::min(out_dims, d); ++k) {
            std::vector<double> comp(d);
            for (size_t j = 0; j < d; ++j) comp[j] = eigenvectors[j][order[k]];
            dir_buffer.push_back(std::move(comp));
            r.explained_variance_share.push_back(
                total_var > 0 ? std::max(0.0, eigenvalues[order[k]]) / total_var : 0.0);
        }
    } else {
        // Gram trick: eigenvectors of (1/(n-1)) Xc Xc^T lift to covariance
        // eigenvectors via Xc^T u.
        std::vector<std::vector<double>> gram(n, std::vector<double>(n, 0.0));
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i; j < n; ++j) {
                double dot = 0.0;
                for (size_t k = 0; k < d; ++k) dot += centered[i][k] * centered[j][k];
                gram[i][j] = gram[j][i] = dot / static_cast<double>(n - 1);
            }
        detail::jacobi_eigen(gram, eigenvalues, eigenvectors);
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return eigenvalues[a] > eigenvalues[b]; });
        for (size_t k = 0; k < std::min(out_dims, n); ++k) {
            std::vector<double> comp(d, 0.0);
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < d; ++j) comp[j] += centered[i][j] * eigenvectors[i][order[k]];
            double norm = std::sqrt(std::inner_product(comp.begin(), comp.end(), comp.begin(), 0.0));
            if (norm > 1e-12) {
                for (double& x : comp) x /= norm;
            } else {
                comp.assign(d, 0.0);  // degenerate direction, replaced below
            }
            dir_buffer.push_back(std::move(comp));
            r.explained_variance_share.push_back(
                total_var > 0 ? std::max(0.0, eigenvalues[order[k]]) / total_var : 0.0);
        }
    }

    // Degenerate or missing directions: fill with a deterministic unit vector
    // orthogonal to the components already chosen.
    auto orthonormalize_or_seed = [&](std::vector<double>& comp) {
        double norm = std::sqrt(std::inner_product(comp.begin(), comp.end(), comp.begin(), 0.0));
        if (norm > 1e-9) return;
        for (size_t basis = 0; basis < d; ++basis) {
            std::vector<double> cand(d, 0.0);
            cand[basis] = 1.0;
            for (const auto& prev : r.components) {
                double dot = std::inner_product(cand.begin(), cand.end(), prev.begin(), 0.0);
                for (size_t j = 0; j < d; ++j) cand[j] -= dot * prev[j];
            }
            double cn = std::sqrt(std::inner_product(cand.begin(), cand.end(), cand.begin(), 0.0));
            if (cn > 1e-9) {
                for (double& x : cand) x /= cn;
                comp = std::move(cand);
                return;
            }
        }
        comp.assign(d, 0.0);  // d < out_dims, nothing orthogonal left
    };

    while (dir_buffer.size() < out_dims) dir_buffer.emplace_back(d, 0.0);
    while (r.explained_variance_share.size() < out_dims)
        r.explained_variance_share.push_back(0.0);
    for (std::vector<double>& comp : dir_buffer) {
        orthonormalize_or_seed(comp);
        size_t best = 0;
        for (size_t j = 1; j < d; ++j)
            if (std::abs(comp[j]) > std::abs(comp[best])) best = j;
        if (comp[best] < 0)
            for (double& x : comp) x = -x;
        r.components.push_back(std::move(comp));
    }
    return r;
}

inline std::vector<double> reduce(const Reducer& r, const std::vector<double>& v) {
    if (v.size() != r.input_dim())
        throw ModelError("reduce: vector dimension " + std::to_string(v.size()) +
                         " does not match reducer input " + std::to_string(r.input_dim()));
    std::vector<double> out(r.output_dim(), 0.0);
    for (size_t k = 0; k < r.output_dim(); ++k)
        for (size_t j = 0; j < v.size(); ++j) out[k] += r.components[k][j] * (v[j] - r.mean[j]);
    return out;
}

// Per-dimension statistics over an edge's segment vectors.
struct AggregateStats {
    std::vector<double> mean, median, min, max, variance;  // population variance
    size_t count = 0;
};

inline AggregateStats aggregate(const std::vector<std::vector<double>>& vectors) {
    if (vectors.empty()) throw DataError("aggregate: empty vector list");
    size_t dims = vectors[0].size();
    AggregateStats s;
    s.count = vectors.size();
    s.mean.assign(dims, 0.0);
    s.median.assign(dims, 0.0);
    s.min.assign(dims, 0.0);
    s.max.assign(dims, 0.0);
    s.variance.assign(dims, 0.0);
    double n = static_cast<double>(vectors.size());
    for (size_t dim = 0; dim < dims; ++dim) {
        std::vector<double> col;
        col.reserve(vectors.size());
        for (const auto& v : vectors) {
            if (v.size() != dims) throw DataError("aggregate: ragged vector list");
            col.push_back(v[dim]);
        }
        std::sort(col.begin(), col.end());
        s.min[dim] = col.front();
        s.max[dim] = col.back();
        double sum = std::accumulate(col.begin(), col.end(), 0.0);
        double mean = sum / n;
        s.mean[dim] = mean;
        s.median[dim] = col.size() % 2 == 1 ? col[col.size() / 2]
                                            : 0.5 * (col[col.size() / 2 - 1] + col[col.size() / 2]);
        double var = 0.0;
        for (double x : col) var += (x - mean) * (x - mean);
        s.variance[dim] = var / n;
    }
    return s;
}

// (token-set Jaccard, 1 - normalized Levenshtein), both on lowercased input.
// Two empty titles compare as identical.
inline std::pair<double, double> title_similarity(const std::string& a, const std::string& b) {
    std::vector<std::string> ta = whitespace_tokens(a), tb = whitespace_tokens(b);
    std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
    double jaccard;
    if (sa.empty() && sb.empty()) {
        jaccard = 1.0;
    } else {
        size_t inter = 0;
        for (const std::string& t : sa) inter += sb.count(t);
        size_t uni = sa.size() + sb.size() - inter;
        jaccard = static_cast<double>(inter) / static_cast<double>(uni);
    }
    std::string la = to_lower(a), lb = to_lower(b);
    size_t m = la.size(), n = lb.size();
    double edit_sim;
    if (m == 0 && n == 0) {
        edit_sim = 1.0;
    } else {
        std::vector<size_t> prev(n + 1), cur(n + 1);
        std::iota(prev.begin(), prev.end(), size_t{0});
        for (size_t i = 1; i <= m; ++i) {
            cur[0] = i;
            for (size_t j = 1; j <= n; ++j) {
                size_t sub = prev[j - 1] + (la[i - 1] == lb[j - 1] ? 0 : 1);
                cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
            }
            std::swap(prev, cur);
        }
        edit_sim = 1.0 - static_cast<double>(prev[n]) / static_cast<double>(std::max(m, n));
    }
    return {jaccard, edit_sim};
}

// Which aggregate statistics enter the feature vector.
inline const std::vector<std::string>& aggregate_set(const std::string& set_id) {
    static const std::vector<std::string> full{"mean", "median", "min", "max", "var"};
    static const std::vector<std::string> core{"median", "max", "var"};
    if (set_id == "full") return full;
    if (set_id == "core") return core;
    throw InputError("unknown aggregate set '" + set_id + "'");
}

inline std::vector<std::string> feature_schema(size_t dims = 2,
                                               const std::string& aggregate_set_id = "full") {
    std::vector<std::string> names;
    for (const std::string& stat : aggregate_set(aggregate_set_id))
        for (size_t dim = 0; dim < dims; ++dim)
            names.push_back(stat + "_d" + std::to_string(dim));
    names.insert(names.end(), {"segment_count", "title_similarity_token",
                               "title_similarity_edit", "same_scheme", "issued_gap_days",
                               "same_category"});
    return names;
}

struct EdgeFeatures {
    std::vector<double> values;  // ordered per feature_schema
};

// One fixed-length vector per edge: reduced-segment aggregates plus the
// metadata slots.
inline EdgeFeatures featurize_edge(const ReferenceEdge& edge, const Corpus& corpus,
                                   const SegmentEncoder& encoder, const Reducer& reducer,
                                   const std::string& aggregate_set_id = "full") {
    auto src = corpus.records.find(edge.source);
    auto dst = corpus.records.find(edge.target);
    if (src == corpus.records.end())
        throw DataError("featurize_edge: no corpus record for source '" + edge.source + "'");
    if (dst == corpus.records.end())
        throw DataError("featurize_edge: no corpus record for target '" + edge.target + "'");
    if (edge.segments.empty())
        throw DataError("featurize_edge: edge (" + edge.source + ", " + edge.target +
                        ") has no segments");

    std::vector<std::vector<double>> reduced;
    reduced.reserve(edge.segments.size());
    for (const ReferenceSegment& seg : edge.segments)
        reduced.push_back(reduce(reducer, encoder.encode(seg.text)));
    AggregateStats stats = aggregate(reduced);

    EdgeFeatures f;
    size_t dims = reducer.output_dim();
    for (const std::string& stat : aggregate_set(aggregate_set_id)) {
        const std::vector<double>* src_vec = nullptr;
        if (stat == "mean") src_vec = &stats.mean;
        else if (stat == "median") src_vec = &stats.median;
        else if (stat == "min") src_vec = &stats.min;
        else if (stat == "max") src_vec = &stats.max;
        else src_vec = &stats.variance;
        for (size_t dim = 0; dim < dims; ++dim) f.values.push_back((*src_vec)[dim]);
    }
    auto [jac, edit] = title_similarity(src->second.name, dst->second.name);
    f.values.push_back(static_cast<double>(stats.count));
    f.values.push_back(jac);
    f.values.push_back(edit);
    f.values.push_back(src->second.scheme == dst->second.scheme ? 1.0 : 0.0);
    f.values.push_back(static_cast<double>(src->second.issued - dst->second.issued));
    f.values.push_back(src->second.category == dst->second.category ? 1.0 : 0.0);
    return f;
}

}  // namespace ccref
