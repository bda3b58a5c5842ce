#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccref/common.hpp"
#include "ccref/corpus.hpp"
#include "ccref/refextract.hpp"

namespace ccref {

enum class BinaryCode { ComponentReuse, Predecessor };
enum class FineCode { ComponentUsed, ComponentShared, EvaluationReused, ReEvaluation,
                      PreviousVersion };
enum class SpecialCode { Unknown, Irrelevant };
enum class Provenance { Manual, Predicted };

inline std::string to_string(BinaryCode c) {
    return c == BinaryCode::ComponentReuse ? "ComponentReuse" : "Predecessor";
}
inline std::string to_string(FineCode c) {
    switch (c) {
        case FineCode::ComponentUsed: return "ComponentUsed";
        case FineCode::ComponentShared: return "ComponentShared";
        case FineCode::EvaluationReused: return "EvaluationReused";
        case FineCode::ReEvaluation: return "ReEvaluation";
        default: return "PreviousVersion";
    }
}
inline std::string to_string(SpecialCode c) {
    return c == SpecialCode::Unknown ? "Unknown" : "Irrelevant";
}
inline std::string to_string(Provenance p) {
    return p == Provenance::Manual ? "manual" : "predicted";
}

inline std::optional<BinaryCode> parse_binary_code(std::string_view s) {
    if (s == "ComponentReuse") return BinaryCode::ComponentReuse;
    if (s == "Predecessor") return BinaryCode::Predecessor;
    return std::nullopt;
}
inline std::optional<FineCode> parse_fine_code(std::string_view s) {
    if (s == "ComponentUsed") return FineCode::ComponentUsed;
    if (s == "ComponentShared") return FineCode::ComponentShared;
    if (s == "EvaluationReused") return FineCode::EvaluationReused;
    if (s == "ReEvaluation") return FineCode::ReEvaluation;
    if (s == "PreviousVersion") return FineCode::PreviousVersion;
    return std::nullopt;
}
inline std::optional<SpecialCode> parse_special_code(std::string_view s) {
    if (s == "Unknown") return SpecialCode::Unknown;
    if (s == "Irrelevant") return SpecialCode::Irrelevant;
    return std::nullopt;
}

inline BinaryCode binary_of(FineCode f) {
    switch (f) {
        case FineCode::ComponentUsed:
        case FineCode::ComponentShared:
        case FineCode::EvaluationReused: return BinaryCode::ComponentReuse;
        default: return BinaryCode::Predecessor;
    }
}

// The edge-labelling function's value for one edge.
struct EdgeLabel {
    std::optional<BinaryCode> binary;
    std::optional<FineCode> fine;
    std::optional<SpecialCode> special;
    Provenance provenance = Provenance::Manual;
    double confidence = 1.0;

    // empty string when consistent
    std::string consistency_error() const {
        if (special) {
            if (binary || fine) return "special code set together with binary/fine codes";
            return {};
        }
        if (!binary) return "label carries neither a binary nor a special code";
        if (fine && binary_of(*fine) != *binary)
            return "fine code " + ccref::to_string(*fine) + " contradicts binary code " +
                   ccref::to_string(*binary);
        if (provenance == Provenance::Manual && confidence != 1.0)
            return "manual labels must carry confidence 1";
        if (confidence < 0.0 || confidence > 1.0) return "confidence outside [0,1]";
        return {};
    }
};

struct EdgeKey {
    std::string source;
    std::string target;
    auto operator<=>(const EdgeKey&) const = default;
};

// Directed reference c_i -> c_j with the evidence segments that mention it.
// Repeated mentions of the same target collapse into one edge; segments
// accumulate.
struct ReferenceEdge {
    std::string source;
    std::string target;
    std::vector<ReferenceSegment> segments;
    std::set<SourceDoc> source_docs;
};

struct ReferenceGraph {
    std::set<std::string> vertices;
    std::vector<ReferenceEdge> edges;             // sorted by (source, target)
    std::map<EdgeKey, size_t> edge_index;         // key -> position in edges
    std::map<EdgeKey, EdgeLabel> labels;          // partial labelling
    std::vector<EdgeKey> dangling;                // source -> unresolved canonical id

    const ReferenceEdge* find_edge(const EdgeKey& k) const {
        auto it = edge_index.find(k);
        return it == edge_index.end() ? nullptr : &edges[it->second];
    }

    bool edge_has_binary(const ReferenceEdge& e, BinaryCode code) const {
        auto it = labels.find({e.source, e.target});
        return it != labels.end() && it->second.binary && *it->second.binary == code;
    }

    void rebuild_index() {
        std::sort(edges.begin(), edges.end(), [](const ReferenceEdge& a, const ReferenceEdge& b) {
            return std::tie(a.source, a.target) < std::tie(b.source, b.target);
        });
        edge_index.clear();
        for (size_t i = 0; i < edges.size(); ++i)
            edge_index[{edges[i].source, edges[i].target}] = i;
    }
};

// Constructs the graph per the mention rule: an edge (i, j) exists iff i's
// certification report or security target mentions j's certificate id.
// Extracted ids with no corpus vertex go to the dangling ledger.
inline ReferenceGraph build_graph(const Corpus& corpus, const std::vector<IdScheme>& schemes,
                                  const std::set<std::string>& abbreviations = {},
                                  size_t before = 2, size_t after = 1) {
    ReferenceGraph g;
    std::map<std::string, std::string> canonical_to_id;
    for (const auto& [id, rec] : corpus.records) {
        g.vertices.insert(id);
        canonical_to_id[canonicalize_id(id)] = id;
    }
    std::map<EdgeKey, ReferenceEdge> merged;
    std::set<EdgeKey> dangling_set;
    for (const auto& [id, rec] : corpus.records) {
        std::string self_canonical = canonicalize_id(id);
        for (SourceDoc doc : {SourceDoc::Report, SourceDoc::Target}) {
            const std::optional<std::string>& text =
                doc == SourceDoc::Report ? rec.report_text : rec.target_text;
            if (!text || text->empty()) continue;
            auto refs = extract_document_references(*text, schemes, self_canonical,
                                                    abbreviations, before, after);
            for (auto& [canonical, segments] : refs) {
                auto resolved = canonical_to_id.find(canonical);
                if (resolved == canonical_to_id.end()) {
                    dangling_set.insert({id, canonical});
                    continue;
                }
                EdgeKey key{id, resolved->second};
                ReferenceEdge& e = merged
                                       .try_emplace(key, ReferenceEdge{key.source, key.target,
                                                                       {}, {}})
                                       .first->second;
                for (ReferenceSegment& s : segments) {
                    s.source_doc = doc;
                    e.segments.push_back(std::move(s));
                }
                e.source_docs.insert(doc);
            }
        }
    }
    for (auto& [key, edge] : merged) g.edges.push_back(std::move(edge));
    g.rebuild_index();
    g.dangling.assign(dangling_set.begin(), dangling_set.end());
    return g;
}

namespace detail {

// Adjacency restricted to edges carrying the given binary code; unlabeled
// edges never qualify.
inline std::map<std::string, std::vector<std::string>> adjacency(
    const ReferenceGraph& g, bool forward, std::optional<BinaryCode> filter) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const ReferenceEdge& e : g.edges) {
        if (filter && !g.edge_has_binary(e, *filter)) continue;
        if (forward)
            adj[e.source].push_back(e.target);
        else
            adj[e.target].push_back(e.source);
    }
    return adj;
}

inline std::set<std::string> closure_from(
    const std::map<std::string, std::vector<std::string>>& adj, const std::string& start) {
    std::set<std::string> seen;
    std::deque<std::string> frontier{start};
    while (!frontier.empty()) {
        std::string v = frontier.front();
        frontier.pop_front();
        auto it = adj.find(v);
        if (it == adj.end()) continue;
        for (const std::string& next : it->second)
            if (seen.insert(next).second) frontier.push_back(next);
    }
    seen.erase(start);
    return seen;
}

}  // namespace detail

// Certificate reach: products from which an all-ComponentReuse directed path
// leads to c. Visited-set traversal, so reference cycles terminate.
inline std::set<std::string> reach_set(const ReferenceGraph& g, const std::string& c) {
    if (!g.vertices.count(c)) throw DataError("reach: unknown vertex '" + c + "'");
    auto adj = detail::adjacency(g, /*forward=*/false, BinaryCode::ComponentReuse);
    return detail::closure_from(adj, c);
}

inline size_t reach(const ReferenceGraph& g, const std::string& c) {
    return reach_set(g, c).size();
}

// Dual of reach: all products c transitively component-reuses.
inline std::set<std::string> transitive_refs(const ReferenceGraph& g, const std::string& c) {
    if (!g.vertices.count(c)) throw DataError("transitive_refs: unknown vertex '" + c + "'");
    auto adj = detail::adjacency(g, /*forward=*/true, BinaryCode::ComponentReuse);
    return detail::closure_from(adj, c);
}

using ReachTable = std::map<std::string, size_t>;

inline ReachTable reach_all(const ReferenceGraph& g) {
    ReachTable table;
    auto forward = detail::adjacency(g, /*forward=*/true, BinaryCode::ComponentReuse);
    for (const std::string& v : g.vertices) table[v] = 0;
    for (const std::string& v : g.vertices)
        for (const std::string& descendant : detail::closure_from(forward, v))
            ++table[descendant];
    return table;
}

// Connected components of the (optionally label-filtered) subgraph, direction
// ignored, non-isolated vertices only. Sorted by size descending, ties by
// smallest member id.
inline std::vector<std::set<std::string>> weakly_connected_components(
    const ReferenceGraph& g, std::optional<BinaryCode> label_filter = std::nullopt) {
    std::map<std::string, std::vector<std::string>> und;
    for (const ReferenceEdge& e : g.edges) {
        if (label_filter && !g.edge_has_binary(e, *label_filter)) continue;
        und[e.source].push_back(e.target);
        und[e.target].push_back(e.source);
    }
    std::vector<std::set<std::string>> components;
    std::set<std::string> visited;
    for (const auto& [start, nbrs] : und) {
        if (visited.count(start)) continue;
        std::set<std::string> comp;
        std::deque<std::string> frontier{start};
        visited.insert(start);
        comp.insert(start);
        while (!frontier.empty()) {
            std::string v = frontier.front();
            frontier.pop_front();
            for (const std::string& n : und.at(v))
                if (visited.insert(n).second) {
                    comp.insert(n);
                    frontier.push_back(n);
                }
        }
        components.push_back(std::move(comp));
    }
    std::sort(components.begin(), components.end(),
              [](const std::set<std::string>& a, const std::set<std::string>& b) {
                  if (a.size() != b.size()) return a.size() > b.size();
                  return *a.begin() < *b.begin();
              });
    return components;
}

// Induced subgraph on the vertices active at `at`; labels carried over.
inline ReferenceGraph snapshot(const ReferenceGraph& g, const Corpus& corpus, Date at) {
    ReferenceGraph out;
    for (const std::string& v : g.vertices) {
        auto rec = corpus.records.find(v);
        if (rec != corpus.records.end() && is_active(rec->second, at)) out.vertices.insert(v);
    }
    for (const ReferenceEdge& e : g.edges)
        if (out.vertices.count(e.source) && out.vertices.count(e.target))
            out.edges.push_back(e);
    out.rebuild_index();
    for (const auto& [key, label] : g.labels)
        if (out.edge_index.count(key)) out.labels.emplace(key, label);
    for (const EdgeKey& d : g.dangling)
        if (out.vertices.count(d.source)) out.dangling.push_back(d);
    return out;
}

// Replaces/merges the label table. Manual labels always override predicted
// ones; a label naming a nonexistent edge is an error.
inline ReferenceGraph apply_labels(const ReferenceGraph& g,
                                   const std::map<EdgeKey, EdgeLabel>& labels) {
    ReferenceGraph out = g;
    for (const auto& [key, label] : labels) {
        if (!out.edge_index.count(key))
            throw DataError("label refers to nonexistent edge (" + key.source + ", " +
                            key.target + ")");
        std::string err = label.consistency_error();
        if (!err.empty())
            throw DataError("inconsistent label for edge (" + key.source + ", " + key.target +
                            "): " + err);
        auto existing = out.labels.find(key);
        if (existing != out.labels.end() &&
            existing->second.provenance == Provenance::Manual &&
            label.provenance == Provenance::Predicted)
            continue;  // manual ground truth wins
        out.labels[key] = label;
    }
    return out;
}

// --- serialization ------------------------------------------------------

inline std::string serialize_graph(const ReferenceGraph& g) {
    std::string out;
    {
        nlohmann::json head{{"type", "header"}, {"format", "ccref-graph"}, {"version", 1},
                            {"vertices", g.vertices.size()}, {"edges", g.edges.size()}};
        out += head.dump() + "\n";
    }
    for (const std::string& v : g.vertices)
        out += nlohmann::json{{"type", "vertex"}, {"id", v}}.dump() + "\n";
    for (const ReferenceEdge& e : g.edges) {
        nlohmann::json segs = nlohmann::json::array();
        for (const ReferenceSegment& s : e.segments)
            segs.push_back({{"text", s.text},
                            {"sentence_index", s.sentence_index},
                            {"raw", s.match.raw},
                            {"canonical", s.match.canonical},
                            {"begin", s.match.span.begin},
                            {"end", s.match.span.end},
                            {"scheme", s.match.scheme_tag},
                            {"doc", to_string(s.source_doc)}});
        nlohmann::json docs = nlohmann::json::array();
        for (SourceDoc d : e.source_docs) docs.push_back(to_string(d));
        nlohmann::json j{{"type", "edge"}, {"source", e.source}, {"target", e.target},
                         {"source_docs", docs}, {"segments", segs}};
        auto lab = g.labels.find({e.source, e.target});
        if (lab != g.labels.end()) {
            const EdgeLabel& l = lab->second;
            nlohmann::json lj;
            lj["binary"] = l.binary ? nlohmann::json(to_string(*l.binary)) : nullptr;
            lj["fine"] = l.fine ? nlohmann::json(to_string(*l.fine)) : nullptr;
            lj["special"] = l.special ? nlohmann::json(to_string(*l.special)) : nullptr;
            lj["provenance"] = to_string(l.provenance);
            lj["confidence"] = l.confidence;
            j["label"] = lj;
        }
        out += j.dump() + "\n";
    }
    for (const EdgeKey& d : g.dangling)
        out += nlohmann::json{{"type", "dangling"}, {"source", d.source},
                              {"unresolved", d.target}}
                   .dump() +
               "\n";
    return out;
}

inline ReferenceGraph parse_graph(const std::string& content) {
    ReferenceGraph g;
    long line_no = 0;
    for (const std::string& line : split(content, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError("graph file line " + std::to_string(line_no) + ": invalid JSON");
        std::string type = j.value("type", "");
        if (type == "header") {
            if (j.value("format", "") != "ccref-graph")
                throw DataError("graph file: unexpected format tag");
        } else if (type == "vertex") {
            g.vertices.insert(j.at("id").get<std::string>());
        } else if (type == "edge") {
            ReferenceEdge e;
            e.source = j.at("source").get<std::string>();
            e.target = j.at("target").get<std::string>();
            for (const auto& d : j.at("source_docs"))
                e.source_docs.insert(d.get<std::string>() == "report" ? SourceDoc::Report
                                                                      : SourceDoc::Target);
            for (const auto& s : j.at("segments")) {
                ReferenceSegment seg;
                seg.text = s.at("text").get<std::string>();
                seg.sentence_index = s.at("sentence_index").get<size_t>();
                seg.match.raw = s.at("raw").get<std::string>();
                seg.match.canonical = s.at("canonical").get<std::string>();
                seg.match.span = {s.at("begin").get<size_t>(), s.at("end").get<size_t>()};
                seg.match.scheme_tag = s.at("scheme").get<std::string>();
                seg.source_doc = s.at("doc").get<std::string>() == "report" ? SourceDoc::Report
                                                                            : SourceDoc::Target;
                e.segments.push_back(std::move(seg));
            }
            if (j.contains("label")) {
                const auto& lj = j["label"];
                EdgeLabel l;
                if (!lj.at("binary").is_null())
                    l.binary = parse_binary_code(lj["binary"].get<std::string>());
                if (!lj.at("fine").is_null())
                    l.fine = parse_fine_code(lj["fine"].get<std::string>());
                if (!lj.at("special").is_null())
                    l.special = parse_special_code(lj["special"].get<std::string>());
                l.provenance = lj.at("provenance").get<std::string>() == "manual"
                                   ? Provenance::Manual
                                   : Provenance::Predicted;
                l.confidence = lj.at("confidence").get<double>();
                g.labels[{e.source, e.target}] = l;
            }
            g.edges.push_back(std::move(e));
        } else if (type == "dangling") {
            g.dangling.push_back({j.at("source").get<std::string>(),
                                  j.at("unresolved").get<std::string>()});
        } else {
            throw DataError("graph file line " + std::to_string(line_no) +
                            ": unknown record type '" + type + "'");
        }
    }
    g.rebuild_index();
    return g;
}

// Label file: CSV with header
// edge_source,edge_target,binary,fine,special,provenance,confidence
inline std::string serialize_labels(const std::map<EdgeKey, EdgeLabel>& labels) {
    std::string out = "edge_source,edge_target,binary,fine,special,provenance,confidence\n";
    for (const auto& [key, l] : labels) {
        out += key.source + "," + key.target + ",";
        out += (l.binary ? to_string(*l.binary) : "") + ",";
        out += (l.fine ? to_string(*l.fine) : "") + ",";
        out += (l.special ? to_string(*l.special) : "") + ",";
        out += to_string(l.provenance) + ",";
        out += format_double(l.confidence) + "\n";
    }
    return out;
}

inline std::map<EdgeKey, EdgeLabel> parse_labels(const std::string& content) {
    std::map<EdgeKey, EdgeLabel> out;
    std::vector<std::string> lines = split(content, '\n');
    if (lines.empty()) throw DataError("label file is empty");
    long line_no = 0;
    bool header_seen = false;
    for (const std::string& raw : lines) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line.find("edge_source") != 0)
                throw DataError("label file: missing header row");
            header_seen = true;
            continue;
        }
        std::vector<std::string> f = split(line, ',');
        if (f.size() != 7)
            throw DataError("label file line " + std::to_string(line_no) +
                            ": expected 7 columns, got " + std::to_string(f.size()));
        EdgeLabel l;
        if (!trim(f[2]).empty()) {
            l.binary = parse_binary_code(trim(f[2]));
            if (!l.binary)
                throw DataError("label file line " + std::to_string(line_no) +
                                ": unknown binary code '" + trim(f[2]) + "'");
        }
        if (!trim(f[3]).empty()) {
            l.fine = parse_fine_code(trim(f[3]));
            if (!l.fine)
                throw DataError("label file line " + std::to_string(line_no) +
                                ": unknown fine code '" + trim(f[3]) + "'");
        }
        if (!trim(f[4]).empty()) {
            l.special = parse_special_code(trim(f[4]));
            if (!l.special)
                throw DataError("label file line " + std::to_string(line_no) +
                                ": unknown special code '" + trim(f[4]) + "'");
        }
        std::string prov = trim(f[5]);
        if (prov != "manual" && prov != "predicted")
            throw DataError("label file line " + std::to_string(line_no) +
                            ": unknown provenance '" + prov + "'");
        l.provenance = prov == "manual" ? Provenance::Manual : Provenance::Predicted;
        l.confidence = std::stod(trim(f[6]));
        std::string err = l.consistency_error();
        if (!err.empty())
            throw DataError("label file line " + std::to_string(line_no) + ": " + err);
        out[{trim(f[0]), trim(f[1])}] = l;
    }
    return out;
}

}  // namespace ccref
