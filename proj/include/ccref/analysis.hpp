#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccref/common.hpp"
#include "ccref/corpus.hpp"
#include "ccref/graph.hpp"
#include "ccref/stats.hpp"

namespace ccref {

// ---- RQ1: referencing culture -------------------------------------------

struct CultureBucket {
    size_t total = 0;
    size_t any_reference = 0;
    size_t component_reuse = 0;
    size_t predecessor = 0;
};

struct CultureStats {
    std::map<Supercategory, CultureBucket> per_supercategory;
    CultureBucket global;
};

// A product counts toward a context when any of its outgoing edges carries
// that binary code; it can count toward both.
inline CultureStats referencing_stats(const ReferenceGraph& g, const Corpus& corpus) {
    std::map<std::string, std::vector<const ReferenceEdge*>> outgoing;
    for (const ReferenceEdge& e : g.edges) outgoing[e.source].push_back(&e);
    CultureStats stats;
    for (Supercategory sc :
         {Supercategory::Smartcard, Supercategory::SmartcardRelated, Supercategory::Other})
        stats.per_supercategory[sc];  // all three buckets always present
    for (const auto& [id, rec] : corpus.records) {
        CultureBucket& bucket = stats.per_supercategory[supercategory_of(corpus, rec)];
        ++bucket.total;
        ++stats.global.total;
        auto it = outgoing.find(id);
        if (it == outgoing.end()) continue;
        bool any = !it->second.empty(), cr = false, pred = false;
        for (const ReferenceEdge* e : it->second) {
            if (g.edge_has_binary(*e, BinaryCode::ComponentReuse)) cr = true;
            if (g.edge_has_binary(*e, BinaryCode::Predecessor)) pred = true;
        }
        bucket.any_reference += any;
        bucket.component_reuse += cr;
        bucket.predecessor += pred;
        stats.global.any_reference += any;
        stats.global.component_reuse += cr;
        stats.global.predecessor += pred;
    }
    return stats;
}

struct TimeSeriesCell {
    size_t active_count = 0;
    double avg_transitive_refs = 0.0;
    double avg_reach = 0.0;
};

struct TimeSeries {
    std::vector<Date> probes;
    // probes-aligned rows per supercategory
    std::map<Supercategory, std::vector<TimeSeriesCell>> rows;
};

// Averages over the products active at each probe date, computed inside the
// snapshot graph at that date.
inline TimeSeries temporal_series(const ReferenceGraph& g, const Corpus& corpus,
                                  const std::vector<Date>& probes) {
    TimeSeries ts;
    ts.probes = probes;
    for (Supercategory sc :
         {Supercategory::Smartcard, Supercategory::SmartcardRelated, Supercategory::Other})
        ts.rows[sc].resize(probes.size());
    for (size_t pi = 0; pi < probes.size(); ++pi) {
        ReferenceGraph snap = snapshot(g, corpus, probes[pi]);
        ReachTable reach_table = reach_all(snap);
        auto forward = detail::adjacency(snap, /*forward=*/true, BinaryCode::ComponentReuse);
        std::map<Supercategory, std::pair<double, double>> sums;  // (trans_refs, reach)
        std::map<Supercategory, size_t> counts;
        for (const std::string& v : snap.vertices) {
            Supercategory sc = supercategory_of(corpus, corpus.records.at(v));
            sums[sc].first += static_cast<double>(detail::closure_from(forward, v).size());
            sums[sc].second += static_cast<double>(reach_table.at(v));
            ++counts[sc];
        }
        for (auto& [sc, row] : ts.rows) {
            size_t n = counts.count(sc) ? counts[sc] : 0;
            row[pi].active_count = n;
            if (n > 0) {
                row[pi].avg_transitive_refs = sums[sc].first / static_cast<double>(n);
                row[pi].avg_reach = sums[sc].second / static_cast<double>(n);
            }
        }
    }
    return ts;
}

// ---- RQ2: high-reach products and propagation ----------------------------

// Descending reach; ties broken by earlier issuance, then id.
inline std::vector<std::pair<std::string, size_t>> top_reach(const ReferenceGraph& g,
                                                             const Corpus& corpus, size_t k,
                                                             std::optional<Date> at =
                                                                 std::nullopt) {
    if (k == 0) throw InputError("top_reach: k must be positive");
    const ReferenceGraph* graph = &g;
    ReferenceGraph snap;
    if (at) {
        snap = snapshot(g, corpus, *at);
        graph = &snap;
    }
    ReachTable table = reach_all(*graph);
    std::vector<std::pair<std::string, size_t>> entries(table.begin(), table.end());
    std::sort(entries.begin(), entries.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        auto ra = corpus.records.find(a.first), rb = corpus.records.find(b.first);
        if (ra != corpus.records.end() && rb != corpus.records.end() &&
            ra->second.issued != rb->second.issued)
            return ra->second.issued < rb->second.issued;
        return a.first < b.first;
    });
    if (entries.size() > k) entries.resize(k);
    return entries;
}

// Spearman (one-sided greater) between reach and the EAL ordinal
// (EAL1..7, "+" adds 0.5); products without an EAL are excluded.
inline SpearmanResult reach_eal_correlation(const ReferenceGraph& g, const Corpus& corpus,
                                            std::uint64_t seed = 0x5eed5eedULL) {
    ReachTable table = reach_all(g);
    std::vector<double> reach_values, eal_values;
    for (const auto& [id, rec] : corpus.records) {
        if (!rec.eal || !g.vertices.count(id)) continue;
        reach_values.push_back(static_cast<double>(table.at(id)));
        eal_values.push_back(rec.eal->ordinal());
    }
    return spearman(reach_values, eal_values, Alternative::Greater, seed);
}

struct ComponentImpact {
    std::vector<std::string> members;
    std::string peak_vertex;  // highest reach inside the component
    size_t peak_reach = 0;
    std::vector<EdgeKey> tree_edges;  // incoming transitive reference tree of the peak
    size_t component_used = 0;        // tree edges fine-labelled ComponentUsed
    size_t labelled = 0;              // tree edges with any fine label
    std::vector<EdgeKey> uncovered;   // tree edges lacking a fine label
    double susceptible_fraction = 0.0;
    bool skipped = false;  // above the exclude_above cutoff
};

struct ImpactReport {
    size_t min_size = 0;
    size_t exclude_above = 0;
    std::vector<ComponentImpact> components;
    size_t total_component_used = 0;
    size_t total_labelled = 0;
    double micro_fraction = 0.0;
    double macro_fraction = 0.0;  // mean over analyzed components with coverage
};

// Vulnerability-propagation study over the component-reuse subgraph: for each
// weakly-connected component of at least min_size products, the share of the
// peak vertex's incoming reference tree that is fine-labelled ComponentUsed.
inline ImpactReport propagation_study(const ReferenceGraph& g, const Corpus& corpus,
                                      const std::map<EdgeKey, FineCode>& fine_annotations,
                                      size_t min_size = 10, size_t exclude_above = 700) {
    ImpactReport report;
    report.min_size = min_size;
    report.exclude_above = exclude_above;
    ReachTable table = reach_all(g);
    double macro_sum = 0.0;
    size_t macro_count = 0;
    for (const std::set<std::string>& comp :
         weakly_connected_components(g, BinaryCode::ComponentReuse)) {
        if (comp.size() < min_size) continue;
        ComponentImpact ci;
        ci.members.assign(comp.begin(), comp.end());
        ci.skipped = comp.size() > exclude_above;
        // peak by reach; ties by earlier issuance then id
        for (const std::string& v : comp) {
            if (ci.peak_vertex.empty()) {
                ci.peak_vertex = v;
                ci.peak_reach = table.at(v);
                continue;
            }
            size_t r = table.at(v);
            if (r > ci.peak_reach) {
                ci.peak_vertex = v;
                ci.peak_reach = r;
            } else if (r == ci.peak_reach) {
                auto ra = corpus.records.find(v), rb = corpus.records.find(ci.peak_vertex);
                bool earlier = ra != corpus.records.end() && rb != corpus.records.end() &&
                               ra->second.issued < rb->second.issued;
                bool same_date = ra != corpus.records.end() && rb != corpus.records.end() &&
                                 ra->second.issued == rb->second.issued;
                if (earlier || (same_date && v < ci.peak_vertex)) {
                    ci.peak_vertex = v;
                    ci.peak_reach = r;
                }
            }
        }
        if (!ci.skipped) {
            std::set<std::string> ancestors = reach_set(g, ci.peak_vertex);
            for (const ReferenceEdge& e : g.edges) {
                if (!g.edge_has_binary(e, BinaryCode::ComponentReuse)) continue;
                if (!ancestors.count(e.source)) continue;
                if (e.target != ci.peak_vertex && !ancestors.count(e.target)) continue;
                EdgeKey key{e.source, e.target};
                ci.tree_edges.push_back(key);
                auto ann = fine_annotations.find(key);
                if (ann == fine_annotations.end()) {
                    ci.uncovered.push_back(key);
                } else {
                    ++ci.labelled;
                    if (ann->second == FineCode::ComponentUsed) ++ci.component_used;
                }
            }
            ci.susceptible_fraction =
                ci.labelled > 0
                    ? static_cast<double>(ci.component_used) / static_cast<double>(ci.labelled)
                    : 0.0;
            report.total_component_used += ci.component_used;
            report.total_labelled += ci.labelled;
            if (ci.labelled > 0) {
                macro_sum += ci.susceptible_fraction;
                ++macro_count;
            }
        }
        report.components.push_back(std::move(ci));
    }
    report.micro_fraction = report.total_labelled > 0
                                ? static_cast<double>(report.total_component_used) /
                                      static_cast<double>(report.total_labelled)
                                : 0.0;
    report.macro_fraction = macro_count > 0 ? macro_sum / static_cast<double>(macro_count) : 0.0;
    return report;
}

// ---- RQ3: archival and aging ---------------------------------------------

struct ArchivedReference {
    EdgeKey edge;
    long gap_days = 0;          // target archival -> source issuance
    bool data_error_suspect = false;  // target archived == target issued
};

// Component-reuse edges whose target was already archived when the source
// was issued.
inline std::vector<ArchivedReference> archived_at_issuance(const ReferenceGraph& g,
                                                           const Corpus& corpus) {
    std::vector<ArchivedReference> out;
    for (const ReferenceEdge& e : g.edges) {
        if (!g.edge_has_binary(e, BinaryCode::ComponentReuse)) continue;
        auto src = corpus.records.find(e.source);
        auto dst = corpus.records.find(e.target);
        if (src == corpus.records.end() || dst == corpus.records.end()) continue;
        if (!dst->second.archived) continue;
        if (*dst->second.archived < src->second.issued) {
            ArchivedReference ar;
            ar.edge = {e.source, e.target};
            ar.gap_days = src->second.issued - *dst->second.archived;
            ar.data_error_suspect = *dst->second.archived == dst->second.issued;
            out.push_back(std::move(ar));
        }
    }
    return out;
}

struct FadeSample {
    std::string cert_id;
    long days = 0;  // archival -> first date with zero reach-from-active
    bool censored = false;
};

struct FadeReport {
    std::vector<FadeSample> samples;
    // survival ratio S(d): share of the cohort whose reach-from-active is
    // still positive d days after archival; censored samples never fade
    std::vector<std::pair<long, double>> survival;  // (day offset, ratio)
    double mean_fade_days = 0.0;                    // over uncensored samples
};

// Cohort: archived products whose reach from active ancestors was positive on
// their archival date. Ancestry runs over the full component-reuse graph;
// activity is evaluated per ancestor at the probe date.
inline FadeReport reach_fade(const ReferenceGraph& g, const Corpus& corpus) {
    FadeReport report;
    auto backward = detail::adjacency(g, /*forward=*/false, BinaryCode::ComponentReuse);
    for (const auto& [id, rec] : corpus.records) {
        if (!rec.archived || !g.vertices.count(id)) continue;
        Date archival = *rec.archived;
        std::set<std::string> ancestors = detail::closure_from(backward, id);
        if (ancestors.empty()) continue;
        auto active_count = [&](Date at) {
            size_t count = 0;
            for (const std::string& v : ancestors) {
                auto it = corpus.records.find(v);
                if (it != corpus.records.end() && is_active(it->second, at)) ++count;
            }
            return count;
        };
        if (active_count(archival) == 0) continue;
        std::set<Date> events;
        for (const std::string& v : ancestors) {
            const CertificateRecord& a = corpus.records.at(v);
            if (a.issued > archival) events.insert(a.issued);
            if (a.archived) {
                if (*a.archived > archival) events.insert(*a.archived);
            } else if (a.status != CertStatus::Active) {
                Date cap = a.issued.plus_years(5);
                if (cap > archival) events.insert(cap);
            }
        }
        FadeSample sample;
        sample.cert_id = id;
        sample.censored = true;
        for (Date t : events) {
            if (active_count(t) == 0) {
                sample.days = t - archival;
                sample.censored = false;
                break;
            }
        }
        if (sample.censored)
            sample.days = corpus.snapshot_date > archival ? corpus.snapshot_date - archival : 0;
        report.samples.push_back(std::move(sample));
    }
    std::sort(report.samples.begin(), report.samples.end(),
              [](const FadeSample& a, const FadeSample& b) { return a.cert_id < b.cert_id; });

    size_t cohort = report.samples.size();
    if (cohort > 0) {
        std::set<long> offsets;
        double fade_sum = 0.0;
        size_t fade_count = 0;
        for (const FadeSample& s : report.samples)
            if (!s.censored) {
                offsets.insert(s.days);
                fade_sum += static_cast<double>(s.days);
                ++fade_count;
            }
        report.mean_fade_days = fade_count > 0 ? fade_sum / static_cast<double>(fade_count) : 0.0;
        report.survival.emplace_back(0, 1.0);
        for (long d : offsets) {
            size_t faded = 0;
            for (const FadeSample& s : report.samples)
                if (!s.censored && s.days <= d) ++faded;
            report.survival.emplace_back(
                d, 1.0 - static_cast<double>(faded) / static_cast<double>(cohort));
        }
    }
    return report;
}

struct PolicyEdge {
    EdgeKey edge;
    long age_days = 0;  // source issuance minus effective target date
    bool maintenance_applied = false;
    bool violation = false;
};

struct PolicySchemeStats {
    size_t referencing_products = 0;
    size_t violating_products = 0;
    double violation_fraction = 0.0;
};

struct PolicyReport {
    long threshold_days = 548;  // 18 months
    std::vector<PolicyEdge> edges;
    std::map<std::string, PolicySchemeStats> per_scheme;
    // per scheme: cumulative fraction of edges with age <= x days
    std::map<std::string, std::vector<std::pair<long, double>>> age_cdf;
};

// 18-month rule over component-reuse edges whose source is a Smartcard
// product (the composite-evaluation proxy). A maintenance report on or before
// the source's issuance resets the referenced certificate's effective age.
inline PolicyReport policy_18m(const ReferenceGraph& g, const Corpus& corpus,
                               const std::vector<std::string>& schemes) {
    PolicyReport report;
    std::set<std::string> known_schemes;
    for (const auto& [id, rec] : corpus.records) known_schemes.insert(rec.scheme);
    for (const std::string& s : schemes)
        if (!known_schemes.count(s)) throw DataError("policy_18m: unknown scheme tag '" + s + "'");
    std::set<std::string> wanted(schemes.begin(), schemes.end());

    std::map<std::string, std::set<std::string>> products_by_scheme, violators_by_scheme;
    std::map<std::string, std::vector<long>> ages_by_scheme;
    for (const ReferenceEdge& e : g.edges) {
        if (!g.edge_has_binary(e, BinaryCode::ComponentReuse)) continue;
        auto src = corpus.records.find(e.source);
        auto dst = corpus.records.find(e.target);
        if (src == corpus.records.end() || dst == corpus.records.end()) continue;
        if (supercategory_of(corpus, src->second) != Supercategory::Smartcard) continue;
        if (!wanted.count(src->second.scheme)) continue;

        PolicyEdge pe;
        pe.edge = {e.source, e.target};
        Date effective = dst->second.issued;
        for (const Date& m : dst->second.maintenance_dates)
            if (m <= src->second.issued && m > effective) {
                effective = m;
                pe.maintenance_applied = true;
            }
        pe.age_days = src->second.issued - effective;
        pe.violation = pe.age_days > report.threshold_days;
        products_by_scheme[src->second.scheme].insert(e.source);
        if (pe.violation) violators_by_scheme[src->second.scheme].insert(e.source);
        ages_by_scheme[src->second.scheme].push_back(pe.age_days);
        report.edges.push_back(std::move(pe));
    }
    for (const std::string& s : schemes) {
        PolicySchemeStats st;
        st.referencing_products = products_by_scheme[s].size();
        st.violating_products = violators_by_scheme[s].size();
        st.violation_fraction =
            st.referencing_products > 0
                ? static_cast<double>(st.violating_products) /
                      static_cast<double>(st.referencing_products)
                : 0.0;
        report.per_scheme[s] = st;

        std::vector<long>& ages = ages_by_scheme[s];
        std::sort(ages.begin(), ages.end());
        std::vector<std::pair<long, double>> cdf;
        for (size_t i = 0; i < ages.size(); ++i) {
            if (i + 1 < ages.size() && ages[i + 1] == ages[i]) continue;
            cdf.emplace_back(ages[i],
                             static_cast<double>(i + 1) / static_cast<double>(ages.size()));
        }
        report.age_cdf[s] = std::move(cdf);
    }
    return report;
}

// ---- report serialization -------------------------------------------------

inline nlohmann::json culture_stats_to_json(const CultureStats& stats) {
    auto bucket = [](const CultureBucket& b) {
        auto frac = [&](size_t c) {
            return b.total > 0 ? static_cast<double>(c) / static_cast<double>(b.total) : 0.0;
        };
        return nlohmann::json{{"total", b.total},
                              {"any_reference", b.any_reference},
                              {"any_reference_fraction", frac(b.any_reference)},
                              {"component_reuse", b.component_reuse},
                              {"component_reuse_fraction", frac(b.component_reuse)},
                              {"predecessor", b.predecessor},
                              {"predecessor_fraction", frac(b.predecessor)}};
    };
    nlohmann::json per;
    for (const auto& [sc, b] : stats.per_supercategory) per[to_string(sc)] = bucket(b);
    return {{"schema_version", 1}, {"report", "rq1_culture"}, {"per_supercategory", per},
            {"global", bucket(stats.global)}};
}

inline nlohmann::json time_series_to_json(const TimeSeries& ts) {
    nlohmann::json probes = nlohmann::json::array();
    for (const Date& d : ts.probes) probes.push_back(d.iso());
    nlohmann::json rows;
    for (const auto& [sc, cells] : ts.rows) {
        nlohmann::json arr = nlohmann::json::array();
        for (const TimeSeriesCell& c : cells)
            arr.push_back({{"active_count", c.active_count},
                           {"avg_transitive_refs", c.avg_transitive_refs},
                           {"avg_reach", c.avg_reach}});
        rows[to_string(sc)] = std::move(arr);
    }
    return {{"schema_version", 1}, {"report", "rq1_timeseries"},
            {"denominator", "active_at_probe"}, {"probes", probes}, {"rows", rows}};
}

inline std::string time_series_to_csv(const TimeSeries& ts) {
    std::string out = "x,y,series\n";
    for (const auto& [sc, cells] : ts.rows)
        for (size_t i = 0; i < ts.probes.size(); ++i) {
            out += ts.probes[i].iso() + "," + format_double(cells[i].avg_transitive_refs) + "," +
                   to_string(sc) + "/avg_transitive_refs\n";
            out += ts.probes[i].iso() + "," + format_double(cells[i].avg_reach) + "," +
                   to_string(sc) + "/avg_reach\n";
        }
    return out;
}

inline nlohmann::json impact_report_to_json(const ImpactReport& r) {
    nlohmann::json comps = nlohmann::json::array();
    for (const ComponentImpact& c : r.components) {
        nlohmann::json uncovered = nlohmann::json::array();
        for (const EdgeKey& k : c.uncovered)
            uncovered.push_back({{"source", k.source}, {"target", k.target}});
        nlohmann::json tree = nlohmann::json::array();
        for (const EdgeKey& k : c.tree_edges)
            tree.push_back({{"source", k.source}, {"target", k.target}});
        comps.push_back({{"size", c.members.size()},
                         {"members", c.members},
                         {"peak_vertex", c.peak_vertex},
                         {"peak_reach", c.peak_reach},
                         {"tree_edges", tree},
                         {"component_used", c.component_used},
                         {"labelled", c.labelled},
                         {"uncovered", uncovered},
                         {"susceptible_fraction", c.susceptible_fraction},
                         {"skipped", c.skipped}});
    }
    return {{"schema_version", 1},
            {"report", "rq2_impact"},
            {"min_size", r.min_size},
            {"exclude_above", r.exclude_above},
            {"components", comps},
            {"total_component_used", r.total_component_used},
            {"total_labelled", r.total_labelled},
            {"micro_fraction", r.micro_fraction},
            {"macro_fraction", r.macro_fraction}};
}

inline nlohmann::json fade_report_to_json(const FadeReport& r) {
    nlohmann::json samples = nlohmann::json::array();
    for (const FadeSample& s : r.samples)
        samples.push_back({{"cert_id", s.cert_id}, {"days", s.days}, {"censored", s.censored}});
    nlohmann::json survival = nlohmann::json::array();
    for (const auto& [d, ratio] : r.survival) survival.push_back({{"days", d}, {"ratio", ratio}});
    return {{"schema_version", 1}, {"report", "rq3_reach_fade"},
            {"ancestry", "full-graph, activity per ancestor at probe date"},
            {"cohort_size", r.samples.size()}, {"samples", samples},
            {"mean_fade_days", r.mean_fade_days}, {"survival", survival}};
}

inline std::string fade_report_to_csv(const FadeReport& r) {
    std::string out = "x,y,series\n";
    for (const auto& [d, ratio] : r.survival)
        out += std::to_string(d) + "," + format_double(ratio) + ",survival\n";
    return out;
}

inline nlohmann::json policy_report_to_json(const PolicyReport& r) {
    nlohmann::json edges = nlohmann::json::array();
    for (const PolicyEdge& e : r.edges)
        edges.push_back({{"source", e.edge.source},
                         {"target", e.edge.target},
                         {"age_days", e.age_days},
                         {"maintenance_applied", e.maintenance_applied},
                         {"violation", e.violation}});
    nlohmann::json per;
    for (const auto& [scheme, st] : r.per_scheme)
        per[scheme] = {{"referencing_products", st.referencing_products},
                       {"violating_products", st.violating_products},
                       {"violation_fraction", st.violation_fraction}};
    return {{"schema_version", 1}, {"report", "rq3_policy_18m"},
            {"threshold_days", r.threshold_days}, {"edges", edges}, {"per_scheme", per}};
}

inline std::string policy_report_to_csv(const PolicyReport& r) {
    std::string out = "x,y,series\n";
    for (const auto& [scheme, cdf] : r.age_cdf)
        for (const auto& [age, frac] : cdf)
            out += std::to_string(age) + "," + format_double(frac) + "," + scheme + "\n";
    return out;
}

inline nlohmann::json archived_refs_to_json(const std::vector<ArchivedReference>& refs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ArchivedReference& r : refs)
        arr.push_back({{"source", r.edge.source},
                       {"target", r.edge.target},
                       {"gap_days", r.gap_days},
                       {"data_error_suspect", r.data_error_suspect}});
    return {{"schema_version", 1}, {"report", "rq3_archived_at_issuance"},
            {"offenders", arr}, {"count", refs.size()}};
}

}  // namespace ccref
