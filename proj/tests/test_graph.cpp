#include "catch_amalgamated.hpp"

#include "ccref/graph.hpp"
#include "fixture_helpers.hpp"
#include "oracles.hpp"

using namespace ccref;

namespace {

// bare-bones graph builder for hand examples
ReferenceGraph make_graph(const std::vector<std::string>& vertices,
                          const std::vector<std::tuple<std::string, std::string, char>>& edges) {
    ReferenceGraph g;
    for (const std::string& v : vertices) g.vertices.insert(v);
    for (const auto& [s, t, code] : edges) {
        ReferenceEdge e;
        e.source = s;
        e.target = t;
        ReferenceSegment seg;
        seg.text = "ref " + t;
        seg.match.raw = t;
        seg.match.canonical = t;
        seg.match.span = {0, seg.text.size()};
        e.segments.push_back(seg);
        e.source_docs.insert(SourceDoc::Report);
        g.edges.push_back(e);
        EdgeLabel label;
        if (code == 'C')
            label.binary = BinaryCode::ComponentReuse;
        else if (code == 'P')
            label.binary = BinaryCode::Predecessor;
        if (code != 'U') g.labels[{s, t}] = label;
    }
    g.rebuild_index();
    return g;
}

}  // namespace

TEST_CASE("build_graph on the 8-certificate fixture") {
    Corpus corpus = testfix::load_8cert_corpus();
    auto schemes = testfix::default_schemes();
    ReferenceGraph g = build_graph(corpus, schemes, testfix::default_abbreviations());

    CHECK(g.vertices.size() == 8);
    REQUIRE(g.edges.size() == 6);
    CHECK(g.find_edge({"BSI-DSZ-CC-0002-2019", "BSI-DSZ-CC-0001-2018"}) != nullptr);
    CHECK(g.find_edge({"BSI-DSZ-CC-0002-2019", "BSI-DSZ-CC-0007-2015"}) != nullptr);
    CHECK(g.find_edge({"ANSSI-CC-2020/01", "BSI-DSZ-CC-0001-2018"}) != nullptr);
    CHECK(g.find_edge({"ANSSI-CC-2020/01", "ANSSI-CC-2019/77"}) != nullptr);
    CHECK(g.find_edge({"BSI-DSZ-CC-0004-2020", "BSI-DSZ-CC-0007-2015"}) != nullptr);
    CHECK(g.find_edge({"NSCIB-CC-100001", "BSI-DSZ-CC-0001-2018"}) != nullptr);

    // self-mention in A's report is not an edge
    CHECK(g.find_edge({"BSI-DSZ-CC-0001-2018", "BSI-DSZ-CC-0001-2018"}) == nullptr);

    REQUIRE(g.dangling.size() == 1);
    CHECK(g.dangling[0].source == "SERTIT-050");
    CHECK(g.dangling[0].target == "BSI-DSZ-CC-9999-2099");

    // the C->H edge came from the security target
    const ReferenceEdge* ch = g.find_edge({"ANSSI-CC-2020/01", "ANSSI-CC-2019/77"});
    CHECK(ch->source_docs == std::set<SourceDoc>{SourceDoc::Target});
    for (const ReferenceEdge& e : g.edges) CHECK_FALSE(e.segments.empty());
}

TEST_CASE("reach hand examples") {
    SECTION("isolated vertex") {
        ReferenceGraph g = make_graph({"a"}, {});
        CHECK(reach(g, "a") == 0);
    }
    SECTION("single component-reuse edge") {
        ReferenceGraph g = make_graph({"a", "b", "b2"}, {{"a", "b", 'C'}, {"a", "b2", 'U'}});
        CHECK(reach(g, "b") == 1);
        CHECK(reach(g, "a") == 0);
        CHECK(reach(g, "b2") == 0);  // unlabeled edge is not component reuse
    }
    SECTION("diamond") {
        ReferenceGraph g = make_graph(
            {"a", "b", "c", "d"},
            {{"a", "b", 'C'}, {"a", "c", 'C'}, {"b", "d", 'C'}, {"c", "d", 'C'}});
        CHECK(reach(g, "d") == 3);
    }
    SECTION("label filter breaks the path") {
        ReferenceGraph g = make_graph({"a", "b", "c"}, {{"a", "b", 'C'}, {"b", "c", 'P'}});
        CHECK(reach(g, "c") == 0);
        CHECK(reach(g, "b") == 1);
    }
    SECTION("cycles terminate") {
        ReferenceGraph g = make_graph({"a", "b"}, {{"a", "b", 'C'}, {"b", "a", 'C'}});
        CHECK(reach(g, "a") == 1);
        CHECK(reach(g, "b") == 1);
    }
    SECTION("unknown vertex") {
        ReferenceGraph g = make_graph({"a"}, {});
        CHECK_THROWS_AS(reach(g, "nope"), DataError);
    }
}

TEST_CASE("transitive_refs hand examples") {
    ReferenceGraph chain = make_graph({"a", "b", "c"}, {{"a", "b", 'C'}, {"b", "c", 'C'}});
    CHECK(transitive_refs(chain, "a") == std::set<std::string>{"b", "c"});
    ReferenceGraph mixed = make_graph({"a", "b", "c"}, {{"a", "b", 'C'}, {"b", "c", 'P'}});
    CHECK(transitive_refs(mixed, "a") == std::set<std::string>{"b"});
}

TEST_CASE("reach and transitive_refs match the closure oracle on random graphs") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto rg = testfix::make_random_graph(seed, 60, 150, seed % 2 == 0);
        auto closure = oracle::warshall_closure(rg.ids.size(), rg.cr_edges);
        for (size_t v = 0; v < rg.ids.size(); ++v) {
            size_t expected_reach = 0;
            std::set<std::string> expected_desc;
            for (size_t u = 0; u < rg.ids.size(); ++u) {
                if (u != v && closure[u][v]) ++expected_reach;
                if (u != v && closure[v][u]) expected_desc.insert(rg.ids[u]);
            }
            REQUIRE(reach(rg.graph, rg.ids[v]) == expected_reach);
            REQUIRE(transitive_refs(rg.graph, rg.ids[v]) == expected_desc);
        }
    }
}

TEST_CASE("reach duality holds on random graphs") {
    for (std::uint64_t seed = 21; seed <= 30; ++seed) {
        auto rg = testfix::make_random_graph(seed, 50, 120);
        for (const std::string& c : rg.graph.vertices) {
            size_t count = 0;
            for (const std::string& v : rg.graph.vertices)
                if (v != c && transitive_refs(rg.graph, v).count(c)) ++count;
            REQUIRE(reach(rg.graph, c) == count);
        }
    }
}

TEST_CASE("weakly connected components") {
    SECTION("two pairs") {
        ReferenceGraph g = make_graph({"a", "b", "c", "d", "isolated"},
                                      {{"a", "b", 'C'}, {"c", "d", 'P'}});
        auto comps = weakly_connected_components(g);
        REQUIRE(comps.size() == 2);
        CHECK(comps[0] == std::set<std::string>{"a", "b"});  // tie by smallest member
        CHECK(comps[1] == std::set<std::string>{"c", "d"});
    }
    SECTION("empty edge set") {
        ReferenceGraph g = make_graph({"a", "b"}, {});
        CHECK(weakly_connected_components(g).empty());
    }
    SECTION("label filter") {
        ReferenceGraph g = make_graph({"a", "b", "c", "d"}, {{"a", "b", 'C'}, {"c", "d", 'P'}});
        auto comps = weakly_connected_components(g, BinaryCode::ComponentReuse);
        REQUIRE(comps.size() == 1);
        CHECK(comps[0] == std::set<std::string>{"a", "b"});
    }
}

TEST_CASE("components match the union-find oracle on random graphs") {
    for (std::uint64_t seed = 31; seed <= 45; ++seed) {
        auto rg = testfix::make_random_graph(seed, 80, 200);
        oracle::UnionFind uf(rg.ids.size());
        std::set<size_t> touched;
        for (const auto& [a, b] : rg.all_edges) {
            uf.unite(a, b);
            touched.insert(a);
            touched.insert(b);
        }
        std::map<size_t, std::set<std::string>> expected;
        for (size_t v : touched) expected[uf.find(v)].insert(rg.ids[v]);
        std::set<std::set<std::string>> expected_set;
        for (auto& [root, members] : expected) expected_set.insert(members);

        auto comps = weakly_connected_components(rg.graph);
        std::set<std::set<std::string>> got(comps.begin(), comps.end());
        REQUIRE(got == expected_set);
        for (size_t i = 1; i < comps.size(); ++i)
            CHECK(comps[i - 1].size() >= comps[i].size());
    }
}

TEST_CASE("snapshot removes inactive vertices and their edges") {
    Corpus corpus = testfix::load_8cert_corpus();
    auto schemes = testfix::default_schemes();
    ReferenceGraph g = build_graph(corpus, schemes);

    // G archived 2020-01-01: gone at mid-2020, its incoming edges too
    ReferenceGraph snap = snapshot(g, corpus, Date(2020, 8, 1));
    CHECK_FALSE(snap.vertices.count("BSI-DSZ-CC-0007-2015"));
    CHECK(snap.find_edge({"BSI-DSZ-CC-0004-2020", "BSI-DSZ-CC-0007-2015"}) == nullptr);
    CHECK(snap.find_edge({"BSI-DSZ-CC-0002-2019", "BSI-DSZ-CC-0001-2018"}) != nullptr);

    // before any issuance: empty graph
    ReferenceGraph early = snapshot(g, corpus, Date(2000, 1, 1));
    CHECK(early.vertices.empty());
    CHECK(early.edges.empty());
}

TEST_CASE("snapshot of an all-active fixture at snapshot date is the full graph") {
    Corpus corpus = ccref::load_corpus(testfix::fixture_dir() + "/corpus_small.jsonl",
                                       Date(2023, 11, 1));
    ReferenceGraph g = build_graph(corpus, testfix::default_schemes());
    ReferenceGraph snap = snapshot(g, corpus, corpus.snapshot_date);
    CHECK(snap.vertices == g.vertices);
    CHECK(snap.edges.size() == g.edges.size());
}

TEST_CASE("apply_labels semantics") {
    ReferenceGraph g = make_graph({"a", "b"}, {{"a", "b", 'U'}});

    EdgeLabel predicted;
    predicted.binary = BinaryCode::ComponentReuse;
    predicted.provenance = Provenance::Predicted;
    predicted.confidence = 0.8;
    g = apply_labels(g, {{{"a", "b"}, predicted}});
    CHECK(g.labels.at({"a", "b"}).provenance == Provenance::Predicted);

    EdgeLabel manual;
    manual.binary = BinaryCode::Predecessor;
    manual.provenance = Provenance::Manual;
    g = apply_labels(g, {{{"a", "b"}, manual}});
    CHECK(g.labels.at({"a", "b"}).binary == BinaryCode::Predecessor);

    // a later prediction does not displace the manual label
    g = apply_labels(g, {{{"a", "b"}, predicted}});
    CHECK(g.labels.at({"a", "b"}).provenance == Provenance::Manual);
    CHECK(g.labels.at({"a", "b"}).binary == BinaryCode::Predecessor);

    CHECK_THROWS_AS(apply_labels(g, {{{"a", "zzz"}, manual}}), DataError);
}

TEST_CASE("bulk manual annotation labels every edge") {
    auto rg = testfix::make_random_graph(1234, 150, 500);
    size_t take = std::min<size_t>(400, rg.graph.edges.size());
    std::map<EdgeKey, EdgeLabel> annotations;
    size_t i = 0;
    for (const ReferenceEdge& e : rg.graph.edges) {
        if (i++ >= take) break;
        EdgeLabel l;
        l.binary = i % 2 ? BinaryCode::ComponentReuse : BinaryCode::Predecessor;
        l.provenance = Provenance::Manual;
        annotations[{e.source, e.target}] = l;
    }
    ReferenceGraph g = apply_labels(rg.graph, annotations);
    size_t manual = 0;
    for (const auto& [key, label] : g.labels)
        manual += label.provenance == Provenance::Manual ? 1 : 0;
    CHECK(manual == take);
}

TEST_CASE("edge label consistency rules") {
    EdgeLabel ok;
    ok.binary = BinaryCode::ComponentReuse;
    ok.fine = FineCode::ComponentShared;
    CHECK(ok.consistency_error().empty());

    EdgeLabel bad_fine;
    bad_fine.binary = BinaryCode::Predecessor;
    bad_fine.fine = FineCode::ComponentUsed;
    CHECK_FALSE(bad_fine.consistency_error().empty());

    EdgeLabel special;
    special.special = SpecialCode::Irrelevant;
    CHECK(special.consistency_error().empty());

    EdgeLabel special_and_binary;
    special_and_binary.special = SpecialCode::Unknown;
    special_and_binary.binary = BinaryCode::ComponentReuse;
    CHECK_FALSE(special_and_binary.consistency_error().empty());

    EdgeLabel low_conf_manual;
    low_conf_manual.binary = BinaryCode::ComponentReuse;
    low_conf_manual.confidence = 0.4;
    CHECK_FALSE(low_conf_manual.consistency_error().empty());
}

TEST_CASE("adding a component-reuse edge never decreases reach") {
    for (std::uint64_t seed = 50; seed <= 56; ++seed) {
        auto rg = testfix::make_random_graph(seed, 30, 60);
        ReachTable before = reach_all(rg.graph);

        SplitMix64 rng(seed * 977);
        size_t a = rng.below(rg.ids.size()), b = rng.below(rg.ids.size());
        if (a == b) continue;
        if (rg.graph.find_edge({rg.ids[a], rg.ids[b]})) continue;
        ReferenceGraph extended = rg.graph;
        ReferenceEdge e;
        e.source = rg.ids[a];
        e.target = rg.ids[b];
        ReferenceSegment seg;
        seg.text = "x";
        seg.match.raw = "x";
        seg.match.canonical = rg.ids[b];
        e.segments.push_back(seg);
        extended.edges.push_back(e);
        extended.rebuild_index();
        EdgeLabel l;
        l.binary = BinaryCode::ComponentReuse;
        extended.labels[{rg.ids[a], rg.ids[b]}] = l;

        ReachTable after = reach_all(extended);
        for (const auto& [v, r] : before) REQUIRE(after.at(v) >= r);
    }
}

TEST_CASE("relabelling component-reuse to predecessor never increases reach") {
    for (std::uint64_t seed = 60; seed <= 66; ++seed) {
        auto rg = testfix::make_random_graph(seed, 30, 60);
        if (rg.cr_edges.empty()) continue;
        ReachTable before = reach_all(rg.graph);
        auto [a, b] = rg.cr_edges[seed % rg.cr_edges.size()];
        ReferenceGraph relabelled = rg.graph;
        relabelled.labels[{rg.ids[a], rg.ids[b]}].binary = BinaryCode::Predecessor;
        ReachTable after = reach_all(relabelled);
        for (const auto& [v, r] : before) REQUIRE(after.at(v) <= r);
    }
}

TEST_CASE("graph serialization round-trips byte-identically") {
    Corpus corpus = testfix::load_8cert_corpus();
    ReferenceGraph g = build_graph(corpus, testfix::default_schemes(),
                                   testfix::default_abbreviations());
    g = apply_labels(g, parse_labels(read_file(testfix::fixture_dir() + "/labels_8cert.csv")));

    std::string once = serialize_graph(g);
    ReferenceGraph back = parse_graph(once);
    CHECK(back.vertices == g.vertices);
    CHECK(back.edges.size() == g.edges.size());
    CHECK(back.labels.size() == g.labels.size());
    CHECK(back.dangling == g.dangling);
    CHECK(serialize_graph(back) == once);
}

TEST_CASE("label CSV round-trips") {
    auto labels = parse_labels(read_file(testfix::fixture_dir() + "/labels_8cert.csv"));
    REQUIRE(labels.size() == 6);
    const EdgeLabel& l = labels.at({"BSI-DSZ-CC-0002-2019", "BSI-DSZ-CC-0001-2018"});
    CHECK(l.binary == BinaryCode::ComponentReuse);
    CHECK(l.fine == FineCode::ComponentUsed);
    CHECK(l.provenance == Provenance::Manual);
    CHECK(l.confidence == 1.0);

    std::string csv = serialize_labels(labels);
    auto back = parse_labels(csv);
    CHECK(back.size() == labels.size());
    CHECK(serialize_labels(back) == csv);
}

TEST_CASE("label CSV parser rejects malformed rows") {
    CHECK_THROWS_AS(parse_labels("edge_source,edge_target\nx,y\n"), DataError);
    CHECK_THROWS_AS(
        parse_labels("edge_source,edge_target,binary,fine,special,provenance,confidence\n"
                     "a,b,NotACode,,,manual,1\n"),
        DataError);
    CHECK_THROWS_AS(
        parse_labels("edge_source,edge_target,binary,fine,special,provenance,confidence\n"
                     "a,b,Predecessor,ComponentUsed,,manual,1\n"),
        DataError);  // fine contradicts binary
}
