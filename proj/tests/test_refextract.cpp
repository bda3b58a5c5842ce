#include "catch_amalgamated.hpp"

#include "ccref/refextract.hpp"
#include "fixture_helpers.hpp"

using namespace ccref;

TEST_CASE("canonicalize_id unifies line-wrapped and case variants") {
    CHECK(canonicalize_id("BSI-DSZ-CC- 0813- 2012") == "BSI-DSZ-CC-0813-2012");
    CHECK(canonicalize_id("bsi-dsz-cc-0813-2012") == "BSI-DSZ-CC-0813-2012");
    CHECK(canonicalize_id("SERTIT-115") == "SERTIT-115");
    CHECK(canonicalize_id("BSI-DSZ-CC-\n0813-2012") == "BSI-DSZ-CC-0813-2012");
    CHECK(canonicalize_id("BSI\xC2\xAD" "DSZ\xC2\xAD" "CC\xC2\xAD" "0813\xC2\xAD" "2012") ==
          "BSI-DSZ-CC-0813-2012");
    CHECK(canonicalize_id("ANSSI-CC-2019/ 50") == "ANSSI-CC-2019/50");
    CHECK(canonicalize_id("ANSSI-CC-2019_50") == "ANSSI-CC-2019/50");
    CHECK(canonicalize_id("A  -  B--C") == "A-B-C");
}

TEST_CASE("canonicalize_id is idempotent") {
    SplitMix64 rng(7);
    const std::string alphabet = "ABCdef0123- /_\xC2\xAD";
    for (int trial = 0; trial < 200; ++trial) {
        std::string s;
        size_t len = rng.below(24);
        for (size_t i = 0; i < len; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
        std::string once = canonicalize_id(s);
        CHECK(canonicalize_id(once) == once);
    }
}

TEST_CASE("extract_ids finds a referenced certificate") {
    auto schemes = testfix::default_schemes();
    std::string text = "The TOE is composite on BSI-DSZ-CC-0813-2012 and was evaluated.";
    auto matches = extract_ids(text, schemes, "SELF-1");
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].canonical == "BSI-DSZ-CC-0813-2012");
    CHECK(matches[0].scheme_tag == "DE");
    CHECK(text.substr(matches[0].span.begin, matches[0].span.end - matches[0].span.begin) ==
          matches[0].raw);
}

TEST_CASE("extract_ids excludes self references") {
    auto schemes = testfix::default_schemes();
    std::string text = "This report concerns BSI-DSZ-CC-0813-2012 only.";
    CHECK(extract_ids(text, schemes, "BSI-DSZ-CC-0813-2012").empty());
}

TEST_CASE("extract_ids does not match inside longer tokens") {
    auto schemes = testfix::default_schemes();
    CHECK(extract_ids("see XBSI-DSZ-CC-0813-2012 here", schemes, "").empty());
    CHECK(extract_ids("see BSI-DSZ-CC-0813-20127 here", schemes, "").empty());
}

TEST_CASE("extract_ids output spans are disjoint and sorted") {
    auto schemes = testfix::default_schemes();
    std::string text =
        "First ANSSI-CC-2019/50 then NSCIB-CC-54321 then SERTIT-115 and "
        "BSI-DSZ-CC-0813-2012 close the list.";
    auto matches = extract_ids(text, schemes, "");
    REQUIRE(matches.size() == 4);
    for (size_t i = 1; i < matches.size(); ++i) {
        CHECK(matches[i - 1].span.end <= matches[i].span.begin);
    }
    CHECK(matches[0].canonical == "ANSSI-CC-2019/50");
    CHECK(matches[1].canonical == "NSCIB-CC-54321");
    CHECK(matches[2].canonical == "SERTIT-115");
    CHECK(matches[3].canonical == "BSI-DSZ-CC-0813-2012");
}

TEST_CASE("generic fallback catches two-group ids of unknown schemes") {
    auto schemes = testfix::default_schemes();
    auto matches = extract_ids("Derived from KECS-CC-2015-32 originally.", schemes, "");
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].scheme_tag == "GEN");
    CHECK(matches[0].canonical == "KECS-CC-2015-32");
}

TEST_CASE("planted fixture extraction meets the precision and recall bar") {
    auto fx = testfix::make_planted_fixture();
    REQUIRE(fx.planted_total == 120);
    REQUIRE(fx.decoy_total == 30);
    auto pr = testfix::score_extraction(fx, testfix::default_schemes());
    INFO("precision=" << pr.precision << " recall=" << pr.recall);
    CHECK(pr.precision >= 0.99);
    CHECK(pr.recall >= 0.99);
}

TEST_CASE("split_sentences on plain terminators") {
    auto sentences = split_sentences("A. B. ends here. Next one.");
    REQUIRE(sentences.size() == 4);
    CHECK(sentences[0].text == "A.");
    CHECK(sentences[1].text == " B.");
    CHECK(sentences[2].text == " ends here.");
    CHECK(sentences[3].text == " Next one.");
}

TEST_CASE("split_sentences respects identifier guard spans") {
    std::string text = "Certified per 2006-3-INF-55. Done.";
    auto schemes = testfix::default_schemes();
    auto matches = extract_ids(text, schemes, "");
    REQUIRE(matches.size() == 1);
    std::vector<Span> spans{matches[0].span};
    auto sentences = split_sentences(text, {}, spans);
    REQUIRE(sentences.size() == 2);
    CHECK(sentences[0].text == "Certified per 2006-3-INF-55.");
}

TEST_CASE("split_sentences handles abbreviations and blank lines") {
    auto abbrevs = testfix::default_abbreviations();
    auto s1 = split_sentences("See fig. 4 for details. Next.", abbrevs);
    REQUIRE(s1.size() == 2);
    CHECK(s1[0].text == "See fig. 4 for details.");

    auto s2 = split_sentences("First block\n\nSecond block.");
    REQUIRE(s2.size() == 2);
    CHECK(s2[0].text == "First block\n\n");

    CHECK(split_sentences("").empty());
}

TEST_CASE("split_sentences does not break decimals") {
    auto sentences = split_sentences("Version 1.2 was used. Done.");
    REQUIRE(sentences.size() == 2);
}

TEST_CASE("split_sentences is a covering partition") {
    SplitMix64 rng(99);
    const std::vector<std::string> pieces = {"Alpha beta",  "gamma. ",  "Delta! ",
                                             "epsilon? ",   "\n\n",     "no. 4 ",
                                             "zeta 1.5 mm ", "eta.",    " theta "};
    for (int trial = 0; trial < 100; ++trial) {
        std::string text;
        size_t n = rng.below(12);
        for (size_t i = 0; i < n; ++i) text += pieces[rng.below(pieces.size())];
        auto sentences = split_sentences(text, testfix::default_abbreviations());
        std::string rebuilt;
        size_t expect_begin = 0;
        for (const Sentence& s : sentences) {
            CHECK(s.begin == expect_begin);
            CHECK(s.end > s.begin);
            rebuilt += s.text;
            expect_begin = s.end;
        }
        CHECK(rebuilt == text);
        if (!sentences.empty()) CHECK(sentences.back().end == text.size());
    }
}

TEST_CASE("extract_segments windows sentences around each occurrence") {
    auto schemes = testfix::default_schemes();
    std::string text;
    for (int i = 0; i < 10; ++i) {
        if (i == 5)
            text += "Sentence five cites BSI-DSZ-CC-0813-2012 here. ";
        else
            text += "Sentence number " + std::to_string(i) + " is filler. ";
    }
    auto segments = extract_segments(text, "BSI-DSZ-CC-0813-2012", schemes);
    REQUIRE(segments.size() == 1);
    CHECK(segments[0].sentence_index == 5);
    // window = sentences 3..6
    CHECK(segments[0].text.find("number 3") != std::string::npos);
    CHECK(segments[0].text.find("number 4") != std::string::npos);
    CHECK(segments[0].text.find("number 6") != std::string::npos);
    CHECK(segments[0].text.find("number 2") == std::string::npos);
    CHECK(segments[0].text.find("number 7") == std::string::npos);
    CHECK(segments[0].text.find(segments[0].match.raw) != std::string::npos);
}

TEST_CASE("extract_segments clips at document boundaries") {
    auto schemes = testfix::default_schemes();
    std::string text = "BSI-DSZ-CC-0813-2012 opens the document. Second sentence. Third one.";
    auto segments = extract_segments(text, "BSI-DSZ-CC-0813-2012", schemes);
    REQUIRE(segments.size() == 1);
    CHECK(segments[0].sentence_index == 0);
    CHECK(segments[0].text.find("Second sentence.") != std::string::npos);
    CHECK(segments[0].text.find("Third") == std::string::npos);
}

TEST_CASE("extract_segments yields one segment per occurrence") {
    auto schemes = testfix::default_schemes();
    std::string text;
    for (int i = 0; i < 10; ++i) {
        if (i == 2 || i == 7)
            text += "Mention of SERTIT-115 in sentence " + std::to_string(i) + ". ";
        else
            text += "Filler sentence " + std::to_string(i) + ". ";
    }
    auto segments = extract_segments(text, "SERTIT-115", schemes);
    REQUIRE(segments.size() == 2);
    CHECK(segments[0].sentence_index == 2);
    CHECK(segments[1].sentence_index == 7);
    CHECK(extract_segments(text, "SERTIT-999", schemes).empty());
}

TEST_CASE("every segment contains a raw match of its id") {
    auto fx = testfix::make_planted_fixture(0xF00D);
    auto schemes = testfix::default_schemes();
    for (const auto& doc : fx.docs) {
        auto refs = extract_document_references(doc.text, schemes, "");
        for (const auto& [canonical, segments] : refs)
            for (const ReferenceSegment& seg : segments)
                CHECK(seg.text.find(seg.match.raw) != std::string::npos);
    }
}

TEST_CASE("pattern file loader validates structure") {
    CHECK_THROWS_AS(load_schemes("DE\tBSI.*\tstandard\n"), InputError);  // missing header
    CHECK_THROWS_AS(load_schemes("# ccref-patterns v1\nDE only-two-fields\n"), InputError);
    auto schemes = load_schemes("# ccref-patterns v1\nDE\tBSI-[0-9]+\tstandard\n");
    REQUIRE(schemes.size() == 1);
    CHECK(schemes[0].scheme_tag == "DE");
    CHECK(schemes[0].compiled.size() == 1);
}
