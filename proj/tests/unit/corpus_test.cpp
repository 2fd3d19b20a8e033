#include <doctest.h>

#include <sstream>

#include "cascade/corpus.hpp"
#include "cascade/error.hpp"
#include "support/synthetic.hpp"

using namespace cascade;
using namespace cascade::corpus;

namespace {

std::string numbered_sentences(std::size_t n)
{
    std::string body;
    for (std::size_t i = 0; i < n; ++i) {
        body += (i ? " S" : "S") + std::to_string(i) + " text.";
    }
    return body;
}

std::vector<std::size_t> offsets_of(const std::vector<Passage>& ps)
{
    std::vector<std::size_t> out;
    for (const auto& p : ps) {
        out.push_back(p.sentence_offset);
    }
    return out;
}

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("split_sentences follows the terminal punctuation rule")
{
    CHECK(split_sentences("A. B? C") == std::vector<std::string>{"A.", "B?", "C"});
    CHECK(split_sentences("").empty());
    CHECK(split_sentences("   \n").empty());
    CHECK(split_sentences("One sentence with no terminal") == std::vector<std::string>{"One sentence with no terminal"});
    CHECK(split_sentences("Wait?! Yes.") == std::vector<std::string>{"Wait?!", "Yes."});
    CHECK(split_sentences("Version 2.5 is out. ok") == std::vector<std::string>{"Version 2.5 is out.", "ok"});
}

TEST_CASE("sentences plus separators reconstruct the text")
{
    synthetic::Rng rng(7);
    const std::string alphabet = "ab .!?\n\t";
    for (int trial = 0; trial < 500; ++trial) {
        std::string text;
        std::size_t len = rng.below(40);
        for (std::size_t i = 0; i < len; ++i) {
            text.push_back(alphabet[rng.below(alphabet.size())]);
        }
        auto spans = sentence_spans(text);
        std::size_t cursor = 0;
        for (auto s : spans) {
            REQUIRE(s.begin >= cursor);
            for (std::size_t i = cursor; i < s.begin; ++i) {
                CHECK(std::isspace(static_cast<unsigned char>(text[i])));
            }
            CHECK(s.end > s.begin);
            cursor = s.end;
        }
        for (std::size_t i = cursor; i < text.size(); ++i) {
            CHECK(std::isspace(static_cast<unsigned char>(text[i])));
        }
    }
}

TEST_CASE("segment_document window offsets")
{
    Document doc{"d", "", "", numbered_sentences(17)};
    CHECK(offsets_of(segment_document(doc, 10, 5)) == std::vector<std::size_t>{0, 5, 10});
    doc.body = numbered_sentences(10);
    CHECK(offsets_of(segment_document(doc, 10, 5)) == std::vector<std::size_t>{0});
    doc.body = numbered_sentences(11);
    auto ps = segment_document(doc, 10, 5);
    CHECK(offsets_of(ps) == std::vector<std::size_t>{0, 5});
    CHECK(ps[0].passage_id == "d#0");
    CHECK(ps[1].passage_id == "d#1");
    CHECK(ps[1].parent == "d");
    CHECK(ps[1].text.rfind("S5 text.", 0) == 0);
    CHECK(ps[1].text.size() >= std::string("S10 text.").size());
    CHECK(ps[1].text.substr(ps[1].text.size() - 9) == "S10 text.");
}

TEST_CASE("segment_document keeps original separators inside a passage")
{
    Document doc{"d", "", "", "  First one.\n\nSecond!   Third"};
    auto ps = segment_document(doc, 10, 5);
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].text == "First one.\n\nSecond!   Third");
}

TEST_CASE("segment_document errors")
{
    CHECK(code_of([] { segment_document({"d", "", "", "   "}); }) == ErrorCode::EmptyDocument);
    CHECK(code_of([] { segment_document({"d", "", "", "A."}, 3, 4); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { segment_document({"d", "", "", "A."}, 0, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("windows cover every sentence and overlap by window - stride")
{
    synthetic::Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng.below(60);
        std::size_t window = 1 + rng.below(15);
        std::size_t stride = 1 + rng.below(window);
        auto offs = window_offsets(n, window, stride);
        REQUIRE(!offs.empty());
        CHECK(offs.front() == 0);
        std::vector<int> covered(n, 0);
        for (std::size_t w = 0; w < offs.size(); ++w) {
            CHECK(offs[w] % stride == 0);
            for (std::size_t s = offs[w]; s < std::min(n, offs[w] + window); ++s) {
                covered[s] = 1;
            }
            if (w + 1 < offs.size()) {
                CHECK(offs[w] + window < n);
                CHECK(offs[w + 1] - offs[w] == stride);
                std::size_t next_end = std::min(n, offs[w + 1] + window);
                if (next_end == offs[w + 1] + window) {
                    CHECK(offs[w] + window - offs[w + 1] == window - stride);
                }
            }
        }
        CHECK(offs.back() + window >= n);
        CHECK(std::count(covered.begin(), covered.end(), 1) == static_cast<long>(n));
        if (n <= window) {
            CHECK(offs.size() == 1);
        }
    }
}

TEST_CASE("attach_expansions appends in order and keeps duplicates")
{
    Passage p{"d#0", "d", 0, "body", {}};
    std::vector<std::string> two{"q1", "q2"};
    CHECK(attach_expansions(p, two).expansion_queries == two);
    Passage with{"d#0", "d", 0, "body", {"q1"}};
    std::vector<std::string> dup{"q1"};
    CHECK(attach_expansions(with, dup).expansion_queries == std::vector<std::string>{"q1", "q1"});
    CHECK(attach_expansions(with, {}) == with);
}

TEST_CASE("render_index_text")
{
    Document doc{"d", "u", "t", "body"};
    Passage p{"d#0", "d", 0, "body", {"q"}};
    CHECK(render_index_text(p, doc, true) == "u t body q");
    CHECK(render_index_text(p, doc, false) == "body q");
    Document bare{"d", "", "", "body"};
    CHECK(render_index_text(p, bare, true) == "body q");
    CHECK(render_passage_text(p, doc, true) == "u t body");
    auto text = render_index_text(p, doc, true);
    CHECK(text.find(p.text) != std::string::npos);
}

TEST_CASE("read_corpus accepts 4- and 2-field lines and rejects bad ones")
{
    std::istringstream ok("d1\thttp://x\tTitle\tBody one.\nd2\tBody two.\r\n\n");
    auto docs = read_corpus(ok);
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].url == "http://x");
    CHECK(docs[1].body == "Body two.");

    std::istringstream dup("d1\t\t\tA.\nd1\t\t\tB.\n");
    CHECK(code_of([&] { read_corpus(dup); }) == ErrorCode::DuplicateId);
    std::istringstream three("d1\tx\tA.\n");
    CHECK(code_of([&] { read_corpus(three); }) == ErrorCode::FormatError);
    std::istringstream empty_id("\t\t\tA.\n");
    CHECK(code_of([&] { read_corpus(empty_id); }) == ErrorCode::FormatError);
}

TEST_CASE("apply_expansions counts unknown passage ids without failing")
{
    std::vector<Passage> ps{{"a#0", "a", 0, "x", {}}, {"b#0", "b", 0, "y", {}}};
    std::istringstream in("a#0\tq1\nzz#0\tlost\na#0\tq1\nb#0\tq2\nzz#0\tlost again\n");
    auto report = apply_expansions(ps, read_expansions(in));
    CHECK(report.attached == 3);
    CHECK(report.unknown_lines == 2);
    CHECK(ps[0].expansion_queries == std::vector<std::string>{"q1", "q1"});
    CHECK(ps[1].expansion_queries == std::vector<std::string>{"q2"});
}

TEST_CASE("segment_corpus output order does not depend on thread count")
{
    std::vector<Document> docs;
    for (int i = 0; i < 200; ++i) {
        docs.push_back({"d" + std::to_string(i), "", "", numbered_sentences(1 + static_cast<std::size_t>(i % 23))});
    }
    CHECK(segment_corpus(docs, 10, 5, 1) == segment_corpus(docs, 10, 5, 8));
}
