#pragma once

#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cascade::corpus {

inline constexpr std::size_t kDefaultWindow = 10;
inline constexpr std::size_t kDefaultStride = 5;

struct Document {
    std::string docid;
    std::string url;
    std::string title;
    std::string body;
};

struct Passage {
    std::string passage_id;  // "{docid}#{window_index}"
    std::string parent;
    std::size_t sentence_offset = 0;
    std::string text;
    std::vector<std::string> expansion_queries;

    friend bool operator==(const Passage&, const Passage&) = default;
};

/// Byte range [begin, end) of one sentence inside the source text.
struct SentenceSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// A sentence ends after '.', '!' or '?' when the next character is
/// whitespace or the end of the text. Leading whitespace is a separator and
/// belongs to no sentence. There is no abbreviation handling, so "e.g. x"
/// splits after "e.g.".
std::vector<SentenceSpan> sentence_spans(std::string_view text);
std::vector<std::string> split_sentences(std::string_view text);

/// Start offsets of the sliding windows over `sentence_count` sentences:
/// 0, stride, 2*stride, ... stopping after the first window that reaches the
/// last sentence. Throws InvalidArgument unless 1 <= stride <= window.
std::vector<std::size_t> window_offsets(std::size_t sentence_count, std::size_t window, std::size_t stride);

/// Throws EmptyDocument when the body has no sentences.
std::vector<Passage> segment_document(const Document& doc, std::size_t window = kDefaultWindow,
                                      std::size_t stride = kDefaultStride);

/// Appends `queries` in order. Duplicates are kept.
Passage attach_expansions(Passage passage, std::span<const std::string> queries);

/// "{url} {title} {text} {q1} ... {qn}" with empty fields skipped. Without
/// `prepend_meta` the url and title are left out.
std::string render_index_text(const Passage& passage, const Document& parent, bool prepend_meta);

/// Same as render_index_text but without the expansion queries; this is the
/// text re-rankers see.
std::string render_passage_text(const Passage& passage, const Document& parent, bool prepend_meta);

/// Corpus lines: docid \t url \t title \t body. A two-field line
/// (docid \t body) is accepted for passage collections. Docids must be
/// unique and whitespace-free.
std::vector<Document> read_corpus(std::istream& in);

/// Expansion lines: passage_id \t query. Queries keep file order per id.
struct ExpansionTable {
    std::unordered_map<std::string, std::vector<std::string>> queries;
    std::vector<std::string> key_order;
};

ExpansionTable read_expansions(std::istream& in);

struct ExpansionReport {
    std::size_t attached = 0;       // queries appended to some passage
    std::size_t unknown_lines = 0;  // queries whose passage id is not in the corpus
};

ExpansionReport apply_expansions(std::vector<Passage>& passages, const ExpansionTable& table);

/// Segments every document. Output follows input order whatever `threads` is.
std::vector<Passage> segment_corpus(std::span<const Document> docs, std::size_t window, std::size_t stride,
                                    unsigned threads = 1);

/// Documents plus their passages with id lookups.
class SegmentedCorpus {
  public:
    SegmentedCorpus(std::vector<Document> docs, std::size_t window, std::size_t stride, unsigned threads = 1);

    const std::vector<Document>& documents() const { return documents_; }
    const std::vector<Passage>& passages() const { return passages_; }
    std::vector<Passage>& passages() { return passages_; }

    const Document* find_document(std::string_view docid) const;
    const Passage* find_passage(std::string_view passage_id) const;
    const Document& parent_of(const Passage& passage) const;

  private:
    std::vector<Document> documents_;
    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::size_t> doc_index_;
    std::unordered_map<std::string, std::size_t> passage_index_;
};

}  // namespace cascade::corpus
