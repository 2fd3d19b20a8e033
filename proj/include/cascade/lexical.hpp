#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cascade/ranking.hpp"

namespace cascade::lexical {

/// Lowercases ASCII and splits on every byte that is not an ASCII letter or
/// digit. Bytes >= 0x80 are kept inside terms so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;

    friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

struct Posting {
    std::uint32_t item = 0;  // index into InvertedIndex::item_ids()
    std::uint32_t tf = 0;

    friend bool operator==(const Posting&, const Posting&) = default;
};

struct IndexRecord {
    std::string item_id;
    std::string text;
};

/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
double bm25_idf(std::size_t df, std::size_t item_count);

/// Contribution of one query term occurrence to one item.
double bm25_term_weight(std::uint32_t tf, std::size_t df, std::size_t item_count, std::uint32_t length, double avgdl,
                        const Bm25Params& params);

/// Immutable term -> postings map. Item ids are stored sorted, so postings
/// ordered by item index are also ordered by item id.
class InvertedIndex {
  public:
    InvertedIndex() = default;

    /// Throws DuplicateId if two records share an id. The result does not
    /// depend on record order or on `threads`.
    static InvertedIndex build(std::span<const IndexRecord> records, Bm25Params params = {}, unsigned threads = 1);

    std::size_t item_count() const { return item_ids_.size(); }
    double avgdl() const { return avgdl_; }
    const Bm25Params& params() const { return params_; }
    const std::vector<std::string>& item_ids() const { return item_ids_; }
    std::uint32_t length(std::uint32_t item) const { return lengths_[item]; }

    std::optional<std::uint32_t> find_item(std::string_view item_id) const;
    std::span<const Posting> postings(std::string_view term) const;
    std::size_t df(std::string_view term) const { return postings(term).size(); }
    std::size_t term_count() const { return postings_.size(); }

    /// Text format:
    ///   cascade-bm25-index 1
    ///   N <items> avgdl <real> k1 <real> b <real>
    ///   items <count>            followed by "<item_id> <length>" lines
    ///   terms <count>            followed by "<term> <item_id>:<tf> ..." lines
    /// Terms are written in byte order; reals use 17 significant digits.
    void save(std::ostream& out) const;
    static InvertedIndex load(std::istream& in);

    friend bool operator==(const InvertedIndex& a, const InvertedIndex& b);

  private:
    std::vector<std::string> item_ids_;
    std::vector<std::uint32_t> lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avgdl_ = 0.0;
    Bm25Params params_;
};

/// BM25 of one item for the given query terms (duplicates count once per
/// occurrence). Throws UnknownItem if the item is not indexed.
double bm25_score(const InvertedIndex& index, std::span<const std::string> query_terms, std::string_view item_id);

/// Exhaustive top-k over every item that contains at least one query term.
/// Throws EmptyQuery when the query has no terms, InvalidArgument when k == 0.
RankedList search_sparse(const InvertedIndex& index, std::string_view query_text, std::size_t k);

}  // namespace cascade::lexical
