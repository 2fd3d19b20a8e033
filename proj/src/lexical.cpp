#include "cascade/lexical.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>

#include "cascade/error.hpp"
#include "cascade/parallel.hpp"
#include "cascade/tsv.hpp"

namespace cascade::lexical {

namespace {

bool is_term_byte(unsigned char c)
{
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::string format_real(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

[[noreturn]] void bad_index(const std::string& what)
{
    throw Error(ErrorCode::FormatError, "index file: " + what);
}

double parse_real(std::string_view s, const char* what)
{
    try {
        std::size_t used = 0;
        double v = std::stod(std::string(s), &used);
        if (used != s.size() || !std::isfinite(v)) {
            bad_index(std::string("bad ") + what);
        }
        return v;
    } catch (const std::logic_error&) {
        bad_index(std::string("bad ") + what);
    }
}

std::uint64_t parse_count(std::string_view s, const char* what)
{
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        bad_index(std::string("bad ") + what);
    }
    return v;
}

using TermCounts = std::vector<std::pair<std::string, std::uint32_t>>;

TermCounts count_terms(std::string_view text, std::uint32_t& length)
{
    auto terms = tokenize(text);
    length = static_cast<std::uint32_t>(terms.size());
    std::sort(terms.begin(), terms.end());
    TermCounts counts;
    for (auto& t : terms) {
        if (!counts.empty() && counts.back().first == t) {
            ++counts.back().second;
        } else {
            counts.emplace_back(std::move(t), 1);
        }
    }
    return counts;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> terms;
    std::string current;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (is_term_byte(c)) {
            current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!current.empty()) {
            terms.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        terms.push_back(std::move(current));
    }
    return terms;
}

double bm25_idf(std::size_t df, std::size_t item_count)
{
    auto n = static_cast<double>(item_count);
    auto d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double bm25_term_weight(std::uint32_t tf, std::size_t df, std::size_t item_count, std::uint32_t length, double avgdl,
                        const Bm25Params& params)
{
    if (tf == 0) {
        return 0.0;
    }
    double f = tf;
    double norm = 1.0 - params.b + params.b * static_cast<double>(length) / avgdl;
    return bm25_idf(df, item_count) * f * (params.k1 + 1.0) / (f + params.k1 * norm);
}

InvertedIndex InvertedIndex::build(std::span<const IndexRecord> records, Bm25Params params, unsigned threads)
{
    std::vector<const IndexRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) {
        sorted.push_back(&r);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->item_id < b->item_id; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i]->item_id == sorted[i - 1]->item_id) {
            throw Error(ErrorCode::DuplicateId, "duplicate item id '" + sorted[i]->item_id + "'");
        }
    }
    for (auto* r : sorted) {
        if (r->item_id.empty() || tsv::has_whitespace(r->item_id)) {
            throw Error(ErrorCode::FormatError, "item id must be non-empty without whitespace: '" + r->item_id + "'");
        }
    }

    InvertedIndex index;
    index.params_ = params;
    index.item_ids_.reserve(sorted.size());
    index.lengths_.resize(sorted.size());
    for (auto* r : sorted) {
        index.item_ids_.push_back(r->item_id);
    }

    std::vector<TermCounts> counts(sorted.size());
    parallel_for(sorted.size(), threads, [&](std::size_t i) { counts[i] = count_terms(sorted[i]->text, index.lengths_[i]); });

    // Items are visited in id order, so every postings list comes out sorted.
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        total += index.lengths_[i];
        for (auto& [term, tf] : counts[i]) {
            index.postings_[term].push_back({static_cast<std::uint32_t>(i), tf});
        }
    }
    index.avgdl_ = sorted.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(sorted.size());
    return index;
}

std::optional<std::uint32_t> InvertedIndex::find_item(std::string_view item_id) const
{
    auto it = std::lower_bound(item_ids_.begin(), item_ids_.end(), item_id,
                               [](const std::string& a, std::string_view b) { return a < b; });
    if (it == item_ids_.end() || *it != item_id) {
        return std::nullopt;
    }
    return static_cast<std::uint32_t>(it - item_ids_.begin());
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const
{
    auto it = postings_.find(std::string(term));
    if (it == postings_.end()) {
        return {};
    }
    return it->second;
}

void InvertedIndex::save(std::ostream& out) const
{
    out << "cascade-bm25-index 1\n";
    out << "N " << item_ids_.size() << " avgdl " << format_real(avgdl_) << " k1 " << format_real(params_.k1) << " b "
        << format_real(params_.b) << '\n';
    out << "items " << item_ids_.size() << '\n';
    for (std::size_t i = 0; i < item_ids_.size(); ++i) {
        out << item_ids_[i] << ' ' << lengths_[i] << '\n';
    }
    std::vector<const std::string*> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, _] : postings_) {
        terms.push_back(&term);
    }
    std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
    out << "terms " << terms.size() << '\n';
    for (auto* term : terms) {
        out << *term;
        for (const auto& p : postings_.at(*term)) {
            out << ' ' << item_ids_[p.item] << ':' << p.tf;
        }
        out << '\n';
    }
}

InvertedIndex InvertedIndex::load(std::istream& in)
{
    std::string line;
    auto next_fields = [&](const char* what) {
        if (!tsv::read_line(in, line)) {
            bad_index(std::string("truncated before ") + what);
        }
        return tsv::split_whitespace(line);
    };

    auto magic = next_fields("magic");
    if (magic.size() != 2 || magic[0] != "cascade-bm25-index" || magic[1] != "1") {
        bad_index("missing 'cascade-bm25-index 1' header");
    }

    InvertedIndex index;
    auto header = next_fields("header");
    if (header.size() != 8 || header[0] != "N" || header[2] != "avgdl" || header[4] != "k1" || header[6] != "b") {
        bad_index("malformed header line");
    }
    auto n = parse_count(header[1], "N");
    index.avgdl_ = parse_real(header[3], "avgdl");
    index.params_.k1 = parse_real(header[5], "k1");
    index.params_.b = parse_real(header[7], "b");

    auto items = next_fields("items");
    if (items.size() != 2 || items[0] != "items" || parse_count(items[1], "item count") != n) {
        bad_index("item count does not match N");
    }
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        auto f = next_fields("item lines");
        if (f.size() != 2) {
            bad_index("malformed item line: " + line);
        }
        std::string id(f[0]);
        if (!index.item_ids_.empty() && !(index.item_ids_.back() < id)) {
            bad_index("item ids not strictly sorted at '" + id + "'");
        }
        auto len = parse_count(f[1], "item length");
        index.item_ids_.push_back(std::move(id));
        index.lengths_.push_back(static_cast<std::uint32_t>(len));
        total += len;
    }
    double expected_avgdl = n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
    if (expected_avgdl != index.avgdl_) {
        bad_index("avgdl does not match item lengths");
    }

    auto terms = next_fields("terms");
    if (terms.size() != 2 || terms[0] != "terms") {
        bad_index("missing terms section");
    }
    auto term_count = parse_count(terms[1], "term count");
    for (std::uint64_t t = 0; t < term_count; ++t) {
        auto f = next_fields("postings");
        if (f.size() < 2) {
            bad_index("postings line without entries: " + line);
        }
        std::vector<Posting> list;
        for (std::size_t j = 1; j < f.size(); ++j) {
            auto colon = f[j].rfind(':');
            if (colon == std::string_view::npos) {
                bad_index("posting without ':' in " + std::string(f[j]));
            }
            auto item = index.find_item(f[j].substr(0, colon));
            if (!item) {
                bad_index("posting references unknown item " + std::string(f[j].substr(0, colon)));
            }
            auto tf = parse_count(f[j].substr(colon + 1), "tf");
            if (tf == 0) {
                bad_index("zero term frequency");
            }
            if (!list.empty() && list.back().item >= *item) {
                bad_index("postings not sorted for term " + std::string(f[0]));
            }
            list.push_back({*item, static_cast<std::uint32_t>(tf)});
        }
        if (!index.postings_.emplace(std::string(f[0]), std::move(list)).second) {
            bad_index("duplicate term " + std::string(f[0]));
        }
    }
    return index;
}

bool operator==(const InvertedIndex& a, const InvertedIndex& b)
{
    return a.item_ids_ == b.item_ids_ && a.lengths_ == b.lengths_ && a.postings_ == b.postings_ &&
           a.avgdl_ == b.avgdl_ && a.params_ == b.params_;
}

double bm25_score(const InvertedIndex& index, std::span<const std::string> query_terms, std::string_view item_id)
{
    auto item = index.find_item(item_id);
    if (!item) {
        throw Error(ErrorCode::UnknownItem, "item '" + std::string(item_id) + "' is not in the index");
    }
    double score = 0.0;
    for (const auto& term : query_terms) {
        auto list = index.postings(term);
        auto it = std::lower_bound(list.begin(), list.end(), *item, [](const Posting& p, std::uint32_t i) { return p.item < i; });
        if (it != list.end() && it->item == *item) {
            score += bm25_term_weight(it->tf, list.size(), index.item_count(), index.length(*item), index.avgdl(), index.params());
        }
    }
    return score;
}

RankedList search_sparse(const InvertedIndex& index, std::string_view query_text, std::size_t k)
{
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    }
    auto terms = tokenize(query_text);
    if (terms.empty()) {
        throw Error(ErrorCode::EmptyQuery, "query '" + std::string(query_text) + "' has no terms");
    }

    std::vector<double> acc(index.item_count(), 0.0);
    std::vector<char> touched(index.item_count(), 0);
    std::vector<std::uint32_t> hits;
    for (const auto& term : terms) {
        auto list = index.postings(term);
        for (const auto& p : list) {
            acc[p.item] += bm25_term_weight(p.tf, list.size(), index.item_count(), index.length(p.item), index.avgdl(), index.params());
            if (!touched[p.item]) {
                touched[p.item] = 1;
                hits.push_back(p.item);
            }
        }
    }

    RankedList out;
    out.reserve(hits.size());
    for (auto item : hits) {
        out.push_back({index.item_ids()[item], acc[item], Stage::Sparse});
    }
    keep_top_k(out, k);
    return out;
}

}  // namespace cascade::lexical
