#include "cascade/corpus.hpp"

#include <unordered_set>

#include "cascade/error.hpp"
#include "cascade/parallel.hpp"
#include "cascade/tsv.hpp"

namespace cascade::corpus {

namespace {

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

void append_field(std::string& out, std::string_view field)
{
    if (field.empty()) {
        return;
    }
    if (!out.empty()) {
        out.push_back(' ');
    }
    out.append(field);
}

}  // namespace

std::vector<SentenceSpan> sentence_spans(std::string_view text)
{
    std::vector<SentenceSpan> spans;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && is_space(text[i])) {
            ++i;
        }
        if (i == n) {
            break;
        }
        std::size_t begin = i;
        std::size_t end = n;
        for (; i < n; ++i) {
            if (is_terminal(text[i]) && (i + 1 == n || is_space(text[i + 1]))) {
                end = i + 1;
                ++i;
                break;
            }
        }
        if (end == n) {
            // No terminator: the sentence runs to the end, minus trailing space.
            while (end > begin && is_space(text[end - 1])) {
                --end;
            }
            i = n;
        }
        spans.push_back({begin, end});
    }
    return spans;
}

std::vector<std::string> split_sentences(std::string_view text)
{
    std::vector<std::string> sentences;
    for (auto span : sentence_spans(text)) {
        sentences.emplace_back(text.substr(span.begin, span.end - span.begin));
    }
    return sentences;
}

std::vector<std::size_t> window_offsets(std::size_t sentence_count, std::size_t window, std::size_t stride)
{
    if (window < 1 || stride < 1 || stride > window) {
        throw Error(ErrorCode::InvalidArgument, "window/stride must satisfy window >= 1 and 1 <= stride <= window (got window=" +
                                                    std::to_string(window) + ", stride=" + std::to_string(stride) + ")");
    }
    std::vector<std::size_t> offsets;
    if (sentence_count == 0) {
        return offsets;
    }
    for (std::size_t start = 0;; start += stride) {
        offsets.push_back(start);
        if (start + window >= sentence_count) {
            break;
        }
    }
    return offsets;
}

std::vector<Passage> segment_document(const Document& doc, std::size_t window, std::size_t stride)
{
    auto spans = sentence_spans(doc.body);
    auto offsets = window_offsets(spans.size(), window, stride);
    if (spans.empty()) {
        throw Error(ErrorCode::EmptyDocument, "document '" + doc.docid + "' has no sentences");
    }

    std::vector<Passage> passages;
    passages.reserve(offsets.size());
    for (std::size_t w = 0; w < offsets.size(); ++w) {
        std::size_t first = offsets[w];
        std::size_t last = std::min(first + window, spans.size()) - 1;
        Passage p;
        p.passage_id = doc.docid + "#" + std::to_string(w);
        p.parent = doc.docid;
        p.sentence_offset = first;
        p.text = doc.body.substr(spans[first].begin, spans[last].end - spans[first].begin);
        passages.push_back(std::move(p));
    }
    return passages;
}

Passage attach_expansions(Passage passage, std::span<const std::string> queries)
{
    passage.expansion_queries.insert(passage.expansion_queries.end(), queries.begin(), queries.end());
    return passage;
}

std::string render_passage_text(const Passage& passage, const Document& parent, bool prepend_meta)
{
    std::string out;
    if (prepend_meta) {
        append_field(out, parent.url);
        append_field(out, parent.title);
    }
    append_field(out, passage.text);
    return out;
}

std::string render_index_text(const Passage& passage, const Document& parent, bool prepend_meta)
{
    std::string out = render_passage_text(passage, parent, prepend_meta);
    for (const auto& q : passage.expansion_queries) {
        append_field(out, q);
    }
    return out;
}

std::vector<Document> read_corpus(std::istream& in)
{
    std::vector<Document> docs;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (tsv::read_line(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        auto fields = tsv::split(line);
        Document doc;
        if (fields.size() == 4) {
            doc = {std::string(fields[0]), std::string(fields[1]), std::string(fields[2]), std::string(fields[3])};
        } else if (fields.size() == 2) {
            doc.docid = std::string(fields[0]);
            doc.body = std::string(fields[1]);
        } else {
            throw Error(ErrorCode::FormatError, "corpus line " + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                                                    std::to_string(fields.size()));
        }
        if (doc.docid.empty() || tsv::has_whitespace(doc.docid)) {
            throw Error(ErrorCode::FormatError, "corpus line " + std::to_string(line_no) + ": docid must be non-empty without whitespace");
        }
        if (!seen.insert(doc.docid).second) {
            throw Error(ErrorCode::DuplicateId, "corpus line " + std::to_string(line_no) + ": duplicate docid '" + doc.docid + "'");
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

ExpansionTable read_expansions(std::istream& in)
{
    ExpansionTable table;
    std::string line;
    std::size_t line_no = 0;
    while (tsv::read_line(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw Error(ErrorCode::FormatError, "expansion line " + std::to_string(line_no) + ": expected passage_id<TAB>query");
        }
        std::string id = line.substr(0, tab);
        auto [it, inserted] = table.queries.try_emplace(id);
        if (inserted) {
            table.key_order.push_back(id);
        }
        it->second.push_back(line.substr(tab + 1));
    }
    return table;
}

ExpansionReport apply_expansions(std::vector<Passage>& passages, const ExpansionTable& table)
{
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        index.emplace(passages[i].passage_id, i);
    }
    ExpansionReport report;
    for (const auto& id : table.key_order) {
        const auto& queries = table.queries.at(id);
        auto it = index.find(id);
        if (it == index.end()) {
            report.unknown_lines += queries.size();
            continue;
        }
        auto& p = passages[it->second];
        p.expansion_queries.insert(p.expansion_queries.end(), queries.begin(), queries.end());
        report.attached += queries.size();
    }
    return report;
}

std::vector<Passage> segment_corpus(std::span<const Document> docs, std::size_t window, std::size_t stride, unsigned threads)
{
    std::vector<std::vector<Passage>> per_doc(docs.size());
    parallel_for(docs.size(), threads, [&](std::size_t i) { per_doc[i] = segment_document(docs[i], window, stride); });
    std::vector<Passage> out;
    for (auto& ps : per_doc) {
        for (auto& p : ps) {
            out.push_back(std::move(p));
        }
    }
    return out;
}

SegmentedCorpus::SegmentedCorpus(std::vector<Document> docs, std::size_t window, std::size_t stride, unsigned threads)
    : documents_(std::move(docs)), passages_(segment_corpus(documents_, window, stride, threads))
{
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        if (!doc_index_.emplace(documents_[i].docid, i).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate docid '" + documents_[i].docid + "'");
        }
    }
    for (std::size_t i = 0; i < passages_.size(); ++i) {
        if (!passage_index_.emplace(passages_[i].passage_id, i).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate passage id '" + passages_[i].passage_id + "'");
        }
    }
}

const Document* SegmentedCorpus::find_document(std::string_view docid) const
{
    auto it = doc_index_.find(std::string(docid));
    return it == doc_index_.end() ? nullptr : &documents_[it->second];
}

const Passage* SegmentedCorpus::find_passage(std::string_view passage_id) const
{
    auto it = passage_index_.find(std::string(passage_id));
    return it == passage_index_.end() ? nullptr : &passages_[it->second];
}

const Document& SegmentedCorpus::parent_of(const Passage& passage) const
{
    return documents_[doc_index_.at(passage.parent)];
}

}  // namespace cascade::corpus
