#include "cascade/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "cascade/error.hpp"
#include "cascade/parallel.hpp"
#include "cascade/tsv.hpp"

namespace cascade::pipeline {

namespace {

[[noreturn]] void config_error(const std::string& what)
{
    throw Error(ErrorCode::ConfigError, what);
}

std::size_t retrieval_depth(const PipelineConfig& cfg)
{
    switch (cfg.mode) {
    case RetrievalMode::Sparse: return cfg.k_sparse;
    case RetrievalMode::Dense: return cfg.k_dense;
    case RetrievalMode::Hybrid: return std::max(cfg.k_sparse, cfg.k_dense);
    }
    return cfg.k_sparse;
}

std::ifstream open_input(const std::string& path, const char* what)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, std::string("cannot open ") + what + " '" + path + "'");
    }
    return in;
}

[[noreturn]] void stage_failure(const char* stage, std::string_view query, std::size_t batch, const Error& cause)
{
    throw Error(ErrorCode::StageFailure, std::string(stage) + " stage failed for query '" + std::string(query) + "' (" +
                                             std::to_string(batch) + " items in batch): " + cause.what());
}

}  // namespace

RankedList fuse_rrf(std::span<const RankedList> lists, double c, std::size_t k)
{
    if (!(c > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "RRF constant must be > 0");
    }
    std::map<std::string, double> acc;
    for (const auto& list : lists) {
        std::unordered_set<std::string_view> seen;
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (seen.insert(list[i].item_id).second) {
                acc[list[i].item_id] += 1.0 / (c + static_cast<double>(i + 1));
            }
        }
    }
    RankedList out;
    out.reserve(acc.size());
    for (auto& [id, score] : acc) {
        out.push_back({id, score, Stage::Fused});
    }
    keep_top_k(out, k);
    return out;
}

RankedList fuse_union(std::span<const RankedList> lists, std::size_t k)
{
    std::map<std::string, std::size_t> best;
    for (const auto& list : lists) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            auto [it, inserted] = best.try_emplace(list[i].item_id, i + 1);
            if (!inserted) {
                it->second = std::min(it->second, i + 1);
            }
        }
    }
    RankedList out;
    out.reserve(best.size());
    for (auto& [id, rank] : best) {
        out.push_back({id, 1.0 / static_cast<double>(rank), Stage::Fused});
    }
    keep_top_k(out, k);
    return out;
}

RankedList mono_rerank(std::string_view query, const RankedList& candidates, const TextLookup& texts,
                       scoring::Scorer& scorer, std::size_t depth)
{
    if (depth == 0) {
        throw Error(ErrorCode::InvalidArgument, "mono depth must be >= 1");
    }
    std::size_t n = std::min(depth, candidates.size());
    std::vector<std::string> docs;
    docs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        docs.push_back(texts(candidates[i].item_id));
    }
    std::vector<double> scores;
    try {
        scores = scorer.score_mono(query, docs);
    } catch (const Error& e) {
        stage_failure("mono", query, n, e);
    }
    if (scores.size() != n) {
        throw Error(ErrorCode::StageFailure, "mono scorer returned " + std::to_string(scores.size()) + " scores for " +
                                                 std::to_string(n) + " candidates");
    }
    RankedList out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({candidates[i].item_id, scores[i], Stage::Mono});
    }
    sort_ranked(out);
    return out;
}

PairMatrix::PairMatrix(std::vector<std::string> ids) : ids_(std::move(ids)), p_(ids_.size() * ids_.size(), 0.0) {}

void PairMatrix::set(std::size_t i, std::size_t j, double value)
{
    if (!(value >= 0.0 && value <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "pairwise preference outside [0,1]");
    }
    p_[i * ids_.size() + j] = value;
}

PairMatrix build_pair_matrix(std::string_view query, std::vector<std::string> ids, const TextLookup& texts,
                             scoring::Scorer& scorer)
{
    PairMatrix matrix(std::move(ids));
    const auto m = matrix.size();
    std::vector<std::string> docs;
    docs.reserve(m);
    for (const auto& id : matrix.ids()) {
        docs.push_back(texts(id));
    }
    std::vector<scoring::DocPair> pairs;
    pairs.reserve(m * (m - (m > 0 ? 1 : 0)));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i != j) {
                pairs.emplace_back(docs[i], docs[j]);
            }
        }
    }
    std::vector<double> prefs;
    try {
        prefs = scorer.score_duo(query, pairs);
    } catch (const Error& e) {
        stage_failure("duo", query, pairs.size(), e);
    }
    if (prefs.size() != pairs.size()) {
        throw Error(ErrorCode::StageFailure, "duo scorer returned " + std::to_string(prefs.size()) + " scores for " +
                                                 std::to_string(pairs.size()) + " pairs");
    }
    std::size_t next = 0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i != j) {
                matrix.set(i, j, prefs[next++]);
            }
        }
    }
    return matrix;
}

std::vector<double> aggregate(const PairMatrix& matrix, DuoAggregation method)
{
    const auto m = matrix.size();
    std::vector<double> s(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) {
                continue;
            }
            s[i] += method == DuoAggregation::Sum ? matrix.at(i, j) : matrix.at(i, j) + (1.0 - matrix.at(j, i));
        }
    }
    return s;
}

RankedList duo_rerank(std::string_view query, const RankedList& candidates, const TextLookup& texts,
                      scoring::Scorer& scorer, std::size_t m, DuoAggregation method)
{
    if (m < 2) {
        throw Error(ErrorCode::InvalidArgument, "duo depth must be >= 2");
    }
    std::size_t head = std::min(m, candidates.size());
    std::vector<std::string> ids;
    ids.reserve(head);
    for (std::size_t i = 0; i < head; ++i) {
        ids.push_back(candidates[i].item_id);
    }
    auto matrix = build_pair_matrix(query, std::move(ids), texts, scorer);
    auto s = aggregate(matrix, method);

    double base = 0.0;
    if (head < candidates.size()) {
        double tail_max = candidates[head].score;
        for (std::size_t i = head; i < candidates.size(); ++i) {
            tail_max = std::max(tail_max, candidates[i].score);
        }
        base = std::max(0.0, tail_max) + 1.0;
    }

    RankedList out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < head; ++i) {
        out.push_back({candidates[i].item_id, base + s[i], Stage::Duo});
    }
    sort_ranked(out);
    for (std::size_t i = head; i < candidates.size(); ++i) {
        out.push_back(candidates[i]);
    }
    return out;
}

eval::Run ensemble_fuse(std::span<const eval::Run> runs, EnsembleMethod method, std::string tag, double c, std::size_t depth)
{
    if (runs.empty()) {
        throw Error(ErrorCode::ConfigError, "ensemble needs at least one run");
    }
    std::set<std::string> qids;
    for (const auto& r : runs) {
        for (const auto& [qid, _] : r.queries) {
            qids.insert(qid);
        }
    }
    std::map<std::string, RankedList> fused;
    for (const auto& qid : qids) {
        if (method == EnsembleMethod::Rrf) {
            std::vector<RankedList> lists;
            for (const auto& r : runs) {
                if (auto it = r.queries.find(qid); it != r.queries.end()) {
                    lists.push_back(eval::to_ranked_list(it->second, Stage::Ensemble));
                }
            }
            auto list = fuse_rrf(lists, c, depth);
            for (auto& cand : list) {
                cand.stage = Stage::Ensemble;
            }
            fused[qid] = std::move(list);
            continue;
        }
        std::map<std::string, std::pair<double, std::size_t>> acc;
        for (const auto& r : runs) {
            auto it = r.queries.find(qid);
            if (it == r.queries.end() || it->second.empty()) {
                continue;
            }
            const auto& entries = it->second;
            auto [lo, hi] = std::minmax_element(entries.begin(), entries.end(),
                                                [](const auto& a, const auto& b) { return a.score < b.score; });
            double min = lo->score;
            double range = hi->score - min;
            for (const auto& e : entries) {
                double norm = range > 0.0 ? (e.score - min) / range : 1.0;
                auto& slot = acc[e.item_id];
                slot.first += norm;
                slot.second += 1;
            }
        }
        RankedList list;
        list.reserve(acc.size());
        for (auto& [id, sum_count] : acc) {
            list.push_back({id, sum_count.first / static_cast<double>(sum_count.second), Stage::Ensemble});
        }
        keep_top_k(list, depth);
        fused[qid] = std::move(list);
    }
    return eval::make_run(fused, std::move(tag));
}

void validate(const PipelineConfig& cfg, bool require_paths)
{
    if (require_paths) {
        if (cfg.corpus_path.empty()) {
            config_error("missing required path 'corpus'");
        }
        if (cfg.queries_path.empty()) {
            config_error("missing required path 'queries'");
        }
        if (cfg.mode != RetrievalMode::Sparse) {
            if (cfg.doc_embeddings_path.empty()) {
                config_error("dense retrieval needs 'doc_embeddings'");
            }
            if (cfg.query_embeddings_path.empty()) {
                config_error("dense retrieval needs 'query_embeddings'");
            }
        }
    }
    if (cfg.window < 1 || cfg.stride < 1 || cfg.stride > cfg.window) {
        config_error("segment window/stride must satisfy 1 <= stride <= window");
    }
    if (!(cfg.bm25.k1 >= 0.0) || !(cfg.bm25.b >= 0.0 && cfg.bm25.b <= 1.0)) {
        config_error("bm25 needs k1 >= 0 and 0 <= b <= 1");
    }
    if (cfg.k_sparse < 1 || cfg.k_dense < 1 || cfg.output_depth < 1 || cfg.mono_depth < 1 || cfg.duo_depth < 1) {
        config_error("all depths must be >= 1");
    }
    if (!(cfg.rrf_c > 0.0)) {
        config_error("fusion constant c must be > 0");
    }
    if (cfg.threads < 1) {
        config_error("threads must be >= 1");
    }
    if (cfg.tag.empty() || tsv::has_whitespace(cfg.tag)) {
        config_error("run tag must be non-empty without whitespace");
    }
    auto depth = retrieval_depth(cfg);
    if (cfg.mono_enabled && cfg.mono_depth > depth) {
        config_error("mono depth " + std::to_string(cfg.mono_depth) + " exceeds retrieval depth " + std::to_string(depth));
    }
    if (cfg.duo_enabled) {
        if (cfg.duo_depth < 2) {
            config_error("duo depth must be >= 2");
        }
        auto limit = cfg.mono_enabled ? cfg.mono_depth : depth;
        if (cfg.duo_depth > limit) {
            config_error("duo depth " + std::to_string(cfg.duo_depth) + " exceeds " + (cfg.mono_enabled ? "mono" : "retrieval") +
                         " depth " + std::to_string(limit));
        }
    }
    for (const auto* spec : {&cfg.mono_scorer, &cfg.duo_scorer}) {
        if (spec->kind == scoring::ScorerKind::External && spec->endpoint.empty()) {
            config_error("external scorer requires an endpoint");
        }
    }
}

std::vector<Query> read_queries(std::istream& in)
{
    std::vector<Query> queries;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (tsv::read_line(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw Error(ErrorCode::FormatError, "queries line " + std::to_string(line_no) + ": expected query_id<TAB>text");
        }
        Query q{line.substr(0, tab), line.substr(tab + 1)};
        if (tsv::has_whitespace(q.id)) {
            throw Error(ErrorCode::FormatError, "queries line " + std::to_string(line_no) + ": query id contains whitespace");
        }
        if (!seen.insert(q.id).second) {
            throw Error(ErrorCode::DuplicateId, "queries line " + std::to_string(line_no) + ": duplicate query id '" + q.id + "'");
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

PipelineInputs load_inputs(const PipelineConfig& cfg)
{
    validate(cfg, true);
    PipelineInputs inputs;
    {
        auto in = open_input(cfg.corpus_path, "corpus");
        inputs.documents = corpus::read_corpus(in);
    }
    if (!cfg.expansions_path.empty()) {
        auto in = open_input(cfg.expansions_path, "expansions");
        inputs.expansions = corpus::read_expansions(in);
    }
    {
        auto in = open_input(cfg.queries_path, "queries");
        inputs.queries = read_queries(in);
    }
    if (cfg.mode != RetrievalMode::Sparse) {
        inputs.doc_embeddings = dense::load_embedding_store(cfg.doc_embeddings_path);
        inputs.query_embeddings = dense::load_embedding_store(cfg.query_embeddings_path);
    }
    for (const auto& path : cfg.ensemble_runs) {
        auto in = open_input(path, "ensemble run");
        inputs.ensemble_runs.push_back(eval::parse_run(in));
    }
    return inputs;
}

RankedList collapse_to_documents(const RankedList& passages)
{
    RankedList out;
    std::unordered_set<std::string> seen;
    for (const auto& c : passages) {
        auto hash = c.item_id.rfind('#');
        std::string docid = hash == std::string::npos ? c.item_id : c.item_id.substr(0, hash);
        if (seen.insert(docid).second) {
            out.push_back({std::move(docid), c.score, c.stage});
        }
    }
    sort_ranked(out);
    return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineInputs& inputs)
{
    validate(cfg, false);
    PipelineResult result;

    corpus::SegmentedCorpus corpus(inputs.documents, cfg.window, cfg.stride, cfg.threads);
    auto expansion = corpus::apply_expansions(corpus.passages(), inputs.expansions);
    if (expansion.unknown_lines > 0) {
        result.warnings.push_back(std::to_string(expansion.unknown_lines) + " expansion queries reference unknown passage ids");
    }

    const bool use_sparse = cfg.mode != RetrievalMode::Dense;
    const bool use_dense = cfg.mode != RetrievalMode::Sparse;

    lexical::InvertedIndex index;
    if (use_sparse) {
        std::vector<lexical::IndexRecord> records;
        records.reserve(corpus.passages().size());
        for (const auto& p : corpus.passages()) {
            records.push_back({p.passage_id, corpus::render_index_text(p, corpus.parent_of(p), cfg.prepend_meta)});
        }
        index = lexical::InvertedIndex::build(records, cfg.bm25, cfg.threads);
    }
    if (use_dense) {
        if (!inputs.doc_embeddings || !inputs.query_embeddings) {
            throw Error(ErrorCode::ConfigError, "dense retrieval needs document and query embeddings");
        }
        for (const auto& [id, _] : inputs.doc_embeddings->items()) {
            if (corpus.find_passage(id) == nullptr) {
                throw Error(ErrorCode::FormatError, "embedding item '" + id + "' is not a passage id of the corpus");
            }
        }
    }

    TextLookup texts = [&](const std::string& id) {
        const auto* p = corpus.find_passage(id);
        if (p == nullptr) {
            throw Error(ErrorCode::UnknownItem, "no passage text for '" + id + "'");
        }
        return corpus::render_passage_text(*p, corpus.parent_of(*p), cfg.prepend_meta);
    };

    std::unique_ptr<scoring::Scorer> mono;
    std::unique_ptr<scoring::Scorer> duo;
    if (cfg.mono_enabled) {
        mono = scoring::make_scorer(cfg.mono_scorer);
    }
    if (cfg.duo_enabled) {
        duo = scoring::make_scorer(cfg.duo_scorer);
    }

    const auto fused_depth = retrieval_depth(cfg);
    std::vector<RankedList> per_query(inputs.queries.size());
    std::vector<std::string> query_warnings(inputs.queries.size());

    parallel_for(inputs.queries.size(), cfg.threads, [&](std::size_t qi) {
        const auto& q = inputs.queries[qi];
        std::vector<RankedList> lists;
        if (use_sparse) {
            try {
                lists.push_back(lexical::search_sparse(index, q.text, cfg.k_sparse));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptyQuery) {
                    throw;
                }
                query_warnings[qi] = "query '" + q.id + "' has no terms; sparse list is empty";
                lists.emplace_back();
            }
        }
        if (use_dense) {
            const auto* qm = inputs.query_embeddings->find(q.id);
            if (qm == nullptr) {
                throw Error(ErrorCode::UnknownItem, "no query embedding for query '" + q.id + "'");
            }
            lists.push_back(dense::search_dense(*qm, *inputs.doc_embeddings, cfg.k_dense));
        }

        RankedList list;
        if (lists.size() == 1) {
            list = std::move(lists.front());
        } else if (cfg.fusion == FusionMethod::Rrf) {
            list = fuse_rrf(lists, cfg.rrf_c, fused_depth);
        } else {
            list = fuse_union(lists, fused_depth);
        }

        if (mono) {
            list = mono_rerank(q.text, list, texts, *mono, cfg.mono_depth);
        }
        if (duo) {
            list = duo_rerank(q.text, list, texts, *duo, cfg.duo_depth, cfg.duo_method);
        }
        if (cfg.level == OutputLevel::Document) {
            list = collapse_to_documents(list);
        }
        if (list.size() > cfg.output_depth) {
            list.resize(cfg.output_depth);
        }
        per_query[qi] = std::move(list);
    });

    for (auto& w : query_warnings) {
        if (!w.empty()) {
            result.warnings.push_back(std::move(w));
        }
    }

    std::map<std::string, RankedList> lists;
    for (std::size_t qi = 0; qi < inputs.queries.size(); ++qi) {
        lists.emplace(inputs.queries[qi].id, std::move(per_query[qi]));
    }
    result.run = eval::make_run(lists, cfg.tag);

    if (!inputs.ensemble_runs.empty()) {
        std::vector<eval::Run> members;
        members.push_back(std::move(result.run));
        members.insert(members.end(), inputs.ensemble_runs.begin(), inputs.ensemble_runs.end());
        result.run = ensemble_fuse(members, cfg.ensemble_method, cfg.tag, cfg.rrf_c, cfg.output_depth);
    }
    return result;
}

PipelineResult run_pipeline(const PipelineConfig& cfg)
{
    auto inputs = load_inputs(cfg);
    return run_pipeline(cfg, inputs);
}

}  // namespace cascade::pipeline
