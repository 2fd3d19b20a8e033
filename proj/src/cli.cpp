#include "cascade/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "cascade/config.hpp"
#include "cascade/corpus.hpp"
#include "cascade/dense.hpp"
#include "cascade/error.hpp"
#include "cascade/eval.hpp"
#include "cascade/lexical.hpp"
#include "cascade/parallel.hpp"
#include "cascade/pipeline.hpp"
#include "cascade/scoring.hpp"

namespace cascade::cli {

namespace {

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    }
    return in;
}

/// Writes to `path`, or to `out` when the path is empty or "-".
void emit(const std::string& path, const std::string& data, std::ostream& out)
{
    if (path.empty() || path == "-") {
        out << data;
        return;
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file || !(file << data) || !file.flush()) {
        throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    }
}

std::vector<corpus::Document> load_documents(const std::string& path)
{
    auto in = open_in(path);
    return corpus::read_corpus(in);
}

std::string run_text(const eval::Run& run)
{
    std::ostringstream s;
    eval::write_run(run, s);
    return s.str();
}

eval::Run load_run(const std::string& path)
{
    auto in = open_in(path);
    return eval::parse_run(in);
}

struct SegmentArgs {
    std::string corpus;
    std::size_t window = corpus::kDefaultWindow;
    std::size_t stride = corpus::kDefaultStride;
    unsigned threads = 1;
    std::string out;
};

struct ExpandArgs {
    std::string corpus;
    std::string expansions;
    std::size_t window = corpus::kDefaultWindow;
    std::size_t stride = corpus::kDefaultStride;
    bool no_meta = false;
    unsigned threads = 1;
    std::string out;
};

struct IndexArgs {
    std::string in;
    std::string out;
    double k1 = 0.9;
    double b = 0.4;
    unsigned threads = 1;
};

struct SearchArgs {
    std::string index;
    std::string queries;
    std::string mode = "sparse";
    std::size_t k = 1000;
    std::string doc_embeddings;
    std::string query_embeddings;
    double c = pipeline::kDefaultRrfC;
    std::string tag = "cascade";
    unsigned threads = 1;
    std::string out;
};

struct RerankArgs {
    std::string stage = "mono";
    std::string scorer = "builtin";
    std::string endpoint;
    std::size_t timeout_ms = 30'000;
    std::string in;
    std::string out;
    std::string corpus;
    std::string queries;
    std::size_t window = corpus::kDefaultWindow;
    std::size_t stride = corpus::kDefaultStride;
    bool no_meta = false;
    std::size_t depth = 0;
    std::string method = "sym-sum";
    std::string tag;
    unsigned threads = 1;
};

struct FuseArgs {
    std::string method = "rrf";
    std::vector<std::string> in;
    double c = pipeline::kDefaultRrfC;
    std::size_t depth = 1000;
    std::string tag = "fused";
    std::string out;
};

struct EvalArgs {
    std::vector<std::string> runs;
    std::string qrels;
    int threshold = eval::kDefaultRelevanceThreshold;
    std::string gain = "linear";
    bool machine = false;
};

struct PipelineArgs {
    std::string config;
    std::string out;
    std::string tag;
    unsigned threads = 0;
};

int do_segment(const SegmentArgs& a, std::ostream& out)
{
    auto docs = load_documents(a.corpus);
    auto passages = corpus::segment_corpus(docs, a.window, a.stride, a.threads);
    std::ostringstream s;
    for (const auto& p : passages) {
        s << p.passage_id << '\t' << p.parent << '\t' << p.sentence_offset << '\t' << p.text << '\n';
    }
    emit(a.out, s.str(), out);
    return 0;
}

int do_expand(const ExpandArgs& a, std::ostream& out, std::ostream& err)
{
    corpus::SegmentedCorpus corpus(load_documents(a.corpus), a.window, a.stride, a.threads);
    corpus::ExpansionReport report;
    if (!a.expansions.empty()) {
        auto in = open_in(a.expansions);
        report = corpus::apply_expansions(corpus.passages(), corpus::read_expansions(in));
    }
    std::ostringstream s;
    for (const auto& p : corpus.passages()) {
        s << p.passage_id << '\t' << corpus::render_index_text(p, corpus.parent_of(p), !a.no_meta) << '\n';
    }
    emit(a.out, s.str(), out);
    err << "attached " << report.attached << " expansion queries; " << report.unknown_lines << " reference unknown passage ids\n";
    return 0;
}

int do_index(const IndexArgs& a, std::ostream& out)
{
    auto in = open_in(a.in);
    std::vector<lexical::IndexRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorCode::FormatError, "index input line " + std::to_string(line_no) + ": expected item_id<TAB>text");
        }
        records.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    auto index = lexical::InvertedIndex::build(records, {a.k1, a.b}, a.threads);
    std::ostringstream s;
    index.save(s);
    emit(a.out, s.str(), out);
    return 0;
}

int do_embed_check(const std::string& path, std::ostream& out)
{
    auto store = dense::load_embedding_store(path);
    std::size_t tokens = 0;
    for (const auto& [_, m] : store.items()) {
        tokens += m.rows();
    }
    out << "items " << store.size() << " dim " << store.dim() << " tokens " << tokens << '\n';
    return 0;
}

int do_search(const SearchArgs& a, std::ostream& out, std::ostream& err)
{
    bool sparse = a.mode != "dense";
    bool dense_mode = a.mode != "sparse";
    std::vector<pipeline::Query> queries;
    {
        auto in = open_in(a.queries);
        queries = pipeline::read_queries(in);
    }
    lexical::InvertedIndex index;
    if (sparse) {
        if (a.index.empty()) {
            throw Error(ErrorCode::ConfigError, "--index is required for sparse and hybrid search");
        }
        auto in = open_in(a.index);
        index = lexical::InvertedIndex::load(in);
    }
    dense::EmbeddingStore docs;
    dense::EmbeddingStore qstore;
    if (dense_mode) {
        if (a.doc_embeddings.empty() || a.query_embeddings.empty()) {
            throw Error(ErrorCode::ConfigError, "--doc-embeddings and --query-embeddings are required for dense and hybrid search");
        }
        docs = dense::load_embedding_store(a.doc_embeddings);
        qstore = dense::load_embedding_store(a.query_embeddings);
    }

    std::vector<RankedList> results(queries.size());
    std::vector<std::string> skipped(queries.size());
    parallel_for(queries.size(), a.threads, [&](std::size_t i) {
        std::vector<RankedList> lists;
        if (sparse) {
            try {
                lists.push_back(lexical::search_sparse(index, queries[i].text, a.k));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptyQuery) {
                    throw;
                }
                skipped[i] = queries[i].id;
                lists.emplace_back();
            }
        }
        if (dense_mode) {
            const auto* qm = qstore.find(queries[i].id);
            if (qm == nullptr) {
                throw Error(ErrorCode::UnknownItem, "no query embedding for '" + queries[i].id + "'");
            }
            lists.push_back(dense::search_dense(*qm, docs, a.k));
        }
        results[i] = lists.size() == 1 ? std::move(lists.front()) : pipeline::fuse_rrf(lists, a.c, a.k);
    });

    std::map<std::string, RankedList> by_query;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        by_query.emplace(queries[i].id, std::move(results[i]));
        if (!skipped[i].empty()) {
            err << "warning: query '" << skipped[i] << "' has no terms\n";
        }
    }
    emit(a.out, run_text(eval::make_run(by_query, a.tag)), out);
    return 0;
}

int do_rerank(const RerankArgs& a, std::ostream& out)
{
    corpus::SegmentedCorpus corpus(load_documents(a.corpus), a.window, a.stride, a.threads);
    std::map<std::string, std::string> query_text;
    {
        auto in = open_in(a.queries);
        for (auto& q : pipeline::read_queries(in)) {
            query_text.emplace(q.id, q.text);
        }
    }
    auto input = load_run(a.in);

    pipeline::TextLookup texts = [&](const std::string& id) {
        if (const auto* p = corpus.find_passage(id)) {
            return corpus::render_passage_text(*p, corpus.parent_of(*p), !a.no_meta);
        }
        if (const auto* d = corpus.find_document(id)) {
            corpus::Passage whole{d->docid, d->docid, 0, d->body, {}};
            return corpus::render_passage_text(whole, *d, !a.no_meta);
        }
        throw Error(ErrorCode::UnknownItem, "run item '" + id + "' is neither a passage nor a document of the corpus");
    };

    scoring::ScorerSpec spec;
    spec.kind = a.scorer == "external" ? scoring::ScorerKind::External : scoring::ScorerKind::BuiltinOverlap;
    spec.endpoint = a.endpoint;
    spec.timeout = std::chrono::milliseconds(a.timeout_ms);
    auto scorer = scoring::make_scorer(spec);
    auto method = a.method == "sum" ? pipeline::DuoAggregation::Sum : pipeline::DuoAggregation::SymSum;
    bool duo = a.stage == "duo";
    std::size_t depth = a.depth != 0 ? a.depth : (duo ? 50 : 100);

    std::vector<std::pair<std::string, const std::vector<eval::RunEntry>*>> work;
    for (const auto& [qid, entries] : input.queries) {
        if (!query_text.count(qid)) {
            throw Error(ErrorCode::UnknownItem, "run query '" + qid + "' is not in the queries file");
        }
        work.emplace_back(qid, &entries);
    }
    std::vector<RankedList> results(work.size());
    parallel_for(work.size(), a.threads, [&](std::size_t i) {
        auto list = eval::to_ranked_list(*work[i].second, Stage::Fused);
        const auto& q = query_text.at(work[i].first);
        results[i] = duo ? pipeline::duo_rerank(q, list, texts, *scorer, depth, method)
                         : pipeline::mono_rerank(q, list, texts, *scorer, depth);
    });
    std::map<std::string, RankedList> by_query;
    for (std::size_t i = 0; i < work.size(); ++i) {
        by_query.emplace(work[i].first, std::move(results[i]));
    }
    emit(a.out, run_text(eval::make_run(by_query, a.tag.empty() ? input.tag : a.tag)), out);
    return 0;
}

int do_fuse(const FuseArgs& a, std::ostream& out)
{
    std::vector<eval::Run> runs;
    for (const auto& path : a.in) {
        runs.push_back(load_run(path));
    }
    auto method = a.method == "mean" ? pipeline::EnsembleMethod::MeanNormalized : pipeline::EnsembleMethod::Rrf;
    emit(a.out, run_text(pipeline::ensemble_fuse(runs, method, a.tag, a.c, a.depth)), out);
    return 0;
}

int do_eval(const EvalArgs& a, std::ostream& out, std::ostream& err)
{
    eval::Qrels qrels;
    {
        auto in = open_in(a.qrels);
        qrels = eval::parse_qrels(in);
    }
    eval::EvalOptions options;
    options.threshold = a.threshold;
    options.gain = a.gain == "exp" ? eval::Gain::Exponential : eval::Gain::Linear;
    std::vector<eval::MetricsReport> reports;
    for (const auto& path : a.runs) {
        reports.push_back(eval::evaluate_run(load_run(path), qrels, options));
        for (const auto& w : reports.back().warnings) {
            err << "warning: " << w << '\n';
        }
    }
    if (a.machine) {
        for (const auto& r : reports) {
            out << eval::format_machine(r);
        }
    } else {
        out << eval::format_table(reports);
    }
    for (std::size_t i = 1; i < reports.size(); ++i) {
        out << '\n' << eval::format_comparison(reports[0], reports[i]);
    }
    return 0;
}

int do_pipeline(const PipelineArgs& a, std::ostream& out, std::ostream& err)
{
    auto cfg = config::load_config(a.config);
    if (a.threads != 0) {
        cfg.threads = a.threads;
    }
    if (!a.tag.empty()) {
        cfg.tag = a.tag;
    }
    pipeline::validate(cfg, true);
    auto result = pipeline::run_pipeline(cfg);
    for (const auto& w : result.warnings) {
        err << "warning: " << w << '\n';
    }
    emit(a.out, run_text(result.run), out);
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Multi-stage retrieval and ranking: segment, index, search, re-rank, fuse, evaluate.", "cascade"};
    app.require_subcommand(1, 1);

    SegmentArgs seg;
    auto* segment = app.add_subcommand("segment", "Split documents into sliding-window passages");
    segment->add_option("--corpus", seg.corpus, "Corpus TSV (docid, url, title, body)")->required();
    segment->add_option("--window", seg.window, "Sentences per passage")->capture_default_str();
    segment->add_option("--stride", seg.stride, "Sentences between window starts")->capture_default_str();
    segment->add_option("--threads", seg.threads)->check(CLI::PositiveNumber);
    segment->add_option("--out", seg.out, "Passage TSV (passage_id, docid, offset, text)");

    ExpandArgs exp;
    auto* expand = app.add_subcommand("expand", "Render indexable passage text with expansion queries");
    expand->add_option("--corpus", exp.corpus)->required();
    expand->add_option("--expansions", exp.expansions, "Expansion TSV (passage_id, query)");
    expand->add_option("--window", exp.window)->capture_default_str();
    expand->add_option("--stride", exp.stride)->capture_default_str();
    expand->add_flag("--no-meta", exp.no_meta, "Do not prepend url and title");
    expand->add_option("--threads", exp.threads)->check(CLI::PositiveNumber);
    expand->add_option("--out", exp.out, "Records TSV (item_id, text)");

    IndexArgs idx;
    auto* index = app.add_subcommand("index", "Build a BM25 index from item_id<TAB>text records");
    index->add_option("--in", idx.in)->required();
    index->add_option("--out", idx.out);
    index->add_option("--k1", idx.k1)->capture_default_str();
    index->add_option("--b", idx.b)->capture_default_str();
    index->add_option("--threads", idx.threads)->check(CLI::PositiveNumber);

    std::string store_path;
    auto* embed = app.add_subcommand("embed-load-check", "Validate an embedding store");
    embed->add_option("--store", store_path)->required();

    SearchArgs sa;
    auto* search = app.add_subcommand("search", "First-stage retrieval");
    search->add_option("--index", sa.index);
    search->add_option("--queries", sa.queries, "Queries TSV (query_id, text)")->required();
    search->add_option("--mode", sa.mode)->check(CLI::IsMember({"sparse", "dense", "hybrid"}))->capture_default_str();
    search->add_option("--k", sa.k)->check(CLI::PositiveNumber)->capture_default_str();
    search->add_option("--doc-embeddings", sa.doc_embeddings);
    search->add_option("--query-embeddings", sa.query_embeddings);
    search->add_option("--c", sa.c, "RRF constant for hybrid mode")->capture_default_str();
    search->add_option("--tag", sa.tag)->capture_default_str();
    search->add_option("--threads", sa.threads)->check(CLI::PositiveNumber);
    search->add_option("--out", sa.out);

    RerankArgs ra;
    auto* rerank = app.add_subcommand("rerank", "Mono (point-wise) or duo (pair-wise) re-ranking of a run");
    rerank->add_option("--stage", ra.stage)->check(CLI::IsMember({"mono", "duo"}))->capture_default_str();
    rerank->add_option("--scorer", ra.scorer)->check(CLI::IsMember({"builtin", "external"}))->capture_default_str();
    rerank->add_option("--endpoint", ra.endpoint, "tcp:HOST:PORT or stdio:COMMAND");
    rerank->add_option("--timeout-ms", ra.timeout_ms)->capture_default_str();
    rerank->add_option("--in", ra.in)->required();
    rerank->add_option("--out", ra.out);
    rerank->add_option("--corpus", ra.corpus)->required();
    rerank->add_option("--queries", ra.queries)->required();
    rerank->add_option("--window", ra.window)->capture_default_str();
    rerank->add_option("--stride", ra.stride)->capture_default_str();
    rerank->add_flag("--no-meta", ra.no_meta);
    rerank->add_option("--depth", ra.depth, "Candidates to rescore (default 100 mono, 50 duo)");
    rerank->add_option("--method", ra.method)->check(CLI::IsMember({"sum", "sym-sum"}))->capture_default_str();
    rerank->add_option("--tag", ra.tag);
    rerank->add_option("--threads", ra.threads)->check(CLI::PositiveNumber);

    FuseArgs fa;
    auto* fuse = app.add_subcommand("fuse", "Fuse several runs (ensemble)");
    fuse->add_option("--method", fa.method)->check(CLI::IsMember({"rrf", "mean"}))->capture_default_str();
    fuse->add_option("--in", fa.in)->required()->expected(1, -1);
    fuse->add_option("--c", fa.c)->capture_default_str();
    fuse->add_option("--depth", fa.depth)->check(CLI::PositiveNumber)->capture_default_str();
    fuse->add_option("--tag", fa.tag)->capture_default_str();
    fuse->add_option("--out", fa.out);

    EvalArgs ea;
    auto* evaluate = app.add_subcommand("eval", "MAP@100, NDCG@5, NDCG@10, R@100 per run; deltas against the first run");
    evaluate->add_option("--run", ea.runs)->required()->expected(1, -1);
    evaluate->add_option("--qrels", ea.qrels)->required();
    evaluate->add_option("--threshold", ea.threshold, "Minimum grade counted relevant for MAP and recall")->capture_default_str();
    evaluate->add_option("--gain", ea.gain)->check(CLI::IsMember({"linear", "exp"}))->capture_default_str();
    evaluate->add_flag("--machine", ea.machine, "Emit 'tag metric value' lines");

    PipelineArgs pa;
    auto* pipe = app.add_subcommand("pipeline", "Run the configured retrieve/fuse/mono/duo/ensemble cascade");
    pipe->add_option("--config", pa.config)->required();
    pipe->add_option("--out", pa.out);
    pipe->add_option("--tag", pa.tag);
    pipe->add_option("--threads", pa.threads)->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        if (!app.get_subcommands().empty()) {
            err << app.get_subcommands().front()->help();
        } else {
            err << app.help();
        }
        return 1;
    }

    try {
        if (*segment) {
            return do_segment(seg, out);
        }
        if (*expand) {
            return do_expand(exp, out, err);
        }
        if (*index) {
            return do_index(idx, out);
        }
        if (*embed) {
            return do_embed_check(store_path, out);
        }
        if (*search) {
            return do_search(sa, out, err);
        }
        if (*rerank) {
            return do_rerank(ra, out);
        }
        if (*fuse) {
            return do_fuse(fa, out);
        }
        if (*evaluate) {
            return do_eval(ea, out, err);
        }
        return do_pipeline(pa, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_status(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace cascade::cli
