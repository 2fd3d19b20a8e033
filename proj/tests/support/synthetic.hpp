#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cascade/corpus.hpp"
#include "cascade/dense.hpp"
#include "cascade/eval.hpp"
#include "cascade/pipeline.hpp"

namespace synthetic {

/// Deterministic helpers on top of mt19937_64 (whose output sequence is fixed
/// by the standard, unlike the library distributions).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double gaussian();

    template <typename T>
    void shuffle(std::vector<T>& v)
    {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

std::vector<float> random_unit(Rng& rng, std::size_t dim);
std::vector<float> normalized(std::vector<float> v);

/// Desk-scale collection with a known answer per query.
///
/// Every document is short enough to form one passage, so passage ids are
/// "{docid}#0" and document-level output uses the plain docids the qrels use.
///
/// Keyword queries (the first `queries - mismatch_queries`): the relevant
/// document holds all three query terms once (the third sometimes only in
/// an expansion query); four "stuffed" documents repeat two of the terms and
/// out-score it under BM25. Embeddings put all five on the same topic.
///
/// Vocabulary-mismatch queries: the relevant document shares no term with
/// the query but its token embeddings copy the query's; three distractors
/// each contain one query term.
struct Collection {
    std::vector<cascade::corpus::Document> documents;
    std::vector<std::pair<std::string, std::string>> expansions;  // passage_id, query
    std::vector<cascade::pipeline::Query> queries;
    cascade::eval::Qrels qrels;
    cascade::dense::EmbeddingStore doc_embeddings;
    cascade::dense::EmbeddingStore query_embeddings;
    std::set<std::string> mismatch_query_ids;
};

struct Options {
    std::size_t documents = 2000;
    std::size_t queries = 50;
    std::size_t mismatch_queries = 10;
    std::size_t dim = 32;
    std::uint64_t seed = 20211;
};

Collection make_collection(const Options& options = {});

cascade::pipeline::PipelineInputs to_inputs(const Collection& c);

/// Writes corpus.tsv, expansions.tsv, queries.tsv, qrels.txt, docs.crk and
/// queries.crk into `dir`. With `shuffle_seed` set, corpus lines are written
/// in a shuffled order.
void write_collection(const Collection& c, const std::filesystem::path& dir, std::uint64_t shuffle_seed = 0);

/// Fresh directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace synthetic

namespace synthetic {

/// Random run and qrels over a shared pool of items: up to `max_queries`
/// queries with at most `max_items` ranked items each, grades 0..3. Some run
/// queries are unjudged and some judged queries have no relevant item.
/// Scores have at most 6 significant digits and the run is normalized.
struct EvalInstance {
    cascade::eval::Run run;
    cascade::eval::Qrels qrels;
};

EvalInstance random_eval_instance(Rng& rng, std::size_t max_queries = 6, std::size_t max_items = 20);

}  // namespace synthetic
