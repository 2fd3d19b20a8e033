#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/corpus.hpp"
#include "cascade/dense.hpp"
#include "cascade/eval.hpp"
#include "cascade/lexical.hpp"
#include "cascade/ranking.hpp"
#include "cascade/scoring.hpp"

namespace cascade::pipeline {

inline constexpr double kDefaultRrfC = 60.0;
inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

/// score(item) = Σ over lists containing it of 1 / (c + rank), ranks from 1.
/// Only the first occurrence of an item within one list counts.
RankedList fuse_rrf(std::span<const RankedList> lists, double c = kDefaultRrfC, std::size_t k = kUnlimited);

/// Union of the inputs ordered by the best rank an item reaches in any list
/// (score 1 / best_rank).
RankedList fuse_union(std::span<const RankedList> lists, std::size_t k = kUnlimited);

/// Resolves a candidate id to the text a re-ranker should read.
using TextLookup = std::function<std::string(const std::string& item_id)>;

/// Rescores the first `depth` candidates and drops the rest. Scorer errors
/// become StageFailure with the query and batch size in the message.
RankedList mono_rerank(std::string_view query, const RankedList& candidates, const TextLookup& texts,
                       scoring::Scorer& scorer, std::size_t depth);

/// Pairwise preferences over m items; p(i, j) is the preference of item i
/// over item j. Diagonal entries are unused.
class PairMatrix {
  public:
    PairMatrix() = default;
    explicit PairMatrix(std::vector<std::string> ids);

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    double at(std::size_t i, std::size_t j) const { return p_[i * ids_.size() + j]; }
    /// Throws InvalidArgument unless 0 <= value <= 1.
    void set(std::size_t i, std::size_t j, double value);

  private:
    std::vector<std::string> ids_;
    std::vector<double> p_;
};

enum class DuoAggregation { Sum, SymSum };

/// Scores every ordered pair (i, j), i != j, in row-major order.
PairMatrix build_pair_matrix(std::string_view query, std::vector<std::string> ids, const TextLookup& texts,
                             scoring::Scorer& scorer);

/// SUM: s_i = Σ_{j≠i} p(i, j).  SYM-SUM: s_i = Σ_{j≠i} p(i, j) + (1 - p(j, i)).
std::vector<double> aggregate(const PairMatrix& matrix, DuoAggregation method);

/// Re-sorts the first min(m, |candidates|) items by aggregated preference;
/// the rest keep their incoming order after that block. Head scores are
/// shifted above every tail score so a run file sorted by score keeps this
/// order. Throws InvalidArgument for m < 2.
RankedList duo_rerank(std::string_view query, const RankedList& candidates, const TextLookup& texts,
                      scoring::Scorer& scorer, std::size_t m, DuoAggregation method);

enum class EnsembleMethod { MeanNormalized, Rrf };

/// Mean of per-query min-max normalized scores over the runs that contain an
/// item (a run with constant scores maps them to 1.0), or RRF per query.
/// Throws ConfigError for an empty run list.
eval::Run ensemble_fuse(std::span<const eval::Run> runs, EnsembleMethod method, std::string tag, double c = kDefaultRrfC,
                        std::size_t depth = kUnlimited);

enum class RetrievalMode { Sparse, Dense, Hybrid };
enum class FusionMethod { Rrf, Union };
enum class OutputLevel { Passage, Document };

struct PipelineConfig {
    std::string corpus_path;
    std::string expansions_path;
    std::string queries_path;
    std::string doc_embeddings_path;
    std::string query_embeddings_path;

    std::size_t window = corpus::kDefaultWindow;
    std::size_t stride = corpus::kDefaultStride;
    bool prepend_meta = true;

    lexical::Bm25Params bm25;

    RetrievalMode mode = RetrievalMode::Sparse;
    std::size_t k_sparse = 1000;
    std::size_t k_dense = 1000;

    FusionMethod fusion = FusionMethod::Rrf;
    double rrf_c = kDefaultRrfC;

    bool mono_enabled = false;
    std::size_t mono_depth = 100;
    scoring::ScorerSpec mono_scorer;

    bool duo_enabled = false;
    std::size_t duo_depth = 50;
    DuoAggregation duo_method = DuoAggregation::SymSum;
    scoring::ScorerSpec duo_scorer;

    std::vector<std::string> ensemble_runs;
    EnsembleMethod ensemble_method = EnsembleMethod::MeanNormalized;

    OutputLevel level = OutputLevel::Document;
    std::size_t output_depth = 1000;
    std::string tag = "cascade";

    unsigned threads = 1;
};

/// Throws ConfigError describing the first violated constraint.
void validate(const PipelineConfig& cfg, bool require_paths = true);

struct Query {
    std::string id;
    std::string text;
};

/// Lines "query_id \t text".
std::vector<Query> read_queries(std::istream& in);

/// Everything a run needs, already in memory.
struct PipelineInputs {
    std::vector<corpus::Document> documents;
    corpus::ExpansionTable expansions;
    std::vector<Query> queries;
    std::optional<dense::EmbeddingStore> doc_embeddings;
    std::optional<dense::EmbeddingStore> query_embeddings;
    std::vector<eval::Run> ensemble_runs;
};

PipelineInputs load_inputs(const PipelineConfig& cfg);

struct PipelineResult {
    eval::Run run;
    std::vector<std::string> warnings;
};

/// retrieve -> fuse -> mono -> duo -> ensemble. Output bytes depend only on
/// the config and the inputs, never on `threads` or on corpus line order.
PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineInputs& inputs);
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Keeps the first (best) passage of each document and relabels it with the
/// document id. "{docid}#{n}" maps to docid.
RankedList collapse_to_documents(const RankedList& passages);

}  // namespace cascade::pipeline
