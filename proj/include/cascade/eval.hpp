#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cascade/ranking.hpp"

namespace cascade::eval {

struct RunEntry {
    std::string item_id;
    std::size_t rank = 0;
    double score = 0.0;

    friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

/// Ranked rows per query id, plus the run tag. Queries iterate in byte order
/// of their ids, which is also the order write_run emits them in.
struct Run {
    std::string tag;
    std::map<std::string, std::vector<RunEntry>> queries;

    friend bool operator==(const Run&, const Run&) = default;
};

/// Re-sorts each query by score descending then item id descending and
/// renumbers ranks from 1.
void normalize(Run& run);

/// Lines "query_id Q0 item_id rank score tag". Rows are normalized on parse,
/// so submitted rank fields never influence ordering. The first row's tag
/// names the run.
Run parse_run(std::istream& in);

/// Writes rows in stored order with ranks renumbered from 1 and scores at 6
/// significant digits. parse_run(write_run(r)) == r for any normalized run
/// whose scores already have at most 6 significant digits.
void write_run(const Run& run, std::ostream& out);

/// Queries with an empty list are left out, as they would be after a write/parse cycle.
Run make_run(const std::map<std::string, RankedList>& lists, std::string tag);
RankedList to_ranked_list(const std::vector<RunEntry>& entries, Stage stage);

/// (query_id, item_id) -> grade.
struct Qrels {
    std::map<std::string, std::map<std::string, int>> judgments;

    friend bool operator==(const Qrels&, const Qrels&) = default;
};

/// Lines "query_id iteration item_id grade". Negative grades are a
/// FormatError; repeated pairs are a DuplicateEntry.
Qrels parse_qrels(std::istream& in);
void write_qrels(const Qrels& qrels, std::ostream& out);

enum class Gain { Linear, Exponential };

inline constexpr int kDefaultRelevanceThreshold = 2;

struct MetricResult {
    std::map<std::string, double> per_query;
    double mean = 0.0;
    std::size_t missing_from_qrels = 0;  // run queries with no judgments at all
    std::size_t without_relevant = 0;    // judged queries excluded for lack of relevant items
};

/// DCG@k = Σ gain(grade_i) / log2(i + 1) over the first k rows; unjudged rows
/// have grade 0. Queries whose judgments are all zero are left out of the mean.
MetricResult ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k, Gain gain = Gain::Linear);

/// AP@k = (1/R) Σ_{i<=k, relevant} precision@i with R the number of judged
/// items at or above `threshold`. Queries with R = 0 are left out of the mean.
MetricResult map_at_k(const Run& run, const Qrels& qrels, std::size_t k, int threshold = kDefaultRelevanceThreshold);

MetricResult recall_at_k(const Run& run, const Qrels& qrels, std::size_t k, int threshold = kDefaultRelevanceThreshold);

struct EvalOptions {
    int threshold = kDefaultRelevanceThreshold;
    Gain gain = Gain::Linear;
};

/// The four columns of the results tables.
struct MetricsReport {
    std::string tag;
    MetricResult map100;
    MetricResult ndcg5;
    MetricResult ndcg10;
    MetricResult recall100;
    std::size_t evaluated_queries = 0;
    std::vector<std::string> warnings;
};

MetricsReport evaluate_run(const Run& run, const Qrels& qrels, const EvalOptions& options = {});

/// "tag MAP@100 NDCG@5 NDCG@10 R@100" with four decimals.
std::string format_row(const MetricsReport& report);

/// Header plus one aligned row per report.
std::string format_table(std::span<const MetricsReport> reports);

/// One "tag metric value" line per metric.
std::string format_machine(const MetricsReport& report);

struct MetricDelta {
    std::string metric;
    double baseline = 0.0;
    double candidate = 0.0;
    double delta = 0.0;  // candidate - baseline
};

std::vector<MetricDelta> compare_reports(const MetricsReport& baseline, const MetricsReport& candidate);
std::string format_comparison(const MetricsReport& baseline, const MetricsReport& candidate);

}  // namespace cascade::eval
