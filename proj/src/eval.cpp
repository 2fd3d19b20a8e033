#include "cascade/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "cascade/error.hpp"
#include "cascade/tsv.hpp"

namespace cascade::eval {

namespace {

[[noreturn]] void bad_line(const char* kind, std::size_t line_no, const std::string& what)
{
    throw Error(ErrorCode::FormatError, std::string(kind) + " line " + std::to_string(line_no) + ": " + what);
}

bool parse_int(std::string_view s, long long& out)
{
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out)
{
    std::string tmp(s);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    return !tmp.empty() && end == tmp.c_str() + tmp.size() && std::isfinite(out);
}

std::string fixed(double v, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

void require_k(std::size_t k)
{
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "metric depth k must be >= 1");
    }
}

void require_threshold(int threshold)
{
    if (threshold < 1) {
        throw Error(ErrorCode::InvalidArgument, "relevance threshold must be >= 1");
    }
}

const std::map<std::string, int>* judgments_for(const Qrels& qrels, const std::string& qid)
{
    auto it = qrels.judgments.find(qid);
    return it == qrels.judgments.end() ? nullptr : &it->second;
}

int grade_of(const std::map<std::string, int>& judged, const std::string& item)
{
    auto it = judged.find(item);
    return it == judged.end() ? 0 : it->second;
}

double gain_of(int grade, Gain gain)
{
    return gain == Gain::Linear ? static_cast<double>(grade) : std::exp2(static_cast<double>(grade)) - 1.0;
}

void finish_mean(MetricResult& r)
{
    double sum = 0.0;
    for (const auto& [_, v] : r.per_query) {
        sum += v;
    }
    r.mean = r.per_query.empty() ? 0.0 : sum / static_cast<double>(r.per_query.size());
}

/// Shared walk for the binary metrics: calls fn(judged, relevant_total) for
/// each run query that has judgments with at least one relevant item.
template <typename Fn>
MetricResult binary_metric(const Run& run, const Qrels& qrels, int threshold, Fn&& fn)
{
    MetricResult result;
    for (const auto& [qid, entries] : run.queries) {
        const auto* judged = judgments_for(qrels, qid);
        if (judged == nullptr) {
            ++result.missing_from_qrels;
            continue;
        }
        std::size_t relevant = 0;
        for (const auto& [_, g] : *judged) {
            relevant += g >= threshold ? 1 : 0;
        }
        if (relevant == 0) {
            ++result.without_relevant;
            continue;
        }
        result.per_query[qid] = fn(entries, *judged, relevant);
    }
    finish_mean(result);
    return result;
}

}  // namespace

void normalize(Run& run)
{
    for (auto& [_, entries] : run.queries) {
        std::sort(entries.begin(), entries.end(),
                  [](const RunEntry& a, const RunEntry& b) { return ranks_before(a.score, a.item_id, b.score, b.item_id); });
        for (std::size_t i = 0; i < entries.size(); ++i) {
            entries[i].rank = i + 1;
        }
    }
}

Run parse_run(std::istream& in)
{
    Run run;
    std::set<std::pair<std::string, std::string>> seen;
    std::string line;
    std::size_t line_no = 0;
    bool have_tag = false;
    while (tsv::read_line(in, line)) {
        ++line_no;
        auto f = tsv::split_whitespace(line);
        if (f.empty()) {
            continue;
        }
        if (f.size() != 6) {
            bad_line("run", line_no, "expected 6 fields 'query_id Q0 item_id rank score tag', got " + std::to_string(f.size()));
        }
        long long rank = 0;
        if (!parse_int(f[3], rank)) {
            bad_line("run", line_no, "non-numeric rank '" + std::string(f[3]) + "'");
        }
        double score = 0.0;
        if (!parse_double(f[4], score)) {
            bad_line("run", line_no, "non-numeric score '" + std::string(f[4]) + "'");
        }
        std::string qid(f[0]);
        std::string item(f[2]);
        if (!seen.emplace(qid, item).second) {
            throw Error(ErrorCode::DuplicateEntry, "run line " + std::to_string(line_no) + ": duplicate (" + qid + ", " + item + ")");
        }
        if (!have_tag) {
            run.tag = std::string(f[5]);
            have_tag = true;
        }
        run.queries[qid].push_back({std::move(item), static_cast<std::size_t>(std::max(rank, 0LL)), score});
    }
    normalize(run);
    return run;
}

void write_run(const Run& run, std::ostream& out)
{
    if (run.tag.empty() || tsv::has_whitespace(run.tag)) {
        throw Error(ErrorCode::InvalidArgument, "run tag must be non-empty without whitespace");
    }
    char score[64];
    for (const auto& [qid, entries] : run.queries) {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            std::snprintf(score, sizeof(score), "%.6g", entries[i].score);
            out << qid << " Q0 " << entries[i].item_id << ' ' << (i + 1) << ' ' << score << ' ' << run.tag << '\n';
        }
    }
}

Run make_run(const std::map<std::string, RankedList>& lists, std::string tag)
{
    Run run;
    run.tag = std::move(tag);
    for (const auto& [qid, list] : lists) {
        if (list.empty()) {
            continue;
        }
        auto& entries = run.queries[qid];
        entries.reserve(list.size());
        for (std::size_t i = 0; i < list.size(); ++i) {
            entries.push_back({list[i].item_id, i + 1, list[i].score});
        }
    }
    return run;
}

RankedList to_ranked_list(const std::vector<RunEntry>& entries, Stage stage)
{
    RankedList out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        out.push_back({e.item_id, e.score, stage});
    }
    return out;
}

Qrels parse_qrels(std::istream& in)
{
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (tsv::read_line(in, line)) {
        ++line_no;
        auto f = tsv::split_whitespace(line);
        if (f.empty()) {
            continue;
        }
        if (f.size() != 4) {
            bad_line("qrels", line_no, "expected 4 fields 'query_id iteration item_id grade', got " + std::to_string(f.size()));
        }
        long long grade = 0;
        if (!parse_int(f[3], grade)) {
            bad_line("qrels", line_no, "non-numeric grade '" + std::string(f[3]) + "'");
        }
        if (grade < 0 || grade > 1'000'000) {
            bad_line("qrels", line_no, "grade out of range: " + std::string(f[3]));
        }
        auto& judged = qrels.judgments[std::string(f[0])];
        if (!judged.emplace(std::string(f[2]), static_cast<int>(grade)).second) {
            throw Error(ErrorCode::DuplicateEntry,
                        "qrels line " + std::to_string(line_no) + ": duplicate (" + std::string(f[0]) + ", " + std::string(f[2]) + ")");
        }
    }
    return qrels;
}

void write_qrels(const Qrels& qrels, std::ostream& out)
{
    for (const auto& [qid, judged] : qrels.judgments) {
        for (const auto& [item, grade] : judged) {
            out << qid << " 0 " << item << ' ' << grade << '\n';
        }
    }
}

MetricResult ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k, Gain gain)
{
    require_k(k);
    MetricResult result;
    for (const auto& [qid, entries] : run.queries) {
        const auto* judged = judgments_for(qrels, qid);
        if (judged == nullptr) {
            ++result.missing_from_qrels;
            continue;
        }
        std::vector<int> ideal;
        for (const auto& [_, g] : *judged) {
            ideal.push_back(g);
        }
        std::sort(ideal.begin(), ideal.end(), std::greater<>());
        double idcg = 0.0;
        for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
            idcg += gain_of(ideal[i], gain) / std::log2(static_cast<double>(i) + 2.0);
        }
        if (idcg <= 0.0) {
            ++result.without_relevant;
            continue;
        }
        double dcg = 0.0;
        for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) {
            dcg += gain_of(grade_of(*judged, entries[i].item_id), gain) / std::log2(static_cast<double>(i) + 2.0);
        }
        result.per_query[qid] = dcg / idcg;
    }
    finish_mean(result);
    return result;
}

MetricResult map_at_k(const Run& run, const Qrels& qrels, std::size_t k, int threshold)
{
    require_k(k);
    require_threshold(threshold);
    return binary_metric(run, qrels, threshold, [&](const auto& entries, const auto& judged, std::size_t relevant) {
        double sum = 0.0;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) {
            if (grade_of(judged, entries[i].item_id) >= threshold) {
                ++hits;
                sum += static_cast<double>(hits) / static_cast<double>(i + 1);
            }
        }
        return sum / static_cast<double>(relevant);
    });
}

MetricResult recall_at_k(const Run& run, const Qrels& qrels, std::size_t k, int threshold)
{
    require_k(k);
    require_threshold(threshold);
    return binary_metric(run, qrels, threshold, [&](const auto& entries, const auto& judged, std::size_t relevant) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) {
            hits += grade_of(judged, entries[i].item_id) >= threshold ? 1 : 0;
        }
        return static_cast<double>(hits) / static_cast<double>(relevant);
    });
}

MetricsReport evaluate_run(const Run& run, const Qrels& qrels, const EvalOptions& options)
{
    MetricsReport report;
    report.tag = run.tag;
    report.map100 = map_at_k(run, qrels, 100, options.threshold);
    report.ndcg5 = ndcg_at_k(run, qrels, 5, options.gain);
    report.ndcg10 = ndcg_at_k(run, qrels, 10, options.gain);
    report.recall100 = recall_at_k(run, qrels, 100, options.threshold);
    for (const auto& [qid, _] : run.queries) {
        report.evaluated_queries += qrels.judgments.count(qid);
    }
    if (report.evaluated_queries == 0) {
        report.warnings.push_back("no query of run '" + run.tag + "' has judgments; all metrics reported as 0");
    } else if (report.ndcg10.missing_from_qrels > 0) {
        report.warnings.push_back(std::to_string(report.ndcg10.missing_from_qrels) + " run queries have no judgments and were skipped");
    }
    return report;
}

std::string format_row(const MetricsReport& report)
{
    return report.tag + ' ' + fixed(report.map100.mean, 4) + ' ' + fixed(report.ndcg5.mean, 4) + ' ' +
           fixed(report.ndcg10.mean, 4) + ' ' + fixed(report.recall100.mean, 4);
}

std::string format_table(std::span<const MetricsReport> reports)
{
    std::size_t width = 3;
    for (const auto& r : reports) {
        width = std::max(width, r.tag.size());
    }
    auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
    std::ostringstream out;
    out << pad("RUN") << "  MAP@100   NDCG@5  NDCG@10    R@100\n";
    for (const auto& r : reports) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "  %7.4f  %7.4f  %7.4f  %7.4f", r.map100.mean, r.ndcg5.mean, r.ndcg10.mean, r.recall100.mean);
        out << pad(r.tag) << buf << '\n';
    }
    return out.str();
}

std::string format_machine(const MetricsReport& report)
{
    std::ostringstream out;
    out << report.tag << " MAP@100 " << fixed(report.map100.mean, 4) << '\n';
    out << report.tag << " NDCG@5 " << fixed(report.ndcg5.mean, 4) << '\n';
    out << report.tag << " NDCG@10 " << fixed(report.ndcg10.mean, 4) << '\n';
    out << report.tag << " R@100 " << fixed(report.recall100.mean, 4) << '\n';
    out << report.tag << " num_q " << report.evaluated_queries << '\n';
    return out.str();
}

std::vector<MetricDelta> compare_reports(const MetricsReport& baseline, const MetricsReport& candidate)
{
    auto row = [](const char* name, double a, double b) { return MetricDelta{name, a, b, b - a}; };
    return {
        row("MAP@100", baseline.map100.mean, candidate.map100.mean),
        row("NDCG@5", baseline.ndcg5.mean, candidate.ndcg5.mean),
        row("NDCG@10", baseline.ndcg10.mean, candidate.ndcg10.mean),
        row("R@100", baseline.recall100.mean, candidate.recall100.mean),
    };
}

std::string format_comparison(const MetricsReport& baseline, const MetricsReport& candidate)
{
    std::ostringstream out;
    out << "metric  " << baseline.tag << " -> " << candidate.tag << '\n';
    for (const auto& d : compare_reports(baseline, candidate)) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-8s %.4f %.4f %+.4f", d.metric.c_str(), d.baseline, d.candidate, d.delta);
        out << buf << '\n';
    }
    return out.str();
}

}  // namespace cascade::eval
