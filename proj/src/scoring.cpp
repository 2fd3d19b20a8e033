#include "cascade/scoring.hpp"

#include <algorithm>
#include <unordered_set>

#include "cascade/error.hpp"
#include "cascade/lexical.hpp"

namespace cascade::scoring {

double overlap_score(std::string_view query, std::string_view doc)
{
    auto q = lexical::tokenize(query);
    std::unordered_set<std::string> unique(q.begin(), q.end());
    if (unique.empty()) {
        return 0.0;
    }
    auto d = lexical::tokenize(doc);
    std::unordered_set<std::string> doc_terms(d.begin(), d.end());
    std::size_t shared = 0;
    for (const auto& t : unique) {
        shared += doc_terms.count(t);
    }
    return static_cast<double>(shared) / static_cast<double>(unique.size());
}

double overlap_preference(std::string_view query, std::string_view doc_a, std::string_view doc_b)
{
    double p = 0.5 + (overlap_score(query, doc_a) - overlap_score(query, doc_b)) / 2.0;
    return std::clamp(p, 0.0, 1.0);
}

std::vector<double> OverlapScorer::score_mono(std::string_view query, std::span<const std::string> docs)
{
    std::vector<double> out;
    out.reserve(docs.size());
    for (const auto& d : docs) {
        out.push_back(overlap_score(query, d));
    }
    return out;
}

std::vector<double> OverlapScorer::score_duo(std::string_view query, std::span<const DocPair> pairs)
{
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        out.push_back(overlap_preference(query, a, b));
    }
    return out;
}

ExternalScorer::ExternalScorer(protocol::Endpoint endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout)
{}

std::string ExternalScorer::tag() const
{
    std::lock_guard lock(mutex_);
    return channel_ ? channel_->tag() : std::string("external");
}

std::vector<double> ExternalScorer::send(std::vector<protocol::Request> requests)
{
    std::lock_guard lock(mutex_);
    if (!channel_) {
        channel_ = protocol::connect(endpoint_, timeout_);
    }
    for (auto& r : requests) {
        r.id = next_id_++;
    }
    std::vector<double> scores;
    try {
        auto responses = channel_->exchange(requests, timeout_);
        scores.reserve(responses.size());
        for (const auto& r : responses) {
            scores.push_back(r.score);
        }
    } catch (...) {
        // The stream may hold stale replies; reconnect on the next call.
        channel_.reset();
        throw;
    }
    return scores;
}

std::vector<double> ExternalScorer::score_mono(std::string_view query, std::span<const std::string> docs)
{
    std::vector<protocol::Request> requests;
    requests.reserve(docs.size());
    for (const auto& d : docs) {
        requests.push_back({0, protocol::Kind::Mono, std::string(query), d, {}});
    }
    return send(std::move(requests));
}

std::vector<double> ExternalScorer::score_duo(std::string_view query, std::span<const DocPair> pairs)
{
    std::vector<protocol::Request> requests;
    requests.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        requests.push_back({0, protocol::Kind::Duo, std::string(query), a, b});
    }
    return send(std::move(requests));
}

std::unique_ptr<Scorer> make_scorer(const ScorerSpec& spec)
{
    if (spec.kind == ScorerKind::BuiltinOverlap) {
        return std::make_unique<OverlapScorer>();
    }
    if (spec.endpoint.empty()) {
        throw Error(ErrorCode::ConfigError, "external scorer requires an endpoint");
    }
    return std::make_unique<ExternalScorer>(protocol::parse_endpoint(spec.endpoint), spec.timeout);
}

}  // namespace cascade::scoring
