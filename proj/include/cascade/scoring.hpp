#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cascade/protocol.hpp"

namespace cascade::scoring {

/// |unique query terms ∩ doc terms| / |unique query terms|, 0 for a query
/// without terms. Uses the lexical tokenizer.
double overlap_score(std::string_view query, std::string_view doc);

/// 0.5 + (overlap(q, a) - overlap(q, b)) / 2, clamped to [0, 1]. Swapping the
/// documents gives exactly one minus the value.
double overlap_preference(std::string_view query, std::string_view doc_a, std::string_view doc_b);

using DocPair = std::pair<std::string, std::string>;

/// Point-wise and pair-wise relevance model. Scores are in [0, 1]; a duo
/// score is the preference for the first document of the pair.
class Scorer {
  public:
    virtual ~Scorer() = default;

    virtual std::vector<double> score_mono(std::string_view query, std::span<const std::string> docs) = 0;
    virtual std::vector<double> score_duo(std::string_view query, std::span<const DocPair> pairs) = 0;
    virtual std::string tag() const = 0;
};

class OverlapScorer final : public Scorer {
  public:
    std::vector<double> score_mono(std::string_view query, std::span<const std::string> docs) override;
    std::vector<double> score_duo(std::string_view query, std::span<const DocPair> pairs) override;
    std::string tag() const override { return "builtin-overlap"; }
};

/// Forwards requests to a process speaking the line protocol. Connects on
/// first use; calls from several threads are serialized on one connection.
class ExternalScorer final : public Scorer {
  public:
    ExternalScorer(protocol::Endpoint endpoint, std::chrono::milliseconds timeout);

    std::vector<double> score_mono(std::string_view query, std::span<const std::string> docs) override;
    std::vector<double> score_duo(std::string_view query, std::span<const DocPair> pairs) override;
    std::string tag() const override;

  private:
    std::vector<double> send(std::vector<protocol::Request> requests);

    protocol::Endpoint endpoint_;
    std::chrono::milliseconds timeout_;
    mutable std::mutex mutex_;
    std::unique_ptr<protocol::Channel> channel_;
    std::int64_t next_id_ = 1;
};

enum class ScorerKind { BuiltinOverlap, External };

struct ScorerSpec {
    ScorerKind kind = ScorerKind::BuiltinOverlap;
    std::string endpoint;
    std::string tag;
    std::chrono::milliseconds timeout{30'000};
};

/// Throws ConfigError when an external scorer has no endpoint.
std::unique_ptr<Scorer> make_scorer(const ScorerSpec& spec);

}  // namespace cascade::scoring
