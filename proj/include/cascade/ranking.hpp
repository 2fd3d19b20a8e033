#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cascade {

enum class Stage { Sparse, Dense, Fused, Mono, Duo, Ensemble };

std::string_view to_string(Stage stage);

struct ScoredCandidate {
    std::string item_id;
    double score = 0.0;
    Stage stage = Stage::Sparse;

    friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

using RankedList = std::vector<ScoredCandidate>;

/// Global ordering used by every stage and by the evaluator: higher score
/// first, equal scores by item id in descending lexicographic order.
inline bool ranks_before(double score_a, std::string_view id_a, double score_b, std::string_view id_b)
{
    if (score_a != score_b) {
        return score_a > score_b;
    }
    return id_a > id_b;
}

inline bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b)
{
    return ranks_before(a.score, a.item_id, b.score, b.item_id);
}

inline void sort_ranked(RankedList& list)
{
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return ranks_before(a, b); });
}

/// Sorts by the global rule and keeps at most `k` entries.
inline void keep_top_k(RankedList& list, std::size_t k)
{
    if (list.size() > k) {
        std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(k), list.end(),
                          [](const auto& a, const auto& b) { return ranks_before(a, b); });
        list.resize(k);
    } else {
        sort_ranked(list);
    }
}

}  // namespace cascade
