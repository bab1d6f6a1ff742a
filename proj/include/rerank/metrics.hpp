#pragma once

// Ranking metrics over graded judgments.

#include <cstddef>

#include "rerank/types.hpp"

namespace rerank {

/// NDCG@k with gain 2^grade - 1 and discount 1/log2(rank + 1). The ideal ordering
/// is built from every judged id of the query, so judged passages absent from
/// `ranked` lower the score. Returns 0 when nothing has a positive grade.
[[nodiscard]] double ndcg_at_k(const RankedList& ranked, const Grades& grades, std::size_t k);

/// DCG@k of `ranked` alone.
[[nodiscard]] double dcg_at_k(const RankedList& ranked, const Grades& grades, std::size_t k);

/// Fraction of all positively graded ids found in the first k. 0 when none exist.
[[nodiscard]] double recall_at_k(const RankedList& ranked, const Grades& grades, std::size_t k);

/// Rank-biased overlap truncated at the list length L:
///   (1 - p) * sum_{d=1..L} p^(d-1) * |a[1..d] ∩ b[1..d]| / d
/// Both lists must be permutations of the same ids; 0 < p < 1.
/// Identical lists score 1 - p^L.
[[nodiscard]] double rbo(const RankedList& a, const RankedList& b, double p);

}  // namespace rerank
