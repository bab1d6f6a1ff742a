#include "rerank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace rerank {
namespace {

double gain(int grade) { return grade > 0 ? std::exp2(static_cast<double>(grade)) - 1.0 : 0.0; }
double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

}  // namespace

double dcg_at_k(const RankedList& ranked, const Grades& grades, std::size_t k) {
  double dcg = 0.0;
  const auto depth = std::min(k, ranked.size());
  for (std::size_t i = 0; i < depth; ++i) dcg += gain(grade_of(grades, ranked[i])) * discount(i + 1);
  return dcg;
}

double ndcg_at_k(const RankedList& ranked, const Grades& grades, std::size_t k) {
  if (k < 1) throw std::invalid_argument("ndcg cutoff must be >= 1");
  std::vector<int> ideal;
  ideal.reserve(grades.size());
  for (const auto& [id, g] : grades) {
    if (g > 0) ideal.push_back(g);
  }
  if (ideal.empty()) return 0.0;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());

  double idcg = 0.0;
  const auto depth = std::min(k, ideal.size());
  for (std::size_t i = 0; i < depth; ++i) idcg += gain(ideal[i]) * discount(i + 1);
  return dcg_at_k(ranked, grades, k) / idcg;
}

double recall_at_k(const RankedList& ranked, const Grades& grades, std::size_t k) {
  if (k < 1) throw std::invalid_argument("recall cutoff must be >= 1");
  std::size_t relevant = 0;
  for (const auto& [id, g] : grades) relevant += g > 0 ? 1 : 0;
  if (relevant == 0) return 0.0;
  std::size_t hits = 0;
  const auto depth = std::min(k, ranked.size());
  for (std::size_t i = 0; i < depth; ++i) hits += grade_of(grades, ranked[i]) > 0 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(relevant);
}

double rbo(const RankedList& a, const RankedList& b, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("rbo persistence must lie in (0, 1)");
  if (!is_permutation_of(a, b)) throw std::invalid_argument("rbo requires two permutations of the same ids");

  // Overlap grows by one whenever an element has now been seen in both prefixes.
  std::unordered_set<std::string_view> seen_once;
  std::size_t overlap = 0;
  double sum = 0.0;
  double weight = 1.0;  // p^(d-1)
  for (std::size_t d = 1; d <= a.size(); ++d) {
    const std::string_view x = a[d - 1];
    const std::string_view y = b[d - 1];
    if (x == y) {
      ++overlap;
    } else {
      if (!seen_once.insert(x).second) {
        seen_once.erase(x);
        ++overlap;
      }
      if (!seen_once.insert(y).second) {
        seen_once.erase(y);
        ++overlap;
      }
    }
    sum += weight * static_cast<double>(overlap) / static_cast<double>(d);
    weight *= p;
  }
  return (1.0 - p) * sum;
}

}  // namespace rerank
