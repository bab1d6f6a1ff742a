#include "rerank/types.hpp"

#include <algorithm>
#include <unordered_set>

namespace rerank {

std::vector<std::string> CandidateList::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

int grade_of(const Grades& grades, std::string_view id) {
  const auto it = grades.find(std::string(id));
  return it == grades.end() ? 0 : it->second;
}

bool has_duplicates(std::span<const std::string> ids) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(ids.size());
  for (const auto& id : ids) {
    if (!seen.insert(id).second) return true;
  }
  return false;
}

bool is_permutation_of(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size() || has_duplicates(a)) return false;
  std::unordered_set<std::string_view> pool(a.begin(), a.end());
  for (const auto& id : b) {
    if (pool.erase(id) != 1) return false;
  }
  return pool.empty();
}

std::uint64_t stable_hash(std::string_view text, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace rerank
