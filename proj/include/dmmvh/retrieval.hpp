#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmmvh/hash_code.hpp"
#include "dmmvh/linalg.hpp"

namespace dmmvh {

// Binary codes with aligned ids and multi-hot labels. Codes share one bit length.
class HammingIndex {
 public:
  HammingIndex() = default;
  HammingIndex(std::vector<HashCode> codes, std::vector<std::string> ids,
               std::vector<Vector> labels);

  void add(HashCode code, std::string id, Vector label = {});

  std::size_t size() const { return codes_.size(); }
  bool empty() const { return codes_.empty(); }
  std::size_t bits() const { return codes_.empty() ? 0 : codes_.front().bits(); }

  const std::vector<HashCode>& codes() const { return codes_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<Vector>& labels() const { return labels_; }

 private:
  std::vector<HashCode> codes_;
  std::vector<std::string> ids_;
  std::vector<Vector> labels_;
};

// Positions of every indexed code ordered by Hamming distance to `query`, ties by
// insertion position. Entries whose id equals `exclude_id` are left out.
std::vector<std::size_t> rank(const HammingIndex& index, const HashCode& query,
                              const std::string& exclude_id = {});

// Ids of the k nearest codes (all of them when k >= size).
std::vector<std::string> search(const HammingIndex& index, const HashCode& query, std::size_t k);

// Mean of precision@p over relevant positions p, divided by total_relevant.
// Returns 0 when total_relevant is 0.
double average_precision(std::span<const int> ranked_relevance, std::size_t total_relevant);
// Same over the first k positions, divided by min(total_relevant, k).
double average_precision_at_k(std::span<const int> ranked_relevance, std::size_t total_relevant,
                              std::size_t k);
double recall_at_k(std::span<const int> ranked_relevance, std::size_t total_relevant,
                   std::size_t k);

// Two items are relevant to each other when their labels share a category.
bool relevant(const Vector& a, const Vector& b);

struct EvalReport {
  double map = 0.0;
  std::vector<std::size_t> cutoffs;
  std::vector<double> map_at_k;
  std::vector<double> recall_at_k;
  std::vector<double> per_query_ap;
  // per_query_recall[q][c] is query q's recall at cutoffs[c].
  std::vector<std::vector<double>> per_query_recall;
  std::size_t bits = 0;
  std::size_t corpus_size = 0;
  std::vector<std::pair<std::string, std::string>> config;
};

// Ranks the corpus for every query (excluding a corpus entry with the query's id) and
// scores it with full-ranking mAP plus mAP@K and Recall@K at each cutoff.
EvalReport evaluate(const HammingIndex& queries, const HammingIndex& corpus,
                    const std::vector<std::size_t>& cutoffs);

// Report as CSV, one row per cutoff, preceded by "# key=value" config lines.
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
void write_report_summary(const EvalReport& report, const std::filesystem::path& path);

}  // namespace dmmvh
