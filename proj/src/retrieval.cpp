#include "dmmvh/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iomanip>

#include "dmmvh/error.hpp"

namespace dmmvh {

HashCode::HashCode(std::size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

HashCode HashCode::from_signs(std::span<const double> signs) {
  HashCode code(signs.size());
  for (std::size_t k = 0; k < signs.size(); ++k) code.set(k, signs[k] >= 0.0);
  return code;
}

void HashCode::set(std::size_t k, bool positive) {
  const std::uint64_t bit = std::uint64_t{1} << (k % 64);
  if (positive) {
    words_[k / 64] |= bit;
  } else {
    words_[k / 64] &= ~bit;
  }
}

std::vector<double> HashCode::unpack() const {
  std::vector<double> out(bits_);
  for (std::size_t k = 0; k < bits_; ++k) out[k] = sign(k);
  return out;
}

std::size_t hamming_distance(const HashCode& a, const HashCode& b) {
  if (a.bits() != b.bits()) {
    throw ShapeError("hamming_distance: " + std::to_string(a.bits()) + " vs " +
                     std::to_string(b.bits()) + " bits");
  }
  std::size_t d = 0;
  for (std::size_t w = 0; w < a.words().size(); ++w) {
    d += static_cast<std::size_t>(std::popcount(a.words()[w] ^ b.words()[w]));
  }
  return d;
}

HammingIndex::HammingIndex(std::vector<HashCode> codes, std::vector<std::string> ids,
                           std::vector<Vector> labels) {
  if (codes.size() != ids.size() || (!labels.empty() && labels.size() != codes.size())) {
    throw ShapeError("HammingIndex: codes, ids and labels must align");
  }
  for (std::size_t i = 0; i < codes.size(); ++i) {
    add(std::move(codes[i]), std::move(ids[i]), labels.empty() ? Vector{} : std::move(labels[i]));
  }
}

void HammingIndex::add(HashCode code, std::string id, Vector label) {
  if (!codes_.empty() && code.bits() != bits()) {
    throw ShapeError("HammingIndex: code has " + std::to_string(code.bits()) +
                     " bits, index holds " + std::to_string(bits()));
  }
  codes_.push_back(std::move(code));
  ids_.push_back(std::move(id));
  labels_.push_back(std::move(label));
}

std::vector<std::size_t> rank(const HammingIndex& index, const HashCode& query,
                              const std::string& exclude_id) {
  if (index.empty()) throw StateError("search on an empty index");
  const std::size_t k_bits = index.bits();
  if (query.bits() != k_bits) {
    throw ShapeError("query has " + std::to_string(query.bits()) + " bits, index holds " +
                     std::to_string(k_bits));
  }
  // Counting sort over distances 0..K keeps insertion order within each distance.
  std::vector<std::vector<std::size_t>> buckets(k_bits + 1);
  const auto& codes = index.codes();
  const auto& ids = index.ids();
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (!exclude_id.empty() && ids[i] == exclude_id) continue;
    buckets[hamming_distance(query, codes[i])].push_back(i);
  }
  std::vector<std::size_t> out;
  out.reserve(codes.size());
  for (const auto& b : buckets) out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<std::string> search(const HammingIndex& index, const HashCode& query, std::size_t k) {
  if (k < 1) throw ArgumentError("search: k must be >= 1");
  const auto order = rank(index, query);
  const std::size_t n = std::min(k, order.size());
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(index.ids()[order[i]]);
  return out;
}

namespace {

double precision_sum(std::span<const int> rel, std::size_t limit, std::size_t total_relevant) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t p = 0; p < limit; ++p) {
    if (rel[p] != 0 && rel[p] != 1) throw ArgumentError("relevance values must be 0 or 1");
    if (rel[p]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(p + 1);
    }
  }
  if (hits > total_relevant) {
    throw ArgumentError("ranking holds " + std::to_string(hits) +
                        " relevant items but total_relevant is " + std::to_string(total_relevant));
  }
  return sum;
}

}  // namespace

double average_precision(std::span<const int> ranked_relevance, std::size_t total_relevant) {
  const double sum = precision_sum(ranked_relevance, ranked_relevance.size(), total_relevant);
  if (total_relevant == 0) return 0.0;
  return sum / static_cast<double>(total_relevant);
}

double average_precision_at_k(std::span<const int> ranked_relevance, std::size_t total_relevant,
                              std::size_t k) {
  const std::size_t limit = std::min(k, ranked_relevance.size());
  // Hits beyond the cutoff still count against total_relevant.
  precision_sum(ranked_relevance, ranked_relevance.size(), total_relevant);
  const double sum = precision_sum(ranked_relevance, limit, total_relevant);
  const std::size_t divisor = std::min(total_relevant, k);
  if (divisor == 0) return 0.0;
  return sum / static_cast<double>(divisor);
}

double recall_at_k(std::span<const int> ranked_relevance, std::size_t total_relevant,
                   std::size_t k) {
  precision_sum(ranked_relevance, ranked_relevance.size(), total_relevant);
  if (total_relevant == 0) return 0.0;
  const std::size_t limit = std::min(k, ranked_relevance.size());
  std::size_t hits = 0;
  for (std::size_t p = 0; p < limit; ++p) hits += ranked_relevance[p] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(total_relevant);
}

bool relevant(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("relevant: category counts differ");
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (a[c] * b[c] > 0.0) return true;
  }
  return false;
}

EvalReport evaluate(const HammingIndex& queries, const HammingIndex& corpus,
                    const std::vector<std::size_t>& cutoffs) {
  if (queries.empty()) throw ArgumentError("evaluate: no queries");
  if (corpus.empty()) throw StateError("evaluate: empty retrieval index");
  if (queries.bits() != corpus.bits()) throw ShapeError("evaluate: query and corpus bits differ");
  for (std::size_t k : cutoffs) {
    if (k < 1) throw ArgumentError("evaluate: cutoffs must be >= 1");
  }

  EvalReport report;
  report.cutoffs = cutoffs;
  report.bits = corpus.bits();
  report.corpus_size = corpus.size();
  report.map_at_k.assign(cutoffs.size(), 0.0);
  report.recall_at_k.assign(cutoffs.size(), 0.0);

  std::vector<int> rel;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const Vector& q_label = queries.labels()[q];
    const auto order = rank(corpus, queries.codes()[q], queries.ids()[q]);
    rel.assign(order.size(), 0);
    std::size_t total = 0;
    for (std::size_t p = 0; p < order.size(); ++p) {
      rel[p] = relevant(q_label, corpus.labels()[order[p]]) ? 1 : 0;
      total += static_cast<std::size_t>(rel[p]);
    }
    const double ap = average_precision(rel, total);
    report.per_query_ap.push_back(ap);
    report.map += ap;
    std::vector<double> recalls;
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      report.map_at_k[c] += average_precision_at_k(rel, total, cutoffs[c]);
      recalls.push_back(recall_at_k(rel, total, cutoffs[c]));
      report.recall_at_k[c] += recalls.back();
    }
    report.per_query_recall.push_back(std::move(recalls));
  }
  const double nq = static_cast<double>(queries.size());
  report.map /= nq;
  for (double& v : report.map_at_k) v /= nq;
  for (double& v : report.recall_at_k) v /= nq;
  return report;
}

namespace {

void write_config(std::ostream& out, const EvalReport& report) {
  for (const auto& [k, v] : report.config) out << "# " << k << "=" << v << "\n";
}

}  // namespace

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_config(out, report);
  out << std::setprecision(17);
  out << "cutoff,map_at_k,recall_at_k\n";
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
    out << report.cutoffs[c] << "," << report.map_at_k[c] << "," << report.recall_at_k[c] << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_report_summary(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_config(out, report);
  out << std::fixed << std::setprecision(6);
  out << "bits: " << report.bits << "\n";
  out << "queries: " << report.per_query_ap.size() << "\n";
  out << "corpus: " << report.corpus_size << "\n";
  out << "mAP: " << report.map << "\n";
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
    out << "mAP@" << report.cutoffs[c] << ": " << report.map_at_k[c] << "  Recall@"
        << report.cutoffs[c] << ": " << report.recall_at_k[c] << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace dmmvh
