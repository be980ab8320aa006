#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal {

// Immutable N x D matrix of embeddings with per-row id, modality and group.
class EmbeddingIndex {
public:
  EmbeddingIndex(Matrix items, std::vector<std::string> ids, std::vector<Modality> modality,
                 std::vector<int> groups);

  std::size_t size() const { return items_.rows; }
  std::size_t dim() const { return items_.cols; }
  std::span<const double> row(std::size_t i) const { return items_.row(i); }
  const Matrix& items() const { return items_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  Modality modality(std::size_t i) const { return modality_[i]; }
  int group(std::size_t i) const { return groups_[i]; }
  double squared_norm(std::size_t i) const { return sq_norms_[i]; }
  // Position of row i in ascending id order; the distance tie-breaker.
  std::size_t id_rank(std::size_t i) const { return id_rank_[i]; }
  std::optional<std::size_t> find(std::string_view id) const;

  // Rows matching the filter, ascending.
  const std::vector<std::size_t>& rows(std::optional<Modality> filter) const;

  // Subset of rows with the given modality, preserving order.
  EmbeddingIndex select(Modality m) const;

private:
  Matrix items_;
  std::vector<std::string> ids_;
  std::vector<Modality> modality_;
  std::vector<int> groups_;
  std::vector<double> sq_norms_;
  std::vector<std::size_t> id_rank_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::size_t> all_rows_, image_rows_, text_rows_;
};

struct Neighbor {
  std::size_t row = 0;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// Ascending by distance, ties by ascending id.
using RankedList = std::vector<Neighbor>;

inline constexpr std::size_t kNoExclusion = std::numeric_limits<std::size_t>::max();

// ||a - b||_2 with double accumulation. Throws DataError on a dimension mismatch.
double euclidean_distance(std::span<const double> a, std::span<const double> b);

// Exhaustive search. k is clamped to the candidate count; throws DataError
// when no candidate survives the filter.
RankedList knn_naive(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                     std::optional<Modality> filter = std::nullopt, std::size_t exclude_row = kNoExclusion);

// Same result as knn_naive. Screens rows with d^2 = |q|^2 + |x|^2 - 2 q.x in
// blocks under a bounded top-k heap, keeps every row whose rounding-error
// interval reaches the k-th upper bound, then ranks those exactly.
RankedList knn_fast(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                    std::optional<Modality> filter = std::nullopt, std::size_t exclude_row = kNoExclusion);

struct RetrievalQuery {
  std::vector<double> vector;
  int group = 0;
  std::string item_id;  // excluded from its own candidates when present in the index
};

// Percentage of queries with at least one same-group item in their top K.
double recall_at_k(std::span<const RetrievalQuery> queries, const EmbeddingIndex& index, std::size_t k,
                   std::optional<Modality> filter = std::nullopt);

enum class Direction { image_to_sentence, sentence_to_image };
std::string_view to_string(Direction d);

struct RecallTable {
  Direction direction = Direction::image_to_sentence;
  std::vector<std::size_t> ks;
  std::vector<double> values;  // percent, aligned with ks
};

// Images query the text index and captions query the image index.
// Throws DataError for an image whose group has no caption.
std::pair<RecallTable, RecallTable> evaluate_bidirectional(const EmbeddingIndex& images,
                                                           const EmbeddingIndex& texts,
                                                           std::span<const std::size_t> ks);

// "N D" header then "id modality group v1 ... vD" rows.
std::string format_embedding_file(const EmbeddingIndex& index);
EmbeddingIndex parse_embedding_file(std::string_view text);
void write_embedding_file(const std::filesystem::path& path, const EmbeddingIndex& index);
EmbeddingIndex read_embedding_file(const std::filesystem::path& path);

// CSV "direction,K,recall".
std::string format_recall_csv(std::span<const RecallTable> tables);
// Two-block table laid out like the usual bidirectional retrieval tables.
std::string format_recall_table(const RecallTable& i2s, const RecallTable& s2i, std::string_view label);

}  // namespace xmodal
