#pragma once

// Reference retrieval helpers for tests: random indexes and a recall
// count by full enumeration of ranks.

#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmodal/retrieval.hpp"
#include "xmodal/rng.hpp"

namespace xmodal::testing {

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values) v = rng.normal();
  return m;
}

inline std::string padded_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05zu", prefix, i);
  return buf;
}

inline EmbeddingIndex make_index(Matrix items, const char* prefix, Modality modality, std::vector<int> groups) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < items.rows; ++i) ids.push_back(padded_id(prefix, i));
  std::vector<Modality> tags(items.rows, modality);
  return EmbeddingIndex(std::move(items), std::move(ids), std::move(tags), std::move(groups));
}

inline double plain_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

// A query succeeds when some same-group candidate has fewer than K
// candidates ranked ahead of it (closer, or equally close with a smaller id).
inline double brute_force_recall(std::span<const RetrievalQuery> queries, const EmbeddingIndex& index,
                                 std::size_t k) {
  std::size_t hits = 0;
  for (const auto& q : queries) {
    std::vector<double> dist(index.size());
    std::vector<bool> candidate(index.size());
    for (std::size_t r = 0; r < index.size(); ++r) {
      candidate[r] = index.id(r) != q.item_id;
      dist[r] = plain_distance(q.vector, index.row(r));
    }
    bool hit = false;
    for (std::size_t c = 0; c < index.size() && !hit; ++c) {
      if (!candidate[c] || index.group(c) != q.group) continue;
      std::size_t ahead = 0;
      for (std::size_t r = 0; r < index.size(); ++r) {
        if (!candidate[r] || r == c) continue;
        ahead += dist[r] < dist[c] || (dist[r] == dist[c] && index.id(r) < index.id(c));
      }
      hit = ahead < k;
    }
    hits += hit;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(queries.size());
}

// N images with 5 captions each, all i.i.d. Gaussian; sentence->image R@K.
inline double random_sentence_to_image_recall(std::size_t n_images, std::size_t dim, std::size_t k,
                                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> image_groups(n_images);
  for (std::size_t i = 0; i < n_images; ++i) image_groups[i] = static_cast<int>(i);
  const auto images = make_index(gaussian_matrix(n_images, dim, rng), "img", Modality::image, image_groups);
  const auto captions = gaussian_matrix(n_images * 5, dim, rng);
  std::vector<RetrievalQuery> queries;
  for (std::size_t c = 0; c < captions.rows; ++c) {
    const auto r = captions.row(c);
    queries.push_back({{r.begin(), r.end()}, static_cast<int>(c / 5), padded_id("cap", c)});
  }
  return recall_at_k(queries, images, k);
}

}  // namespace xmodal::testing
