#include "xmodal/retrieval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

#include "xmodal/errors.hpp"

namespace xmodal {

EmbeddingIndex::EmbeddingIndex(Matrix items, std::vector<std::string> ids, std::vector<Modality> modality,
                               std::vector<int> groups)
    : items_(std::move(items)), ids_(std::move(ids)), modality_(std::move(modality)), groups_(std::move(groups)) {
  const std::size_t n = items_.rows;
  if (n == 0) throw DataError("embedding index needs at least one row");
  if (items_.cols == 0) throw DataError("embedding index needs D >= 1");
  if (ids_.size() != n || modality_.size() != n || groups_.size() != n) {
    throw DataError("embedding index metadata does not match row count");
  }
  sq_norms_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : items_.row(i)) s += v * v;
    sq_norms_[i] = s;
    if (!by_id_.emplace(ids_[i], i).second) throw DataError("duplicate item id '" + ids_[i] + "'");
    all_rows_.push_back(i);
    (modality_[i] == Modality::image ? image_rows_ : text_rows_).push_back(i);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
  id_rank_.resize(n);
  for (std::size_t r = 0; r < n; ++r) id_rank_[order[r]] = r;
}

std::optional<std::size_t> EmbeddingIndex::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::size_t>& EmbeddingIndex::rows(std::optional<Modality> filter) const {
  if (!filter) return all_rows_;
  return *filter == Modality::image ? image_rows_ : text_rows_;
}

EmbeddingIndex EmbeddingIndex::select(Modality m) const {
  const auto& chosen = rows(m);
  if (chosen.empty()) throw DataError("no rows with modality " + std::string(to_string(m)));
  Matrix items(chosen.size(), dim());
  std::vector<std::string> ids;
  std::vector<Modality> tags;
  std::vector<int> groups;
  for (std::size_t r = 0; r < chosen.size(); ++r) {
    const auto src = row(chosen[r]);
    std::copy(src.begin(), src.end(), items.row(r).begin());
    ids.push_back(ids_[chosen[r]]);
    tags.push_back(m);
    groups.push_back(groups_[chosen[r]]);
  }
  return EmbeddingIndex(std::move(items), std::move(ids), std::move(tags), std::move(groups));
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return std::sqrt(s);
}

namespace {

struct RankLess {
  const EmbeddingIndex& index;
  bool operator()(const Neighbor& a, const Neighbor& b) const {
    if (a.distance != b.distance) return a.distance < b.distance;
    return index.id_rank(a.row) < index.id_rank(b.row);
  }
};

std::size_t checked_k(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                      std::size_t candidates) {
  if (query.size() != index.dim()) {
    throw DataError("query has dimension " + std::to_string(query.size()) + ", index has " +
                    std::to_string(index.dim()));
  }
  if (k < 1) throw DataError("k must be >= 1");
  if (candidates == 0) throw DataError("no candidates left after filtering");
  return std::min(k, candidates);
}

RankedList rank_exact(const EmbeddingIndex& index, std::span<const double> query,
                      std::span<const std::size_t> rows, std::size_t k) {
  RankedList all;
  all.reserve(rows.size());
  for (std::size_t r : rows) all.push_back({r, euclidean_distance(query, index.row(r))});
  const RankLess less{index};
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
  all.resize(k);
  return all;
}

std::vector<std::size_t> candidate_rows(const EmbeddingIndex& index, std::optional<Modality> filter,
                                        std::size_t exclude_row) {
  const auto& rows = index.rows(filter);
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r != exclude_row) out.push_back(r);
  }
  return out;
}

}  // namespace

RankedList knn_naive(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                     std::optional<Modality> filter, std::size_t exclude_row) {
  const auto rows = candidate_rows(index, filter, exclude_row);
  k = checked_k(index, query, k, rows.size());
  return rank_exact(index, query, rows, k);
}

RankedList knn_fast(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                    std::optional<Modality> filter, std::size_t exclude_row) {
  const auto rows = candidate_rows(index, filter, exclude_row);
  k = checked_k(index, query, k, rows.size());
  if (rows.size() <= k) return rank_exact(index, query, rows, k);

  const std::size_t d = index.dim();
  double q_sq = 0.0;
  for (double v : query) q_sq += v * v;
  const double q_norm = std::sqrt(q_sq);
  // Covers rounding in both the expanded form and the direct sum of squares.
  const double unit = 4.0 * static_cast<double>(d + 8) * std::numeric_limits<double>::epsilon();

  constexpr std::size_t kBlock = 64;
  std::vector<double> approx(rows.size());
  std::vector<double> slack(rows.size());
  std::priority_queue<double> upper;  // k smallest upper bounds; top is the largest of them
  for (std::size_t begin = 0; begin < rows.size(); begin += kBlock) {
    const std::size_t end = std::min(rows.size(), begin + kBlock);
    for (std::size_t i = begin; i < end; ++i) {
      const auto x = index.row(rows[i]);
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += query[j] * x[j];
      const double x_sq = index.squared_norm(rows[i]);
      approx[i] = q_sq + x_sq - 2.0 * dot;
      const double reach = q_norm + std::sqrt(x_sq);
      slack[i] = unit * reach * reach + std::numeric_limits<double>::denorm_min();
      const double ub = approx[i] + slack[i];
      if (upper.size() < k) {
        upper.push(ub);
      } else if (ub < upper.top()) {
        upper.pop();
        upper.push(ub);
      }
    }
  }
  // Rows whose squared distances round to the same distance as the threshold also survive.
  const double threshold = upper.top() * (1.0 + 8.0 * std::numeric_limits<double>::epsilon());

  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (approx[i] - slack[i] <= threshold) survivors.push_back(rows[i]);
  }
  return rank_exact(index, query, survivors, k);
}

double recall_at_k(std::span<const RetrievalQuery> queries, const EmbeddingIndex& index, std::size_t k,
                   std::optional<Modality> filter) {
  if (queries.empty()) throw DataError("recall needs at least one query");
  if (k < 1) throw DataError("K must be >= 1");
  std::size_t hits = 0;
  for (const auto& q : queries) {
    const auto self = q.item_id.empty() ? std::nullopt : index.find(q.item_id);
    const auto ranked = knn_fast(index, q.vector, k, filter, self.value_or(kNoExclusion));
    const bool hit = std::any_of(ranked.begin(), ranked.end(),
                                 [&](const Neighbor& n) { return index.group(n.row) == q.group; });
    if (hit) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(queries.size());
}

std::string_view to_string(Direction d) {
  return d == Direction::image_to_sentence ? "image_to_sentence" : "sentence_to_image";
}

std::pair<RecallTable, RecallTable> evaluate_bidirectional(const EmbeddingIndex& images,
                                                           const EmbeddingIndex& texts,
                                                           std::span<const std::size_t> ks) {
  if (images.dim() != texts.dim()) throw DataError("image and text indexes differ in D");
  std::unordered_map<int, std::size_t> captions_per_group;
  for (std::size_t i = 0; i < texts.size(); ++i) ++captions_per_group[texts.group(i)];

  std::vector<RetrievalQuery> image_queries, text_queries;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!captions_per_group.contains(images.group(i))) {
      throw DataError("image '" + images.id(i) + "' has no captions");
    }
    const auto r = images.row(i);
    image_queries.push_back({{r.begin(), r.end()}, images.group(i), images.id(i)});
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto r = texts.row(i);
    text_queries.push_back({{r.begin(), r.end()}, texts.group(i), texts.id(i)});
  }

  RecallTable i2s{Direction::image_to_sentence, {ks.begin(), ks.end()}, {}};
  RecallTable s2i{Direction::sentence_to_image, {ks.begin(), ks.end()}, {}};
  for (std::size_t k : ks) {
    i2s.values.push_back(recall_at_k(image_queries, texts, k));
    s2i.values.push_back(recall_at_k(text_queries, images, k));
  }
  return {i2s, s2i};
}

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string format_embedding_file(const EmbeddingIndex& index) {
  std::string out = std::to_string(index.size()) + " " + std::to_string(index.dim()) + "\n";
  for (std::size_t i = 0; i < index.size(); ++i) {
    out += index.id(i);
    out += ' ';
    out += to_string(index.modality(i));
    out += ' ';
    out += std::to_string(index.group(i));
    for (double v : index.row(i)) {
      out += ' ';
      out += shortest(v);
    }
    out += '\n';
  }
  return out;
}

EmbeddingIndex parse_embedding_file(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0, d = 0;
  if (!(in >> n >> d) || n == 0 || d == 0) throw DataError("embedding file header must be 'N D' with N, D >= 1");
  Matrix items(n, d);
  std::vector<std::string> ids(n);
  std::vector<Modality> tags(n);
  std::vector<int> groups(n);
  std::string tag, value;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> ids[i] >> tag >> groups[i])) {
      throw DataError("embedding file row " + std::to_string(i + 1) + ": expected 'id modality group'");
    }
    tags[i] = parse_modality(tag);
    for (std::size_t k = 0; k < d; ++k) {
      if (!(in >> value)) throw DataError("embedding file row " + std::to_string(i + 1) + ": too few components");
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(v)) {
        throw DataError("embedding file row " + std::to_string(i + 1) + ": bad component '" + value + "'");
      }
      items(i, k) = v;
    }
  }
  if (in >> value) throw DataError("embedding file has more rows than declared");
  return EmbeddingIndex(std::move(items), std::move(ids), std::move(tags), std::move(groups));
}

void write_embedding_file(const std::filesystem::path& path, const EmbeddingIndex& index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << format_embedding_file(index);
}

EmbeddingIndex read_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embedding_file(ss.str());
}

std::string format_recall_csv(std::span<const RecallTable> tables) {
  std::string out = "direction,K,recall\n";
  for (const auto& t : tables) {
    for (std::size_t i = 0; i < t.ks.size(); ++i) {
      out += std::string(to_string(t.direction)) + "," + std::to_string(t.ks[i]) + "," +
             shortest(t.values[i]) + "\n";
    }
  }
  return out;
}

std::string format_recall_table(const RecallTable& i2s, const RecallTable& s2i, std::string_view label) {
  auto cells = [](const RecallTable& t) {
    std::string header, values;
    char buf[32];
    for (std::size_t i = 0; i < t.ks.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%8s", ("R@" + std::to_string(t.ks[i])).c_str());
      header += buf;
      std::snprintf(buf, sizeof(buf), "%8.2f", t.values[i]);
      values += buf;
    }
    return std::pair{header, values};
  };
  const auto [h1, v1] = cells(i2s);
  const auto [h2, v2] = cells(s2i);
  const int width = std::max<int>(12, static_cast<int>(label.size()));
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-*s | %-*s | %s\n", width, "Model", static_cast<int>(h1.size()),
                "Image-to-Sentence", "Sentence-to-Image");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-*s | %s | %s\n", width, "", h1.c_str(), h2.c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-*s | %s | %s\n", width, std::string(label).c_str(), v1.c_str(), v2.c_str());
  out += buf;
  return out;
}

}  // namespace xmodal
