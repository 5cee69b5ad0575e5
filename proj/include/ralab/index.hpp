#pragma once

#include <algorithm>
#include <fstream>
#include <future>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ralab/binary_io.hpp"
#include "ralab/corpus.hpp"
#include "ralab/retriever.hpp"

namespace ralab {

enum class Precision : std::uint8_t { float32 = 0, float16 = 1 };

inline std::size_t bytes_per_scalar(Precision p) { return p == Precision::float16 ? 2 : 4; }

inline Precision parse_precision(std::string_view s) {
  if (s == "float32" || s == "fp32") return Precision::float32;
  if (s == "float16" || s == "fp16") return Precision::float16;
  throw Error("unknown precision '" + std::string(s) + "'");
}

/// Rounds to the nearest representable IEEE half value.
inline float round_to_half(float v) { return static_cast<float>(Eigen::half(v)); }

/// A scored hit. Ordering: higher score first, then ascending id.
struct Hit {
  std::string id;
  float score = 0.0f;
};

inline bool hit_before(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

/// Exact dense index: entries sorted by ascending passage id, vectors stored
/// row-major. Float16 precision keeps values rounded to half on write while
/// arithmetic stays in float32.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;

  EmbeddingIndex(std::size_t dim, Precision precision, std::size_t shards = 1) : dim_(dim), precision_(precision) {
    if (dim == 0) throw Error("index dimension must be >= 1");
    set_shards(shards);
  }

  /// Replaces the contents. Entries are reordered by ascending id.
  void assign(std::vector<std::string> ids, std::vector<float> data) {
    if (ids.size() * dim_ != data.size()) throw Error("vector block size does not match ids x dim");
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
    ids_.clear();
    data_.clear();
    ids_.reserve(ids.size());
    data_.reserve(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i && ids[order[i]] == ids_.back()) throw Error("duplicate passage id '" + ids[order[i]] + "'");
      ids_.push_back(std::move(ids[order[i]]));
      for (std::size_t c = 0; c < dim_; ++c) {
        float v = data[order[i] * dim_ + c];
        if (!std::isfinite(v)) throw Error("non-finite vector entry");
        data_.push_back(precision_ == Precision::float16 ? round_to_half(v) : v);
      }
    }
  }

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  Precision precision() const { return precision_; }
  std::uint64_t version() const { return version_; }
  void set_version(std::uint64_t v) { version_ = v; }
  std::size_t shards() const { return shards_; }
  void set_shards(std::size_t s) {
    if (s == 0) throw Error("shards must be >= 1");
    shards_ = s;
  }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const float> vector(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<const float> data() const { return data_; }

  std::size_t position(const std::string& id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) throw Error("unknown passage id '" + id + "'");
    return static_cast<std::size_t>(it - ids_.begin());
  }

  std::vector<std::pair<std::size_t, std::size_t>> shard_ranges() const;

  std::size_t memory_bytes() const { return size() * dim_ * bytes_per_scalar(precision_); }

 private:
  std::size_t dim_ = 0;
  Precision precision_ = Precision::float32;
  std::size_t shards_ = 1;
  std::uint64_t version_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
};

/// Contiguous balanced partition of [0, n): the first n % shards ranges hold
/// one extra entry.
inline std::vector<std::pair<std::size_t, std::size_t>> balanced_ranges(std::size_t n, std::size_t shards) {
  std::vector<std::pair<std::size_t, std::size_t>> r;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < shards; ++i) {
    std::size_t len = n / shards + (i < n % shards ? 1 : 0);
    r.emplace_back(begin, begin + len);
    begin += len;
  }
  return r;
}

inline std::vector<std::pair<std::size_t, std::size_t>> EmbeddingIndex::shard_ranges() const {
  return balanced_ranges(size(), shards_);
}

/// Embeds every passage with the document tower. The version is
/// `previous_version + 1`.
inline EmbeddingIndex build(std::span<const Passage> passages, const EncoderParams& encoder, std::size_t shards,
                            std::uint64_t previous_version = 0, Precision precision = Precision::float32) {
  if (passages.empty()) throw Error("cannot build an index from an empty passage list");
  EmbeddingIndex idx(encoder.dim, precision, shards);
  std::vector<std::string> ids;
  std::vector<float> data;
  ids.reserve(passages.size());
  data.reserve(passages.size() * encoder.dim);
  for (const auto& p : passages) {
    ids.push_back(p.id);
    auto v = to_float(encode_doc(encoder, p.text));
    data.insert(data.end(), v.begin(), v.end());
  }
  idx.assign(std::move(ids), std::move(data));
  idx.set_version(previous_version + 1);
  return idx;
}

/// Re-embeds into a new index whose version follows `old`.
inline EmbeddingIndex rebuild(const EmbeddingIndex& old, std::span<const Passage> passages, const EncoderParams& encoder) {
  return build(passages, encoder, old.shards(), old.version(), old.precision());
}

namespace detail {

// Keeps the best k hits, in hit order.
inline void keep_top(std::vector<Hit>& hits, std::size_t k) {
  if (hits.size() > k) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), hit_before);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), hit_before);
  }
}

template <typename ScoreFn>
std::vector<Hit> sharded_top_k(const std::vector<std::pair<std::size_t, std::size_t>>& ranges,
                               const std::vector<std::string>& ids, std::size_t k, std::size_t threads,
                               ScoreFn&& score_of) {
  auto scan = [&](std::size_t begin, std::size_t end) {
    std::vector<Hit> hits;
    hits.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) hits.push_back({ids[i], score_of(i)});
    keep_top(hits, k);
    return hits;
  };
  std::vector<std::vector<Hit>> partial(ranges.size());
  if (threads <= 1 || ranges.size() == 1) {
    for (std::size_t s = 0; s < ranges.size(); ++s) partial[s] = scan(ranges[s].first, ranges[s].second);
  } else {
    // Shards are processed in waves of at most `threads` tasks.
    for (std::size_t base = 0; base < ranges.size(); base += threads) {
      std::vector<std::future<std::vector<Hit>>> futs;
      for (std::size_t s = base; s < std::min(ranges.size(), base + threads); ++s)
        futs.push_back(std::async(std::launch::async, scan, ranges[s].first, ranges[s].second));
      for (std::size_t j = 0; j < futs.size(); ++j) partial[base + j] = futs[j].get();
    }
  }
  std::vector<Hit> merged;
  for (auto& p : partial) merged.insert(merged.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  keep_top(merged, k);
  return merged;
}

}  // namespace detail

/// Exact maximum inner product search. Returns min(k, N) hits, best first,
/// ties broken by ascending id.
inline std::vector<Hit> search(const EmbeddingIndex& index, std::span<const float> query, std::size_t k,
                               std::size_t threads = 1) {
  if (k == 0) throw Error("k must be >= 1");
  if (query.size() != index.dim()) throw Error("query dimension does not match index");
  return detail::sharded_top_k(index.shard_ranges(), index.ids(), k, threads,
                               [&](std::size_t i) { return dot(query, index.vector(i)); });
}

// ---------------------------------------------------------------------------
// File format: "RIDX" | u64 version | u32 dim | u8 precision | u64 N |
// N length-prefixed ids | N*dim scalars (float32 or float16 bits).

inline constexpr std::uint8_t kPrecisionPQ = 2;

namespace detail {

inline void write_index_header(std::ostream& out, std::uint64_t version, std::size_t dim, std::uint8_t precision,
                               const std::vector<std::string>& ids) {
  bin::put_magic(out, "RIDX");
  bin::put(out, version);
  bin::put(out, static_cast<std::uint32_t>(dim));
  bin::put(out, precision);
  bin::put(out, static_cast<std::uint64_t>(ids.size()));
  for (const auto& id : ids) bin::put_str(out, id);
}

struct IndexHeader {
  std::uint64_t version = 0;
  std::size_t dim = 0;
  std::uint8_t precision = 0;
  std::vector<std::string> ids;
};

inline IndexHeader read_index_header(std::istream& in) {
  bin::expect_magic(in, "RIDX");
  IndexHeader h;
  h.version = bin::get<std::uint64_t>(in);
  h.dim = bin::get<std::uint32_t>(in);
  h.precision = bin::get<std::uint8_t>(in);
  auto n = bin::get<std::uint64_t>(in);
  if (h.dim == 0 || h.precision > kPrecisionPQ) throw IOError("corrupt index header");
  h.ids.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
  for (std::uint64_t i = 0; i < n; ++i) h.ids.push_back(bin::get_str(in));
  return h;
}

}  // namespace detail

inline void write_index(std::ostream& out, const EmbeddingIndex& index) {
  detail::write_index_header(out, index.version(), index.dim(), static_cast<std::uint8_t>(index.precision()), index.ids());
  for (float v : index.data()) {
    if (index.precision() == Precision::float16)
      bin::put(out, std::bit_cast<std::uint16_t>(Eigen::half(v)));
    else
      bin::put_f32(out, v);
  }
}

inline void write_index(const std::string& path, const EmbeddingIndex& index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write '" + path + "'");
  write_index(out, index);
  if (!out) throw IOError("write failed for '" + path + "'");
}

inline EmbeddingIndex read_index(std::istream& in, std::size_t shards = 1) {
  auto h = detail::read_index_header(in);
  if (h.precision == kPrecisionPQ) throw IOError("file holds a PQ index; use read_pq_index");
  auto precision = static_cast<Precision>(h.precision);
  EmbeddingIndex idx(h.dim, precision, shards);
  std::vector<float> data(h.ids.size() * h.dim);
  for (float& v : data) {
    if (precision == Precision::float16)
      v = static_cast<float>(std::bit_cast<Eigen::half>(bin::get<std::uint16_t>(in)));
    else
      v = bin::get_f32(in);
  }
  idx.assign(std::move(h.ids), std::move(data));
  idx.set_version(h.version);
  return idx;
}

inline EmbeddingIndex read_index(const std::string& path, std::size_t shards = 1) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open '" + path + "'");
  return read_index(in, shards);
}

/// Peeks at the precision byte to tell exact and PQ files apart.
inline bool is_pq_index_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open '" + path + "'");
  bin::expect_magic(in, "RIDX");
  bin::get<std::uint64_t>(in);
  bin::get<std::uint32_t>(in);
  return bin::get<std::uint8_t>(in) == kPrecisionPQ;
}

}  // namespace ralab
