#pragma once

#include <cmath>
#include <limits>
#include <random>

#include "ralab/index.hpp"

namespace ralab {

/// m codebooks of k_c centroids each; centroid j of subspace s lives at
/// centroids[(s * k_c + j) * dsub].
struct PQCodec {
  std::size_t dim = 0;
  std::size_t m = 0;
  std::size_t k_c = 0;
  std::vector<float> centroids;

  std::size_t dsub() const { return dim / m; }
  std::span<const float> centroid(std::size_t sub, std::size_t j) const {
    return {centroids.data() + (sub * k_c + j) * dsub(), dsub()};
  }
  /// ceil(log2 k_c), with a floor of one bit.
  std::size_t code_bits() const {
    std::size_t b = 0;
    while ((std::size_t{1} << b) < k_c) ++b;
    return std::max<std::size_t>(b, 1);
  }
  std::size_t codebook_bytes() const { return centroids.size() * sizeof(float); }

  void validate() const {
    if (m == 0 || dim % m != 0) throw Error("m must divide the dimension");
    if (k_c < 1 || k_c > (1u << 16)) throw Error("k_c must lie in [1, 65536]");
    if (centroids.size() != m * k_c * dsub()) throw Error("codebook size mismatch");
    for (float c : centroids)
      if (!std::isfinite(c)) throw Error("non-finite centroid");
  }
};

struct PQIndex {
  PQCodec codec;
  std::vector<std::string> ids;
  std::vector<std::uint16_t> codes;  // N x m
  std::uint64_t version = 0;
  std::size_t shards = 1;

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return codec.dim; }
  std::span<const std::uint16_t> code(std::size_t i) const { return {codes.data() + i * codec.m, codec.m}; }

  std::vector<float> decode(std::size_t i) const {
    std::vector<float> v;
    v.reserve(codec.dim);
    for (std::size_t s = 0; s < codec.m; ++s) {
      auto c = codec.centroid(s, code(i)[s]);
      v.insert(v.end(), c.begin(), c.end());
    }
    return v;
  }
};

struct PQTrainResult {
  PQCodec codec;
  // Sum of squared quantization errors over all subspaces, one value per
  // Lloyd iteration, measured at the assignment step.
  std::vector<double> objective;
};

namespace detail {

inline double sq_dist(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

inline std::size_t nearest_centroid(const float* x, const float* cents, std::size_t k_c, std::size_t dsub, double* err) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k_c; ++j) {
    double d = sq_dist(x, cents + j * dsub, dsub);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  if (err) *err = best_d;
  return best;
}

// k-means++ seeding followed by Lloyd iterations on one subspace. Empty
// clusters keep their previous centroid. Returns per-iteration objectives.
inline std::vector<double> kmeans_subspace(const std::vector<float>& sub, std::size_t n, std::size_t dsub,
                                           std::size_t k_c, std::size_t iterations, std::mt19937_64& rng,
                                           float* cents) {
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (std::size_t j = 0; j < k_c; ++j) {
    std::size_t pick = first;
    if (j > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total > 0.0) {
        double r = std::uniform_real_distribution<double>(0.0, total)(rng);
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          r -= d2[i];
          if (r <= 0.0) {
            pick = i;
            break;
          }
        }
        if (d2[pick] <= 0.0) {
          // Rounding ran past the last positive weight.
          for (std::size_t i = n; i-- > 0;)
            if (d2[i] > 0.0) {
              pick = i;
              break;
            }
        }
      } else {
        // Every point coincides with a centroid; reuse an unchosen one.
        pick = 0;
        while (pick < n && chosen[pick]) ++pick;
        if (pick == n) pick = 0;
      }
    }
    chosen[pick] = 1;
    std::copy_n(sub.data() + pick * dsub, dsub, cents + j * dsub);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(sub.data() + i * dsub, cents + j * dsub, dsub));
  }

  std::vector<double> objective;
  std::vector<std::size_t> assign(n);
  std::vector<double> sums(k_c * dsub);
  std::vector<std::size_t> counts(k_c);
  for (std::size_t it = 0; it < iterations; ++it) {
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      assign[i] = nearest_centroid(sub.data() + i * dsub, cents, k_c, dsub, &e);
      obj += e;
    }
    objective.push_back(obj);
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t c = 0; c < dsub; ++c) sums[assign[i] * dsub + c] += sub[i * dsub + c];
    }
    for (std::size_t j = 0; j < k_c; ++j) {
      if (counts[j] == 0) continue;
      for (std::size_t c = 0; c < dsub; ++c)
        cents[j * dsub + c] = static_cast<float>(sums[j * dsub + c] / static_cast<double>(counts[j]));
    }
  }
  return objective;
}

}  // namespace detail

inline PQTrainResult train_pq_traced(const EmbeddingIndex& index, std::size_t m, std::size_t k_c,
                                     std::size_t iterations = 20, std::uint64_t seed = 0) {
  if (m == 0 || index.dim() % m != 0) throw Error("m must divide the dimension");
  if (k_c < 1 || k_c > (1u << 16)) throw Error("k_c must lie in [1, 65536]");
  if (k_c > index.size()) throw Error("insufficient data");
  PQTrainResult res;
  PQCodec& codec = res.codec;
  codec.dim = index.dim();
  codec.m = m;
  codec.k_c = k_c;
  const std::size_t n = index.size(), dsub = codec.dsub();
  codec.centroids.assign(m * k_c * dsub, 0.0f);
  std::mt19937_64 rng(seed);
  std::vector<float> sub(n * dsub);
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      auto v = index.vector(i);
      std::copy_n(v.data() + s * dsub, dsub, sub.data() + i * dsub);
    }
    auto obj = detail::kmeans_subspace(sub, n, dsub, k_c, std::max<std::size_t>(iterations, 1), rng,
                                       codec.centroids.data() + s * k_c * dsub);
    if (res.objective.empty()) res.objective.assign(obj.size(), 0.0);
    for (std::size_t i = 0; i < obj.size(); ++i) res.objective[i] += obj[i];
  }
  return res;
}

inline PQCodec train_pq(const EmbeddingIndex& index, std::size_t m, std::size_t k_c, std::size_t iterations = 20,
                        std::uint64_t seed = 0) {
  return train_pq_traced(index, m, k_c, iterations, seed).codec;
}

inline PQIndex compress(const EmbeddingIndex& index, const PQCodec& codec) {
  codec.validate();
  if (codec.dim != index.dim()) throw Error("codec dimension does not match index");
  PQIndex out;
  out.codec = codec;
  out.ids = index.ids();
  out.version = index.version();
  out.shards = index.shards();
  out.codes.resize(index.size() * codec.m);
  const std::size_t dsub = codec.dsub();
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto v = index.vector(i);
    for (std::size_t s = 0; s < codec.m; ++s)
      out.codes[i * codec.m + s] = static_cast<std::uint16_t>(
          detail::nearest_centroid(v.data() + s * dsub, codec.centroids.data() + s * codec.k_c * dsub, codec.k_c, dsub, nullptr));
  }
  return out;
}

/// Asymmetric search: per-subspace tables of query . centroid, summed over codes.
inline std::vector<Hit> pq_search(const PQIndex& index, std::span<const float> query, std::size_t k,
                                  std::size_t threads = 1) {
  if (k == 0) throw Error("k must be >= 1");
  if (query.size() != index.dim()) throw Error("query dimension does not match index");
  const auto& c = index.codec;
  const std::size_t dsub = c.dsub();
  std::vector<float> lut(c.m * c.k_c);
  for (std::size_t s = 0; s < c.m; ++s)
    for (std::size_t j = 0; j < c.k_c; ++j) lut[s * c.k_c + j] = dot(query.subspan(s * dsub, dsub), c.centroid(s, j));
  auto ranges = balanced_ranges(index.size(), index.shards);
  return detail::sharded_top_k(ranges, index.ids, k, threads, [&](std::size_t i) {
    float s = 0.0f;
    auto code = index.code(i);
    for (std::size_t sub = 0; sub < c.m; ++sub) s += lut[sub * c.k_c + code[sub]];
    return s;
  });
}

/// Mean over queries of |approx top-k  ∩  exact top-k| / k.
inline double recall_at_k(std::span<const std::vector<Hit>> approx, std::span<const std::vector<Hit>> exact, std::size_t k) {
  if (approx.size() != exact.size()) throw Error("result lists cover different query sets");
  if (approx.empty() || k == 0) return 0.0;
  double total = 0.0;
  for (std::size_t q = 0; q < approx.size(); ++q) {
    std::vector<std::string> a, e;
    for (std::size_t i = 0; i < std::min(k, approx[q].size()); ++i) a.push_back(approx[q][i].id);
    for (std::size_t i = 0; i < std::min(k, exact[q].size()); ++i) e.push_back(exact[q][i].id);
    std::sort(a.begin(), a.end());
    std::sort(e.begin(), e.end());
    std::vector<std::string> both;
    std::set_intersection(a.begin(), a.end(), e.begin(), e.end(), std::back_inserter(both));
    total += static_cast<double>(both.size()) / static_cast<double>(k);
  }
  return total / static_cast<double>(approx.size());
}

// ---------------------------------------------------------------------------
// Memory accounting

struct MemoryAccounting {
  double uncompressed_bytes = 0.0;
  double compressed_bytes = 0.0;
  double ratio() const { return uncompressed_bytes / compressed_bytes; }
};

/// N*dim*bytes_per_scalar versus N*m*ceil(log2 k_c)/8 plus codebooks.
inline MemoryAccounting pq_memory(std::size_t n, std::size_t dim, Precision precision, std::size_t m, std::size_t k_c,
                                  bool include_codebooks = true) {
  PQCodec shape{dim, m, k_c, {}};
  if (m == 0 || dim % m != 0) throw Error("m must divide the dimension");
  MemoryAccounting acc;
  acc.uncompressed_bytes = static_cast<double>(n) * static_cast<double>(dim) * static_cast<double>(bytes_per_scalar(precision));
  acc.compressed_bytes = static_cast<double>(n) * static_cast<double>(m) * static_cast<double>(shape.code_bits()) / 8.0;
  if (include_codebooks) acc.compressed_bytes += static_cast<double>(m * k_c * (dim / m) * sizeof(float));
  return acc;
}

inline MemoryAccounting pq_memory(const PQIndex& idx, Precision baseline = Precision::float16) {
  return pq_memory(idx.size(), idx.dim(), baseline, idx.codec.m, idx.codec.k_c);
}

/// Per-vector compression factor, codebooks excluded.
inline double pq_compression_factor(std::size_t dim, Precision precision, std::size_t m, std::size_t k_c) {
  return pq_memory(1, dim, precision, m, k_c, false).ratio();
}

/// Projects a known uncompressed size through a PQ setting.
inline double projected_compressed_bytes(double uncompressed_bytes, std::size_t dim, Precision precision, std::size_t m,
                                         std::size_t k_c) {
  return uncompressed_bytes / pq_compression_factor(dim, precision, m, k_c);
}

// ---------------------------------------------------------------------------
// PQ file: index header with precision byte 2, then u32 m | u32 k_c |
// centroids (float32) | N*m u16 codes.

inline void write_pq_index(std::ostream& out, const PQIndex& idx) {
  detail::write_index_header(out, idx.version, idx.dim(), kPrecisionPQ, idx.ids);
  bin::put(out, static_cast<std::uint32_t>(idx.codec.m));
  bin::put(out, static_cast<std::uint32_t>(idx.codec.k_c));
  for (float c : idx.codec.centroids) bin::put_f32(out, c);
  for (auto code : idx.codes) bin::put(out, code);
}

inline void write_pq_index(const std::string& path, const PQIndex& idx) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write '" + path + "'");
  write_pq_index(out, idx);
  if (!out) throw IOError("write failed for '" + path + "'");
}

inline PQIndex read_pq_index(std::istream& in, std::size_t shards = 1) {
  auto h = detail::read_index_header(in);
  if (h.precision != kPrecisionPQ) throw IOError("file holds an exact index; use read_index");
  PQIndex idx;
  idx.version = h.version;
  idx.ids = std::move(h.ids);
  idx.shards = shards;
  idx.codec.dim = h.dim;
  idx.codec.m = bin::get<std::uint32_t>(in);
  idx.codec.k_c = bin::get<std::uint32_t>(in);
  if (idx.codec.m == 0 || h.dim % idx.codec.m != 0 || idx.codec.k_c == 0 || idx.codec.k_c > (1u << 16))
    throw IOError("corrupt PQ codec header");
  idx.codec.centroids.resize(idx.codec.m * idx.codec.k_c * idx.codec.dsub());
  for (float& c : idx.codec.centroids) c = bin::get_f32(in);
  idx.codes.resize(idx.ids.size() * idx.codec.m);
  for (auto& code : idx.codes) {
    code = bin::get<std::uint16_t>(in);
    if (code >= idx.codec.k_c) throw IOError("PQ code out of range");
  }
  return idx;
}

inline PQIndex read_pq_index(const std::string& path, std::size_t shards = 1) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open '" + path + "'");
  return read_pq_index(in, shards);
}

}  // namespace ralab
