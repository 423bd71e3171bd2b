#pragma once

// Shared aliases, error types and small utilities used across mfield headers.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfield {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Vertex sets are sorted, duplicate-free index lists.
using VertexSet = std::vector<int>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Precondition and schema violations. The CLI maps these to exit code 2,
// as opposed to numerical check failures which exit with 1.
struct InvalidInput : Error {
  using Error::Error;
};

inline VertexSet make_vertex_set(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline bool set_contains(const VertexSet& s, int v) {
  return std::binary_search(s.begin(), s.end(), v);
}

inline VertexSet set_union(const VertexSet& a, const VertexSet& b) {
  VertexSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline VertexSet set_difference(const VertexSet& a, const VertexSet& b) {
  VertexSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline VertexSet set_intersection(const VertexSet& a, const VertexSet& b) {
  VertexSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline VertexSet set_complement(const VertexSet& a, int n) {
  VertexSet out;
  out.reserve(n - static_cast<int>(a.size()));
  std::size_t k = 0;
  for (int v = 0; v < n; ++v) {
    if (k < a.size() && a[k] == v) {
      ++k;
    } else {
      out.push_back(v);
    }
  }
  return out;
}

inline VertexSet support_of(const Vec& f, double atol = 0.0) {
  VertexSet out;
  for (int i = 0; i < f.size(); ++i) {
    if (std::abs(f[i]) > atol) out.push_back(i);
  }
  return out;
}

inline bool supported_in(const Vec& f, const VertexSet& a, double atol = 0.0) {
  for (int i = 0; i < f.size(); ++i) {
    if (std::abs(f[i]) > atol && !set_contains(a, i)) return false;
  }
  return true;
}

// FNV-1a over raw bytes; used for input fingerprints in reports.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

// splitmix64; used to derive per-configuration sub-seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace mfield
