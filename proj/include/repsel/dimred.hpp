#pragma once

// PCA projection used as the dimensionality reducer ahead of homogeneity
// scoring and clustering. Retrieval never runs in the reduced space.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repsel/common.hpp"
#include "repsel/dataset.hpp"

namespace repsel {

struct Projection {
  std::uint32_t n_components = 0;
  std::uint32_t dimension = 0;
  std::vector<double> mean;
  /// Row-major n_components x dimension, orthonormal rows.
  std::vector<double> components;
  /// Eigenvalues of the covariance for the kept components, descending.
  std::vector<double> explained_variance;

  std::span<const double> component(std::uint32_t c) const {
    return std::span<const double>(components).subspan(std::size_t{c} * dimension, dimension);
  }
};

/// Principal components of the mean-centred data (covariance divides by
/// n - 1). Each row's largest-magnitude entry is made positive.
inline Projection fit_projection(const EmbeddingSet& set, std::uint32_t n_components) {
  if (n_components == 0) throw ValidationError("n_components must be positive");
  if (n_components > set.dimension())
    throw ValidationError("n_components " + std::to_string(n_components) + " exceeds dimension " +
                          std::to_string(set.dimension()));
  if (set.size() < 2) throw ValidationError("fitting a projection needs at least two records");

  const Eigen::Index n = static_cast<Eigen::Index>(set.size());
  const Eigen::Index d = set.dimension();
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = set[static_cast<std::size_t>(i)].vector[static_cast<std::size_t>(j)];
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");

  Projection p;
  p.n_components = n_components;
  p.dimension = set.dimension();
  p.mean.assign(mu.data(), mu.data() + d);
  // Eigen returns ascending eigenvalues.
  for (std::uint32_t c = 0; c < n_components; ++c) {
    const Eigen::Index col = d - 1 - c;
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.components.insert(p.components.end(), v.data(), v.data() + d);
    p.explained_variance.push_back(std::max(0.0, solver.eigenvalues()(col)));
  }
  return p;
}

inline std::vector<double> project(const Projection& p, std::span<const float> v) {
  std::vector<double> centred(p.dimension);
  for (std::size_t j = 0; j < centred.size(); ++j) centred[j] = static_cast<double>(v[j]) - p.mean[j];
  std::vector<double> out(p.n_components);
  for (std::uint32_t c = 0; c < p.n_components; ++c) out[c] = dot(p.component(c), centred);
  return out;
}

/// Maps every record to (v - mean) * components^T; ids, labels and split
/// tags carry over.
inline EmbeddingSet transform(const Projection& p, const EmbeddingSet& set) {
  if (set.dimension() != p.dimension)
    throw ValidationError("set dimension " + std::to_string(set.dimension()) + " != projection dimension " +
                          std::to_string(p.dimension));
  std::vector<EmbeddingRecord> out;
  out.reserve(set.size());
  for (const auto& r : set.records()) {
    const auto y = project(p, r.vector);
    out.push_back({r.id, std::vector<float>(y.begin(), y.end()), r.label, r.split});
  }
  return EmbeddingSet(p.n_components, set.vocabulary(), std::move(out));
}

// PRJ1: magic, u32 n_components, u32 dimension, f32 mean, row-major f32 components.

inline std::string serialize(const Projection& p) {
  std::string out = "PRJ1";
  detail::put_le(out, p.n_components);
  detail::put_le(out, p.dimension);
  for (double m : p.mean) detail::put_f32(out, static_cast<float>(m));
  for (double c : p.components) detail::put_f32(out, static_cast<float>(c));
  return out;
}

inline Projection parse_projection(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "PRJ1") throw FormatError("bad magic, expected PRJ1", 0);
  detail::Reader rd(bytes);
  rd.take(4, "magic");
  Projection p;
  p.n_components = rd.get<std::uint32_t>("header");
  p.dimension = rd.get<std::uint32_t>("header");
  if (p.n_components == 0 || p.n_components > p.dimension) throw FormatError("invalid component count", 4);
  if (rd.remaining() != 4 * (std::size_t{p.dimension} + std::size_t{p.n_components} * p.dimension))
    throw FormatError("payload size does not match header", rd.offset());
  p.mean.resize(p.dimension);
  for (auto& m : p.mean) m = rd.get_f32("mean");
  p.components.resize(std::size_t{p.n_components} * p.dimension);
  for (auto& c : p.components) c = rd.get_f32("components");
  return p;
}

inline void save_projection(const Projection& p, const std::string& path) { detail::write_file(path, serialize(p)); }
inline Projection load_projection(const std::string& path) { return parse_projection(detail::read_file(path)); }

}  // namespace repsel
