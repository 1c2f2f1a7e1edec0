#pragma once

// Linear softmax probe over frozen embeddings, trained by mini-batch
// gradient descent on cross-entropy.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "repsel/common.hpp"
#include "repsel/dataset.hpp"

namespace repsel {

struct Classifier {
  std::uint32_t class_count = 0;
  std::uint32_t dimension = 0;
  /// Row-major class_count x dimension.
  std::vector<double> weights;
  std::vector<double> bias;
  std::uint64_t trained_on = 0;
  /// Mean full-set loss after each epoch.
  std::vector<double> loss_trace;

  Classifier() = default;
  Classifier(std::uint32_t classes, std::uint32_t dim)
      : class_count(classes), dimension(dim), weights(std::size_t{classes} * dim, 0.0), bias(classes, 0.0) {}

  std::span<const double> row(std::uint32_t c) const {
    return std::span<const double>(weights).subspan(std::size_t{c} * dimension, dimension);
  }
};

struct ProbeParams {
  std::uint32_t epochs = 50;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
  std::uint32_t batch_size = 64;
};

namespace detail {

template <typename V>
std::vector<double> softmax_of(const Classifier& clf, const V& x) {
  std::vector<double> z(clf.class_count);
  double top = -std::numeric_limits<double>::infinity();
  for (std::uint32_t c = 0; c < clf.class_count; ++c) {
    z[c] = dot(clf.row(c), x) + clf.bias[c];
    top = std::max(top, z[c]);
  }
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return z;
}

inline void check_compatible(const Classifier& clf, const EmbeddingSet& set) {
  if (clf.dimension != set.dimension())
    throw ValidationError("classifier dimension " + std::to_string(clf.dimension) + " != set dimension " +
                          std::to_string(set.dimension()));
  if (clf.class_count != set.class_count())
    throw ValidationError("classifier has " + std::to_string(clf.class_count) + " classes, set vocabulary has " +
                          std::to_string(set.class_count()));
}

}  // namespace detail

/// Class probabilities for a raw (not re-normalized) input.
inline std::vector<double> predict_proba(const Classifier& clf, std::span<const float> x) {
  if (x.size() != clf.dimension)
    throw ValidationError("input dimension " + std::to_string(x.size()) + " != classifier dimension " +
                          std::to_string(clf.dimension));
  return detail::softmax_of(clf, x);
}

inline std::vector<double> predict_proba(const Classifier& clf, std::span<const double> x) {
  if (x.size() != clf.dimension) throw ValidationError("input dimension does not match classifier");
  return detail::softmax_of(clf, x);
}

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_weights;
  std::vector<double> grad_bias;
};

/// Mean cross-entropy over (x, y) plus 0.5 * weight_decay * |W|^2, and its
/// gradient with respect to weights and bias.
inline LossGradient loss_and_gradient(const Classifier& clf, std::span<const std::vector<double>> x,
                                      std::span<const std::uint32_t> y, double weight_decay = 0.0) {
  LossGradient g;
  g.grad_weights.assign(clf.weights.size(), 0.0);
  g.grad_bias.assign(clf.class_count, 0.0);
  const double inv = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto p = detail::softmax_of(clf, x[i]);
    g.loss -= std::log(std::max(p[y[i]], 1e-300)) * inv;
    p[y[i]] -= 1.0;
    for (std::uint32_t c = 0; c < clf.class_count; ++c) {
      const double coef = p[c] * inv;
      g.grad_bias[c] += coef;
      double* row = g.grad_weights.data() + std::size_t{c} * clf.dimension;
      for (std::uint32_t j = 0; j < clf.dimension; ++j) row[j] += coef * x[i][j];
    }
  }
  if (weight_decay > 0.0) {
    for (std::size_t k = 0; k < clf.weights.size(); ++k) {
      g.loss += 0.5 * weight_decay * clf.weights[k] * clf.weights[k];
      g.grad_weights[k] += weight_decay * clf.weights[k];
    }
  }
  return g;
}

/// Unit-normalized copies of every record vector; probes only ever see
/// unit inputs.
inline std::vector<std::vector<double>> unit_inputs(const EmbeddingSet& set) {
  std::vector<std::vector<double>> x;
  x.reserve(set.size());
  for (const auto& r : set.records()) x.push_back(unit_vector(r.vector));
  return x;
}

inline Classifier train_probe(const EmbeddingSet& set, const ProbeParams& params) {
  if (set.empty()) throw ValidationError("cannot train a probe on an empty set");
  if (set.populated_class_count() < 2) throw ValidationError("probe training needs at least two classes");
  if (params.epochs == 0 || params.batch_size == 0) throw ValidationError("epochs and batch size must be positive");
  if (!(params.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");

  const auto x = unit_inputs(set);
  std::vector<std::uint32_t> y;
  y.reserve(set.size());
  for (const auto& r : set.records()) y.push_back(r.label);

  Classifier clf(static_cast<std::uint32_t>(set.class_count()), set.dimension());
  clf.trained_on = digest(set);
  Rng rng(params.seed);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<double>> bx;
  std::vector<std::uint32_t> by;
  for (std::uint32_t epoch = 0; epoch < params.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t end = std::min(order.size(), start + params.batch_size);
      bx.clear();
      by.clear();
      for (std::size_t i = start; i < end; ++i) {
        bx.push_back(x[order[i]]);
        by.push_back(y[order[i]]);
      }
      const auto g = loss_and_gradient(clf, bx, by, params.weight_decay);
      for (std::size_t k = 0; k < clf.weights.size(); ++k) clf.weights[k] -= params.learning_rate * g.grad_weights[k];
      for (std::size_t c = 0; c < clf.bias.size(); ++c) clf.bias[c] -= params.learning_rate * g.grad_bias[c];
    }
    clf.loss_trace.push_back(loss_and_gradient(clf, x, y, params.weight_decay).loss);
  }
  return clf;
}

/// Fraction of records whose most probable class equals the label.
inline double probe_accuracy(const Classifier& clf, const EmbeddingSet& set) {
  if (set.empty()) throw ValidationError("probe accuracy of an empty set is undefined");
  detail::check_compatible(clf, set);
  std::size_t hits = 0;
  for (const auto& r : set.records()) {
    const auto p = detail::softmax_of(clf, unit_vector(r.vector));
    const auto arg = static_cast<std::uint32_t>(std::max_element(p.begin(), p.end()) - p.begin());
    hits += arg == r.label ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

// PRB1: magic, u32 class_count, u32 dimension, f32 weights (row-major), f32 bias.

inline std::string serialize(const Classifier& clf) {
  std::string out = "PRB1";
  detail::put_le(out, clf.class_count);
  detail::put_le(out, clf.dimension);
  for (double w : clf.weights) detail::put_f32(out, static_cast<float>(w));
  for (double b : clf.bias) detail::put_f32(out, static_cast<float>(b));
  return out;
}

inline Classifier parse_classifier(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "PRB1") throw FormatError("bad magic, expected PRB1", 0);
  detail::Reader rd(bytes);
  rd.take(4, "magic");
  const auto classes = rd.get<std::uint32_t>("header");
  const auto dim = rd.get<std::uint32_t>("header");
  const std::size_t expected = 4 * (std::size_t{classes} * dim + classes);
  if (rd.remaining() != expected) throw FormatError("parameter block size does not match header", rd.offset());
  Classifier clf(classes, dim);
  for (auto& w : clf.weights) w = rd.get_f32("weights");
  for (auto& b : clf.bias) b = rd.get_f32("bias");
  for (double w : clf.weights)
    if (!std::isfinite(w)) throw FormatError("non-finite weight", 12);
  return clf;
}

inline void save_classifier(const Classifier& clf, const std::string& path) { detail::write_file(path, serialize(clf)); }
inline Classifier load_classifier(const std::string& path) { return parse_classifier(detail::read_file(path)); }

}  // namespace repsel
