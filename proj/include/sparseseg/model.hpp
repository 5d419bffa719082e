#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sparseseg/byte_io.hpp"
#include "sparseseg/error.hpp"

namespace sparseseg {

inline constexpr double kNormEpsilon = 1e-5;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct ResidualBlock {
  RowMatrix<Scalar> weight1;
  ColVector<Scalar> bias1, scale1, shift1;
  RowMatrix<Scalar> weight2;
  ColVector<Scalar> bias2, scale2, shift2;
};

/// Residual point classifier: input projection, N two-layer residual blocks
/// with per-vector normalisation, linear head.
template <typename Scalar>
struct BasicModelWeights {
  RowMatrix<Scalar> projection;
  ColVector<Scalar> projection_bias;
  std::vector<ResidualBlock<Scalar>> blocks;
  RowMatrix<Scalar> head;
  ColVector<Scalar> head_bias;
  std::vector<std::string> label_names;

  int input_dim() const { return static_cast<int>(projection.cols()); }
  int hidden_dim() const { return static_cast<int>(projection.rows()); }
  int num_classes() const { return static_cast<int>(head.rows()); }
  int num_blocks() const { return static_cast<int>(blocks.size()); }

  static BasicModelWeights zeros(int input_dim, int hidden_dim, int num_blocks,
                                 std::vector<std::string> label_names);

  void validate() const;

  template <typename Other>
  BasicModelWeights<Other> cast() const;
};

using ModelWeights = BasicModelWeights<float>;

struct ClassProbabilities {
  Eigen::VectorXf probs;
  int argmax_label = 0;
};

// --- forward pass ----------------------------------------------------------

template <typename Derived>
auto swish(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return v / (Scalar(1) + std::exp(-v)); });
}

/// Standardise across the hidden vector, then scale and shift.
template <typename Scalar>
ColVector<Scalar> normalize(const ColVector<Scalar>& x, const ColVector<Scalar>& scale,
                            const ColVector<Scalar>& shift) {
  const Scalar mean = x.mean();
  const ColVector<Scalar> centered = x.array() - mean;
  const Scalar variance = centered.squaredNorm() / Scalar(x.size());
  const Scalar inv_std = Scalar(1) / std::sqrt(variance + Scalar(kNormEpsilon));
  return (centered.array() * inv_std * scale.array() + shift.array()).matrix();
}

template <typename Scalar, typename Derived>
ColVector<Scalar> forward(const BasicModelWeights<Scalar>& w,
                          const Eigen::MatrixBase<Derived>& descriptor) {
  if (descriptor.size() != w.input_dim())
    throw Error(ErrorCode::DimensionMismatch,
                "descriptor has " + std::to_string(descriptor.size()) + " values, model expects " +
                    std::to_string(w.input_dim()));
  ColVector<Scalar> h = swish((w.projection * descriptor + w.projection_bias).eval());
  for (const auto& b : w.blocks) {
    const ColVector<Scalar> t =
        swish(normalize<Scalar>(b.weight1 * h + b.bias1, b.scale1, b.shift1));
    h += normalize<Scalar>(b.weight2 * t + b.bias2, b.scale2, b.shift2);
  }
  return w.head * h + w.head_bias;
}

/// Softmax with max subtraction; ties in argmax go to the lowest index.
ClassProbabilities softmax(const Eigen::Ref<const Eigen::VectorXf>& logits);

template <typename Derived>
ClassProbabilities predict(const ModelWeights& w, const Eigen::MatrixBase<Derived>& descriptor) {
  return softmax(forward(w, descriptor));
}

// --- ORGC serialisation ----------------------------------------------------

ModelWeights load_weights(io::ByteView bytes);
io::Bytes save_weights(const ModelWeights& w);
ModelWeights load_weights_file(const std::string& path);

/// Deterministic synthetic weights, He-style scaling for the linear layers
/// and unit scale / zero shift for the normalisations.
ModelWeights make_random_weights(int input_dim, int hidden_dim, int num_blocks,
                                 std::vector<std::string> label_names, std::uint64_t seed);

std::vector<std::string> default_label_names(int num_classes);

// --- template definitions --------------------------------------------------

template <typename Scalar>
BasicModelWeights<Scalar> BasicModelWeights<Scalar>::zeros(int input_dim, int hidden_dim,
                                                           int num_blocks,
                                                           std::vector<std::string> label_names) {
  BasicModelWeights w;
  const int classes = static_cast<int>(label_names.size());
  w.projection = RowMatrix<Scalar>::Zero(hidden_dim, input_dim);
  w.projection_bias = ColVector<Scalar>::Zero(hidden_dim);
  for (int i = 0; i < num_blocks; ++i) {
    ResidualBlock<Scalar> b;
    b.weight1 = RowMatrix<Scalar>::Zero(hidden_dim, hidden_dim);
    b.weight2 = RowMatrix<Scalar>::Zero(hidden_dim, hidden_dim);
    b.bias1 = b.scale1 = b.shift1 = b.bias2 = b.scale2 = b.shift2 =
        ColVector<Scalar>::Zero(hidden_dim);
    w.blocks.push_back(std::move(b));
  }
  w.head = RowMatrix<Scalar>::Zero(classes, hidden_dim);
  w.head_bias = ColVector<Scalar>::Zero(classes);
  w.label_names = std::move(label_names);
  return w;
}

template <typename Scalar>
void BasicModelWeights<Scalar>::validate() const {
  const auto fail = [](const std::string& what) {
    throw Error(ErrorCode::DimensionMismatch, what);
  };
  const Eigen::Index h = projection.rows();
  if (projection.cols() < 1 || h < 1) fail("projection must be non-empty");
  if (projection_bias.size() != h) fail("projection bias size");
  if (blocks.empty()) fail("at least one residual block required");
  for (const auto& b : blocks) {
    if (b.weight1.rows() != h || b.weight1.cols() != h || b.weight2.rows() != h ||
        b.weight2.cols() != h)
      fail("block weight shape");
    for (const auto* v : {&b.bias1, &b.scale1, &b.shift1, &b.bias2, &b.scale2, &b.shift2})
      if (v->size() != h) fail("block vector size");
  }
  if (head.rows() < 2) fail("at least two classes required");
  if (head.cols() != h || head_bias.size() != head.rows()) fail("head shape");
  if (static_cast<Eigen::Index>(label_names.size()) != head.rows())
    fail("label name count does not match class count");
}

template <typename Scalar>
template <typename Other>
BasicModelWeights<Other> BasicModelWeights<Scalar>::cast() const {
  BasicModelWeights<Other> w;
  w.projection = projection.template cast<Other>();
  w.projection_bias = projection_bias.template cast<Other>();
  for (const auto& b : blocks)
    w.blocks.push_back({b.weight1.template cast<Other>(), b.bias1.template cast<Other>(),
                        b.scale1.template cast<Other>(), b.shift1.template cast<Other>(),
                        b.weight2.template cast<Other>(), b.bias2.template cast<Other>(),
                        b.scale2.template cast<Other>(), b.shift2.template cast<Other>()});
  w.head = head.template cast<Other>();
  w.head_bias = head_bias.template cast<Other>();
  w.label_names = label_names;
  return w;
}

}  // namespace sparseseg
