// Copyright (c) the pivotc authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PIVOTC_TENSOR_HPP_
#define PIVOTC_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pivotc/rng.hpp"

namespace pivotc::ad {

// Reverse-mode autodiff over dense 2D float64 tensors with a dynamic tape:
// every op records a backward closure on the node it creates, and
// backward(loss) replays them in reverse creation order. Graphs are
// rebuilt per forward pass; only parameters persist across passes.

class Node;
using NodePtr = std::shared_ptr<Node>;

class Node {
 public:
  Node(int rows, int cols, bool requires_grad);

  int rows;
  int cols;
  std::vector<double> data;
  std::vector<double> grad;  // same length as data once touched by backward
  bool requires_grad;
  std::vector<NodePtr> parents;
  // Propagates this->grad into the parents' grads (additively).
  std::function<void()> backward_fn;
  const std::uint64_t id;  // creation order; backward runs ids descending

  void ensure_grad();
};

// Value-semantic handle; copies share the node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor full(int rows, int cols, double value, bool requires_grad = false);
  static Tensor from_data(int rows, int cols, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v) { return from_data(1, 1, {v}); }
  // Kaiming-uniform in [-sqrt(6/fan_in), sqrt(6/fan_in)].
  static Tensor kaiming(int rows, int cols, int fan_in, Rng& rng);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  std::size_t size() const { return node_->data.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  double at(int r, int c) const { return node_->data[static_cast<std::size_t>(r) * node_->cols + c]; }
  double value() const;  // 1x1 tensors only

  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& mutable_data() { return node_->data; }
  const std::vector<double>& grad() const;

  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

// ---- elementwise and structural primitives -------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
// mat (N x C) + row (1 x C), broadcast over rows.
Tensor add_rowwise(const Tensor& mat, const Tensor& row);
// mat (N x C) * col (N x 1), each row scaled by its entry.
Tensor mul_colwise(const Tensor& mat, const Tensor& col);
// mat (N x C) * row (1 x C), each column scaled by its entry.
Tensor mul_rowwise(const Tensor& mat, const Tensor& row);

Tensor matmul(const Tensor& a, const Tensor& b);
// (N x C) x (N x C) -> (N x 1) row-wise dot products.
Tensor row_dot(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt_t(const Tensor& a);

// Row-wise softmax with max-subtraction stabilization.
Tensor softmax_rows(const Tensor& a);

Tensor sum_all(const Tensor& a);   // 1x1
Tensor mean_all(const Tensor& a);  // 1x1
// axis 0 -> (1 x C) column sums; axis 1 -> (N x 1) row sums.
Tensor sum_axis(const Tensor& a, int axis);
// Row maxima (axis 1) with argmax; gradient flows to the first maximum.
Tensor max_rows(const Tensor& a, std::vector<int>* argmax = nullptr);
// Rows grouped into consecutive blocks of block_size (rows % block_size == 0);
// per-block, per-column maximum. Backbone of PointNet-style max pooling.
Tensor block_max(const Tensor& a, int block_size);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
// Same data, new shape (row-major order preserved).
Tensor reshape(const Tensor& a, int rows, int cols);

// out[i] = a[indices[i]]; index -1 yields a zero row.
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices);
// out has out_rows rows; out[indices[i]] += a[i]. Indices must be valid.
Tensor scatter_add_rows(const Tensor& a, const std::vector<int>& indices, int out_rows);

// Fused neighborhood transform: with T taps and weight (T*C_in x C_out),
//   out[i] = bias + sum_t feats[indices[i*T + t]] @ weight[t*C_in : (t+1)*C_in]
// where index -1 skips the tap. This is the workhorse of sparse convolution;
// it avoids materializing the (N x T*C_in) gathered matrix.
Tensor gather_matmul(const Tensor& feats, const Tensor& weight, const Tensor& bias,
                     const std::vector<int>& indices, int taps);

// ---- autodiff driver ------------------------------------------------------

// Populates grads of every parameter reachable from loss (a 1x1 tensor).
void backward(const Tensor& loss);

void zero_grad(const std::vector<Tensor>& params);

// ---- optimizer -------------------------------------------------------------

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Standard bias-corrected Adam update, in place. Throws DivergedError on a
// non-finite gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

}  // namespace pivotc::ad

#endif  // PIVOTC_TENSOR_HPP_
