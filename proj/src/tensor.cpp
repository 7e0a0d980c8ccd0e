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

#include "pivotc/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "pivotc/errors.hpp"
#include "pivotc/parallel.hpp"

namespace pivotc::ad {

namespace {

std::atomic<std::uint64_t> g_next_id{0};

std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ")";
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
}

NodePtr make_node(int rows, int cols, bool requires_grad) {
  return std::make_shared<Node>(rows, cols, requires_grad);
}

// Builds a unary elementwise op; deriv(x, y) is d(out)/d(in) per element.
template <typename Fwd, typename Deriv>
Tensor unary_op(const Tensor& a, Fwd fwd, Deriv deriv) {
  NodePtr out = make_node(a.rows(), a.cols(), a.requires_grad());
  const auto& x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) out->data[i] = fwd(x[i]);
  out->parents = {a.node()};
  if (out->requires_grad) {
    NodePtr an = a.node();
    Node* o = out.get();
    out->backward_fn = [an, o, deriv] {
      an->ensure_grad();
      for (std::size_t i = 0; i < o->data.size(); ++i)
        an->grad[i] += o->grad[i] * deriv(an->data[i], o->data[i]);
    };
  }
  return Tensor(out);
}

}  // namespace

Node::Node(int r, int c, bool rg)
    : rows(r),
      cols(c),
      data(static_cast<std::size_t>(r) * c, 0.0),
      requires_grad(rg),
      id(g_next_id.fetch_add(1, std::memory_order_relaxed)) {
  if (r < 0 || c < 0) throw ShapeError("negative tensor dimension");
}

void Node::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  return Tensor(make_node(rows, cols, requires_grad));
}

Tensor Tensor::full(int rows, int cols, double value, bool requires_grad) {
  NodePtr n = make_node(rows, cols, requires_grad);
  std::fill(n->data.begin(), n->data.end(), value);
  return Tensor(n);
}

Tensor Tensor::from_data(int rows, int cols, std::vector<double> data, bool requires_grad) {
  if (data.size() != static_cast<std::size_t>(rows) * cols)
    throw ShapeError("from_data: " + std::to_string(data.size()) + " values for (" +
                     std::to_string(rows) + "x" + std::to_string(cols) + ")");
  NodePtr n = make_node(rows, cols, requires_grad);
  n->data = std::move(data);
  return Tensor(n);
}

Tensor Tensor::kaiming(int rows, int cols, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  NodePtr n = make_node(rows, cols, true);
  for (double& v : n->data) v = rng.next_double(-bound, bound);
  return Tensor(n);
}

double Tensor::value() const {
  if (rows() != 1 || cols() != 1)
    throw ShapeError("value() needs a 1x1 tensor, got " + shape_str(*this));
  return node_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

// ---- binary elementwise ----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  NodePtr out = make_node(a.rows(), a.cols(), a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a.data()[i] + b.data()[i];
  out->parents = {a.node(), b.node()};
  if (out->requires_grad) {
    NodePtr an = a.node(), bn = b.node();
    Node* o = out.get();
    out->backward_fn = [an, bn, o] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] += o->grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  NodePtr out = make_node(a.rows(), a.cols(), a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a.data()[i] - b.data()[i];
  out->parents = {a.node(), b.node()};
  if (out->requires_grad) {
    NodePtr an = a.node(), bn = b.node();
    Node* o = out.get();
    out->backward_fn = [an, bn, o] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] -= o->grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  NodePtr out = make_node(a.rows(), a.cols(), a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a.data()[i] * b.data()[i];
  out->parents = {a.node(), b.node()};
  if (out->requires_grad) {
    NodePtr an = a.node(), bn = b.node();
    Node* o = out.get();
    out->backward_fn = [an, bn, o] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] += o->grad[i] * an->data[i];
      }
    };
  }
  return Tensor(out);
}

Tensor scale(const Tensor& a, double c) {
  return unary_op(
      a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor add_rowwise(const Tensor& mat, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != mat.cols())
    throw ShapeError("add_rowwise: " + shape_str(mat) + " vs " + shape_str(row));
  const int R = mat.rows(), C = mat.cols();
  NodePtr out = make_node(R, C, mat.requires_grad() || row.requires_grad());
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      out->data[static_cast<std::size_t>(r) * C + c] =
          mat.data()[static_cast<std::size_t>(r) * C + c] + row.data()[c];
  out->parents = {mat.node(), row.node()};
  if (out->requires_grad) {
    NodePtr mn = mat.node(), rn = row.node();
    Node* o = out.get();
    out->backward_fn = [mn, rn, o, R, C] {
      if (mn->requires_grad) {
        mn->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i) mn->grad[i] += o->grad[i];
      }
      if (rn->requires_grad) {
        rn->ensure_grad();
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c) rn->grad[c] += o->grad[static_cast<std::size_t>(r) * C + c];
      }
    };
  }
  return Tensor(out);
}

Tensor mul_colwise(const Tensor& mat, const Tensor& col) {
  if (col.cols() != 1 || col.rows() != mat.rows())
    throw ShapeError("mul_colwise: " + shape_str(mat) + " vs " + shape_str(col));
  const int R = mat.rows(), C = mat.cols();
  NodePtr out = make_node(R, C, mat.requires_grad() || col.requires_grad());
  for (int r = 0; r < R; ++r) {
    const double s = col.data()[r];
    for (int c = 0; c < C; ++c)
      out->data[static_cast<std::size_t>(r) * C + c] =
          mat.data()[static_cast<std::size_t>(r) * C + c] * s;
  }
  out->parents = {mat.node(), col.node()};
  if (out->requires_grad) {
    NodePtr mn = mat.node(), cn = col.node();
    Node* o = out.get();
    out->backward_fn = [mn, cn, o, R, C] {
      if (mn->requires_grad) {
        mn->ensure_grad();
        for (int r = 0; r < R; ++r) {
          const double s = cn->data[r];
          for (int c = 0; c < C; ++c)
            mn->grad[static_cast<std::size_t>(r) * C + c] +=
                o->grad[static_cast<std::size_t>(r) * C + c] * s;
        }
      }
      if (cn->requires_grad) {
        cn->ensure_grad();
        for (int r = 0; r < R; ++r) {
          double acc = 0;
          for (int c = 0; c < C; ++c)
            acc += o->grad[static_cast<std::size_t>(r) * C + c] *
                   mn->data[static_cast<std::size_t>(r) * C + c];
          cn->grad[r] += acc;
        }
      }
    };
  }
  return Tensor(out);
}

Tensor mul_rowwise(const Tensor& mat, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != mat.cols())
    throw ShapeError("mul_rowwise: " + shape_str(mat) + " vs " + shape_str(row));
  const int R = mat.rows(), C = mat.cols();
  NodePtr out = make_node(R, C, mat.requires_grad() || row.requires_grad());
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      out->data[static_cast<std::size_t>(r) * C + c] =
          mat.data()[static_cast<std::size_t>(r) * C + c] * row.data()[c];
  out->parents = {mat.node(), row.node()};
  if (out->requires_grad) {
    NodePtr mn = mat.node(), rn = row.node();
    Node* o = out.get();
    out->backward_fn = [mn, rn, o, R, C] {
      if (mn->requires_grad) {
        mn->ensure_grad();
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c)
            mn->grad[static_cast<std::size_t>(r) * C + c] +=
                o->grad[static_cast<std::size_t>(r) * C + c] * rn->data[c];
      }
      if (rn->requires_grad) {
        rn->ensure_grad();
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c)
            rn->grad[c] += o->grad[static_cast<std::size_t>(r) * C + c] *
                           mn->data[static_cast<std::size_t>(r) * C + c];
      }
    };
  }
  return Tensor(out);
}

// ---- matmul ----------------------------------------------------------------

namespace {

// C (R x N) += A (R x K) @ B (K x N), row-major, i-k-j loop order.
// Each output row is independent, so the row-parallel version is
// bit-identical to the sequential one.
void matmul_accumulate(const double* a, const double* b, double* c, int R, int K, int N) {
  auto row_job = [&](std::size_t r) {
    const double* arow = a + r * K;
    double* crow = c + r * N;
    for (int k = 0; k < K; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(k) * N;
      for (int n = 0; n < N; ++n) crow[n] += av * brow[n];
    }
  };
  const double work = static_cast<double>(R) * K * N;
  if (work > 2e5 && thread_count() > 1)
    parallel_for(static_cast<std::size_t>(R), row_job);
  else
    for (int r = 0; r < R; ++r) row_job(r);
}

// C (R x N) += A^T-less variant: C[k][n] += sum_r A[r][k] * B[r][n],
// i.e. C (K x N) += A^T (K x R) @ B (R x N). Parallel over k.
void matmul_at_b(const double* a, const double* b, double* c, int R, int K, int N) {
  auto row_job = [&](std::size_t k) {
    double* crow = c + k * N;
    for (int r = 0; r < R; ++r) {
      const double av = a[static_cast<std::size_t>(r) * K + k];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(r) * N;
      for (int n = 0; n < N; ++n) crow[n] += av * brow[n];
    }
  };
  const double work = static_cast<double>(R) * K * N;
  if (work > 2e5 && thread_count() > 1)
    parallel_for(static_cast<std::size_t>(K), row_job);
  else
    for (int k = 0; k < K; ++k) row_job(k);
}

// C (R x K) += A (R x N) @ B^T (N x K) with B given as (K x N). Parallel rows.
void matmul_a_bt(const double* a, const double* b, double* c, int R, int N, int K) {
  auto row_job = [&](std::size_t r) {
    const double* arow = a + r * N;
    double* crow = c + r * K;
    for (int k = 0; k < K; ++k) {
      const double* brow = b + static_cast<std::size_t>(k) * N;
      double acc = 0;
      for (int n = 0; n < N; ++n) acc += arow[n] * brow[n];
      crow[k] += acc;
    }
  };
  const double work = static_cast<double>(R) * K * N;
  if (work > 2e5 && thread_count() > 1)
    parallel_for(static_cast<std::size_t>(R), row_job);
  else
    for (int r = 0; r < R; ++r) row_job(r);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a) + " @ " +
                     shape_str(b));
  const int R = a.rows(), K = a.cols(), N = b.cols();
  NodePtr out = make_node(R, N, a.requires_grad() || b.requires_grad());
  matmul_accumulate(a.data().data(), b.data().data(), out->data.data(), R, K, N);
  out->parents = {a.node(), b.node()};
  if (out->requires_grad) {
    NodePtr an = a.node(), bn = b.node();
    Node* o = out.get();
    out->backward_fn = [an, bn, o, R, K, N] {
      if (an->requires_grad) {
        an->ensure_grad();
        // dA += dC @ B^T
        matmul_a_bt(o->grad.data(), bn->data.data(), an->grad.data(), R, N, K);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        // dB += A^T @ dC
        matmul_at_b(an->data.data(), o->grad.data(), bn->grad.data(), R, K, N);
      }
    };
  }
  return Tensor(out);
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "row_dot");
  const int R = a.rows(), C = a.cols();
  NodePtr out = make_node(R, 1, a.requires_grad() || b.requires_grad());
  for (int r = 0; r < R; ++r) {
    double acc = 0;
    for (int c = 0; c < C; ++c)
      acc += a.data()[static_cast<std::size_t>(r) * C + c] *
             b.data()[static_cast<std::size_t>(r) * C + c];
    out->data[r] = acc;
  }
  out->parents = {a.node(), b.node()};
  if (out->requires_grad) {
    NodePtr an = a.node(), bn = b.node();
    Node* o = out.get();
    out->backward_fn = [an, bn, o, R, C] {
      for (int r = 0; r < R; ++r) {
        const double g = o->grad[r];
        if (an->requires_grad) {
          an->ensure_grad();
          for (int c = 0; c < C; ++c)
            an->grad[static_cast<std::size_t>(r) * C + c] +=
                g * bn->data[static_cast<std::size_t>(r) * C + c];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int c = 0; c < C; ++c)
            bn->grad[static_cast<std::size_t>(r) * C + c] +=
                g * an->data[static_cast<std::size_t>(r) * C + c];
        }
      }
    };
  }
  return Tensor(out);
}

// ---- unary elementwise ------------------------------------------------------

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor tanh_t(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a,
      [](double x) {
        return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a,
      [](double x) {
        if (x > 30.0) return x;
        if (x < -30.0) return std::exp(x);
        return std::log1p(std::exp(x));
      },
      [](double x, double) {
        return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      });
}

Tensor log_t(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor exp_t(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt_t(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

// ---- reductions and structure ----------------------------------------------

Tensor softmax_rows(const Tensor& a) {
  const int R = a.rows(), C = a.cols();
  NodePtr out = make_node(R, C, a.requires_grad());
  for (int r = 0; r < R; ++r) {
    const double* x = a.data().data() + static_cast<std::size_t>(r) * C;
    double* y = out->data.data() + static_cast<std::size_t>(r) * C;
    double mx = x[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, x[c]);
    double sum = 0;
    for (int c = 0; c < C; ++c) {
      y[c] = std::exp(x[c] - mx);
      sum += y[c];
    }
    for (int c = 0; c < C; ++c) y[c] /= sum;
  }
  out->parents = {a.node()};
  if (out->requires_grad) {
    NodePtr an = a.node();
    Node* o = out.get();
    out->backward_fn = [an, o, R, C] {
      an->ensure_grad();
      for (int r = 0; r < R; ++r) {
        const double* y = o->data.data() + static_cast<std::size_t>(r) * C;
        const double* dy = o->grad.data() + static_cast<std::size_t>(r) * C;
        double dot = 0;
        for (int c = 0; c < C; ++c) dot += y[c] * dy[c];
        double* dx = an->grad.data() + static_cast<std::size_t>(r) * C;
        for (int c = 0; c < C; ++c) dx[c] += y[c] * (dy[c] - dot);
      }
    };
  }
  return Tensor(out);
}

Tensor sum_all(const Tensor& a) {
  NodePtr out = make_node(1, 1, a.requires_grad());
  double acc = 0;
  for (double v : a.data()) acc += v;
  out->data[0] = acc;
  out->parents = {a.node()};
  if (out->requires_grad) {
    NodePtr an = a.node();
    Node* o = out.get();
    out->backward_fn = [an, o] {
      an->ensure_grad();
      for (double& g : an->grad) g += o->grad[0];
    };
  }
  return Tensor(out);
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean_all of an empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_axis(const Tensor& a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("sum_axis: axis must be 0 or 1");
  const int R = a.rows(), C = a.cols();
  const int out_r = axis == 0 ? 1 : R;
  const int out_c = axis == 0 ? C : 1;
  NodePtr out = make_node(out_r, out_c, a.requires_grad());
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) {
      const double v = a.data()[static_cast<std::size_t>(r) * C + c];
      out->data[axis == 0 ? c : r] += v;
    }
  out->parents = {a.node()};
  if (out->requires_grad) {
    NodePtr an = a.node();
    Node* o = out.get();
    out->backward_fn = [an, o, R, C, axis] {
      an->ensure_grad();
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c)
          an->grad[static_cast<std::size_t>(r) * C + c] += o->grad[axis == 0 ? c : r];
    };
  }
  return Tensor(out);
}

Tensor max_rows(const Tensor& a, std::vector<int>* argmax_out) {
  const int R = a.rows(), C = a.cols();
  if (C == 0) throw ShapeError("max_rows of zero-column tensor");
  NodePtr out = make_node(R, 1, a.requires_grad());
  auto argmax = std::make_shared<std::vector<int>>(R);
  for (int r = 0; r < R; ++r) {
    const double* x = a.data().data() + static_cast<std::size_t>(r) * C;
    int best = 0;
    for (int c = 1; c < C; ++c)
      if (x[c] > x[best]) best = c;
    (*argmax)[r] = best;
    out->data[r] = x[best];
  }
  if (argmax_out) *argmax_out = *argmax;
  out->parents = {a.node()};
  if (out->requires_grad) {
    NodePtr an = a.node();
    Node* o = out.get();
    out->backward_fn = [an, o, argmax, C] {
      an->ensure_grad();
      for (int r = 0; r < o->rows; ++r)
        an->grad[static_cast<std::size_t>(r) * C + (*argmax)[r]] += o->grad[r];
    };
  }
  return Tensor(out);
}

Tensor block_max(const Tensor& a, int block_size) {
  const int R = a.rows(), C = a.cols();
  if (block_size < 1 || R % block_size != 0)
    throw ShapeError("block_max: " + std::to_string(R) + " rows not divisible by block " +
                     std::to_string(block_size));
  const int B = R / block_size;
  NodePtr out = make_node(B, C, a.requires_grad());
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(B) * C);
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      int best = b * block_size;
      double bv = a.data()[static_cast<std::size_t>(best) * C + c];
      for (int r = b * block_size + 1; r < (b + 1) * block_size; ++r) {
        const double v = a.data()[static_cast<std::size_t>(r) * C + c];
        if (v > bv) {
          bv = v;
          best = r;
        }
      }
      (*argmax)[static_cast<std::size_t>(b) * C + c] = best;
      out->data[static_cast<std::size_t>(b) * C + c] = bv;
    }
  }
  out->parents = {a.node()};
  if (out->requires_grad) {
    NodePtr an = a.node();
    Node* o = out.get();
    out->backward_fn = [an, o, argmax, C] {
      an->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        const int src = (*argmax)[i];
        an->grad[static_cast<std::size_t>(src) * C + (i % C)] += o->grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const int C = parts[0].cols();
  int R = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.cols() != C) throw ShapeError("concat_rows: column mismatch");
    R += p.rows();
    rg = rg || p.requires_grad();
  }
  NodePtr out = make_node(R, C, rg);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out->data.begin() + off);
    off += p.data().size();
    out->parents.push_back(p.node());
  }
  if (rg) {
    Node* o = out.get();
    auto parents = out->parents;
    out->backward_fn = [o, parents] {
      std::size_t off = 0;
      for (const NodePtr& p : parents) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t i = 0; i < p->data.size(); ++i) p->grad[i] += o->grad[off + i];
        }
        off += p->data.size();
      }
    };
  }
  return Tensor(out);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const int R = parts[0].rows();
  int C = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.rows() != R) throw ShapeError("concat_cols: row mismatch");
    C += p.cols();
    rg = rg || p.requires_grad();
  }
  NodePtr out = make_node(R, C, rg);
  int coff = 0;
  for (const Tensor& p : parts) {
    for (int r = 0; r < R; ++r)
      std::copy(p.data().begin() + static_cast<std::size_t>(r) * p.cols(),
                p.data().begin() + static_cast<std::size_t>(r + 1) * p.cols(),
                out->data.begin() + static_cast<std::size_t>(r) * C + coff);
    coff += p.cols();
    out->parents.push_back(p.node());
  }
  if (rg) {
    Node* o = out.get();
    auto parents = out->parents;
    out->backward_fn = [o, parents, R, C] {
      int coff = 0;
      for (const NodePtr& p : parents) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (int r = 0; r < R; ++r)
            for (int c = 0; c < p->cols; ++c)
              p->grad[static_cast<std::size_t>(r) * p->cols + c] +=
                  o->grad[static_cast<std::size_t>(r) * C + coff + c];
        }
        coff += p->cols;
      }
    };
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& a, int rows, int cols) {
  if (static_cast<std::size_t>(rows) * cols != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a) + " as (" +
                     std::to_string(rows) + "x" + std::to_string(cols) + ")");
  NodePtr out = make_node(rows, cols, a.requires_grad());
  out->data = a.data();
  out->parents = {a.node()};
  if (out->requires_grad) {
    NodePtr an = a.node();
    Node* o = out.get();
    out->backward_fn = [an, o] {
      an->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
    };
  }
  return Tensor(out);
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices) {
  const int C = a.cols();
  NodePtr out = make_node(static_cast<int>(indices.size()), C, a.requires_grad());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int src = indices[i];
    if (src < 0) continue;  // zero row
    if (src >= a.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy(a.data().begin() + static_cast<std::size_t>(src) * C,
              a.data().begin() + static_cast<std::size_t>(src + 1) * C,
              out->data.begin() + i * C);
  }
  out->parents = {a.node()};
  if (out->requires_grad) {
    NodePtr an = a.node();
    Node* o = out.get();
    auto idx = std::make_shared<std::vector<int>>(indices);
    out->backward_fn = [an, o, idx, C] {
      an->ensure_grad();
      for (std::size_t i = 0; i < idx->size(); ++i) {
        const int src = (*idx)[i];
        if (src < 0) continue;
        for (int c = 0; c < C; ++c)
          an->grad[static_cast<std::size_t>(src) * C + c] += o->grad[i * C + c];
      }
    };
  }
  return Tensor(out);
}

Tensor scatter_add_rows(const Tensor& a, const std::vector<int>& indices, int out_rows) {
  if (indices.size() != static_cast<std::size_t>(a.rows()))
    throw ShapeError("scatter_add_rows: index count " + std::to_string(indices.size()) +
                     " vs " + std::to_string(a.rows()) + " rows");
  const int C = a.cols();
  NodePtr out = make_node(out_rows, C, a.requires_grad());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int dst = indices[i];
    if (dst < 0 || dst >= out_rows) throw ShapeError("scatter_add_rows: index out of range");
    for (int c = 0; c < C; ++c)
      out->data[static_cast<std::size_t>(dst) * C + c] += a.data()[i * C + c];
  }
  out->parents = {a.node()};
  if (out->requires_grad) {
    NodePtr an = a.node();
    Node* o = out.get();
    auto idx = std::make_shared<std::vector<int>>(indices);
    out->backward_fn = [an, o, idx, C] {
      an->ensure_grad();
      for (std::size_t i = 0; i < idx->size(); ++i)
        for (int c = 0; c < C; ++c)
          an->grad[i * C + c] += o->grad[static_cast<std::size_t>((*idx)[i]) * C + c];
    };
  }
  return Tensor(out);
}

Tensor gather_matmul(const Tensor& feats, const Tensor& weight, const Tensor& bias,
                     const std::vector<int>& indices, int taps) {
  const int Cin = feats.cols();
  const int Cout = weight.cols();
  if (weight.rows() != taps * Cin)
    throw ShapeError("gather_matmul: weight " + shape_str(weight) + " does not match " +
                     std::to_string(taps) + " taps x " + std::to_string(Cin) + " channels");
  if (bias.rows() != 1 || bias.cols() != Cout)
    throw ShapeError("gather_matmul: bias " + shape_str(bias) + " vs " +
                     std::to_string(Cout) + " outputs");
  if (indices.size() % taps != 0) throw ShapeError("gather_matmul: ragged index table");
  const int N = static_cast<int>(indices.size()) / taps;
  for (int idx : indices)
    if (idx >= feats.rows()) throw ShapeError("gather_matmul: index out of range");

  NodePtr out =
      make_node(N, Cout, feats.requires_grad() || weight.requires_grad() || bias.requires_grad());
  {
    const double* f = feats.data().data();
    const double* w = weight.data().data();
    const double* b = bias.data().data();
    double* y = out->data.data();
    auto row_job = [&](std::size_t i) {
      double* yrow = y + i * Cout;
      for (int c = 0; c < Cout; ++c) yrow[c] = b[c];
      for (int t = 0; t < taps; ++t) {
        const int src = indices[i * taps + t];
        if (src < 0) continue;
        const double* frow = f + static_cast<std::size_t>(src) * Cin;
        const double* wblock = w + static_cast<std::size_t>(t) * Cin * Cout;
        for (int k = 0; k < Cin; ++k) {
          const double fv = frow[k];
          if (fv == 0.0) continue;
          const double* wrow = wblock + static_cast<std::size_t>(k) * Cout;
          for (int c = 0; c < Cout; ++c) yrow[c] += fv * wrow[c];
        }
      }
    };
    const double work = static_cast<double>(N) * taps * Cin * Cout;
    if (work > 2e5 && thread_count() > 1)
      parallel_for(static_cast<std::size_t>(N), row_job);
    else
      for (int i = 0; i < N; ++i) row_job(i);
  }

  out->parents = {feats.node(), weight.node(), bias.node()};
  if (out->requires_grad) {
    NodePtr fn = feats.node(), wn = weight.node(), bn = bias.node();
    Node* o = out.get();
    auto idx = std::make_shared<std::vector<int>>(indices);
    out->backward_fn = [fn, wn, bn, o, idx, taps, Cin, Cout, N] {
      const double* dout = o->grad.data();
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int i = 0; i < N; ++i)
          for (int c = 0; c < Cout; ++c) bn->grad[c] += dout[static_cast<std::size_t>(i) * Cout + c];
      }
      if (wn->requires_grad) {
        wn->ensure_grad();
        // dW[t*Cin + k][c] += f[idx[i][t]][k] * dout[i][c]; parallel over taps.
        const double* f = fn->data.data();
        double* dw = wn->grad.data();
        auto tap_job = [&](std::size_t t) {
          double* dwblock = dw + t * Cin * Cout;
          for (int i = 0; i < N; ++i) {
            const int src = (*idx)[static_cast<std::size_t>(i) * taps + t];
            if (src < 0) continue;
            const double* frow = f + static_cast<std::size_t>(src) * Cin;
            const double* drow = dout + static_cast<std::size_t>(i) * Cout;
            for (int k = 0; k < Cin; ++k) {
              const double fv = frow[k];
              if (fv == 0.0) continue;
              double* dwrow = dwblock + static_cast<std::size_t>(k) * Cout;
              for (int c = 0; c < Cout; ++c) dwrow[c] += fv * drow[c];
            }
          }
        };
        if (static_cast<double>(N) * taps * Cin * Cout > 2e5 && thread_count() > 1)
          parallel_for(static_cast<std::size_t>(taps), tap_job);
        else
          for (int t = 0; t < taps; ++t) tap_job(t);
      }
      if (fn->requires_grad) {
        fn->ensure_grad();
        // Reverse adjacency so each feature row is written by exactly one
        // task; keeps the reduction order fixed.
        std::vector<int> counts(fn->rows + 1, 0);
        for (int v : *idx)
          if (v >= 0) ++counts[v + 1];
        for (int r = 0; r < fn->rows; ++r) counts[r + 1] += counts[r];
        std::vector<std::pair<int, int>> rev(idx->size());  // (i, t) pairs
        {
          std::vector<int> cursor(counts.begin(), counts.end() - 1);
          for (std::size_t p = 0; p < idx->size(); ++p) {
            const int v = (*idx)[p];
            if (v < 0) continue;
            rev[cursor[v]++] = {static_cast<int>(p / taps), static_cast<int>(p % taps)};
          }
        }
        const double* w = wn->data.data();
        double* df = fn->grad.data();
        auto feat_job = [&](std::size_t r) {
          double* dfrow = df + r * Cin;
          for (int p = counts[r]; p < counts[r + 1]; ++p) {
            const auto [i, t] = rev[p];
            const double* drow = dout + static_cast<std::size_t>(i) * Cout;
            const double* wblock = w + static_cast<std::size_t>(t) * Cin * Cout;
            for (int k = 0; k < Cin; ++k) {
              const double* wrow = wblock + static_cast<std::size_t>(k) * Cout;
              double acc = 0;
              for (int c = 0; c < Cout; ++c) acc += wrow[c] * drow[c];
              dfrow[k] += acc;
            }
          }
        };
        if (static_cast<double>(N) * taps * Cin * Cout > 2e5 && thread_count() > 1)
          parallel_for(static_cast<std::size_t>(fn->rows), feat_job);
        else
          for (int r = 0; r < fn->rows; ++r) feat_job(r);
      }
    };
  }
  return Tensor(out);
}

// ---- backward driver --------------------------------------------------------

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_str(loss));
  if (!loss.requires_grad()) return;

  // Iterative DFS collecting the reachable subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack = {loss.node().get()};
  seen.insert(stack[0]);
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const NodePtr& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  // Creation order is a topological order of the DAG.
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });

  loss.node()->ensure_grad();
  loss.node()->grad[0] = 1.0;
  for (Node* n : order) {
    if (n->backward_fn && !n->grad.empty()) n->backward_fn();
  }
}

void zero_grad(const std::vector<Tensor>& params) {
  for (const Tensor& p : params) {
    p.node()->ensure_grad();
    std::fill(p.node()->grad.begin(), p.node()->grad.end(), 0.0);
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw ShapeError("adam_step: state tracks a different parameter list");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Node* n = params[i].node().get();
    n->ensure_grad();
    if (state.m[i].size() != n->data.size())
      throw ShapeError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
    for (std::size_t j = 0; j < n->data.size(); ++j) {
      const double g = n->grad[j];
      if (!std::isfinite(g))
        throw DivergedError("non-finite gradient in parameter " + std::to_string(i));
      state.m[i][j] = state.beta1 * state.m[i][j] + (1.0 - state.beta1) * g;
      state.v[i][j] = state.beta2 * state.v[i][j] + (1.0 - state.beta2) * g * g;
      const double mhat = state.m[i][j] / bc1;
      const double vhat = state.v[i][j] / bc2;
      n->data[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace pivotc::ad
