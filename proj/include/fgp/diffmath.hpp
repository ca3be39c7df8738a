#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fgp/matrix.hpp"

namespace fgp {

// A trainable tensor. Lives outside any tape; tapes reference it and
// accumulate into `grad` on backward.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix(value.rows, value.cols);
  }
};

class Tape;

// Handle to a node on a tape. data() is the forward value, grad() the
// accumulated adjoint after backward().
struct DiffValue {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& data() const;
  const Matrix& grad() const;
  std::size_t rows() const { return data().rows; }
  std::size_t cols() const { return data().cols; }
  double scalar() const;  // value of a 1x1 node
};

// Record of one forward computation. Nodes are appended in execution order,
// which is already a topological order, so backward() simply replays the
// record in reverse. One backward per forward unless reset().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  DiffValue leaf(Matrix data);
  DiffValue constant(double v);                 // 1x1 leaf
  DiffValue param(Parameter& p);                // grads flow into p.grad

  DiffValue make_node(Matrix data, BackwardFn backward);

  void backward(DiffValue loss);
  void reset();

  std::size_t size() const { return nodes_.size(); }
  const Matrix& node_data(int id) const { return nodes_[static_cast<std::size_t>(id)].data; }
  Matrix& node_grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

 private:
  struct Node {
    Matrix data;
    Matrix grad;
    BackwardFn backward;
    Parameter* bound = nullptr;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;

  friend struct DiffValue;
};

// Elementwise and linear-algebra ops; every one records its backward rule.
DiffValue add(DiffValue a, DiffValue b);
DiffValue sub(DiffValue a, DiffValue b);
DiffValue mul_elem(DiffValue a, DiffValue b);
DiffValue matmul(DiffValue a, DiffValue b);
DiffValue concat_cols(DiffValue a, DiffValue b);
DiffValue relu(DiffValue a);                    // subgradient at 0 is 0
DiffValue square(DiffValue a);
DiffValue scalar_mul(double c, DiffValue a);
DiffValue sum(DiffValue a);                     // 1x1 total
DiffValue mean_all(DiffValue a);                // 1x1 mean over all entries
DiffValue mean_rows(DiffValue a);               // 1xC column means
DiffValue add_rowwise(DiffValue a, DiffValue row);  // broadcast 1xC over rows
DiffValue scale(DiffValue s, DiffValue a);      // 1x1 scalar times matrix

// Decoupled-weight-decay adaptive-moment update:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   p <- p - lr * mhat / (sqrt(vhat) + eps) - lr * wd * p
struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adamw_update(Matrix& value, const Matrix& grad, Matrix& m, Matrix& v,
                  const AdamWConfig& cfg, std::size_t t);

// Moment buffers are positional: pass the same parameter list every step.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg);
  void step(const std::vector<Parameter*>& params);
  std::size_t steps() const { return t_; }

 private:
  AdamWConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

void zero_grads(const std::vector<Parameter*>& params);

}  // namespace fgp
