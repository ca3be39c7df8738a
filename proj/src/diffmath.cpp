#include "fgp/diffmath.hpp"

#include <cmath>

namespace fgp {

namespace {

void require_same_tape(DiffValue a, DiffValue b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw Error("ShapeMismatch", "operands live on different tapes");
}

}  // namespace

const Matrix& DiffValue::data() const { return tape->node_data(id); }
const Matrix& DiffValue::grad() const { return tape->node_grad(id); }

double DiffValue::scalar() const {
  const Matrix& m = data();
  if (m.rows != 1 || m.cols != 1) throw Error("ShapeMismatch", "scalar() on non-1x1 value");
  return m.values[0];
}

DiffValue Tape::leaf(Matrix data) {
  Node n;
  n.grad = Matrix(data.rows, data.cols);
  n.data = std::move(data);
  nodes_.push_back(std::move(n));
  return DiffValue{this, static_cast<int>(nodes_.size()) - 1};
}

DiffValue Tape::constant(double v) { return leaf(Matrix(1, 1, v)); }

DiffValue Tape::param(Parameter& p) {
  Node n;
  n.data = p.value;
  n.grad = Matrix(p.value.rows, p.value.cols);
  n.bound = &p;
  nodes_.push_back(std::move(n));
  return DiffValue{this, static_cast<int>(nodes_.size()) - 1};
}

DiffValue Tape::make_node(Matrix data, BackwardFn backward) {
  Node n;
  n.grad = Matrix(data.rows, data.cols);
  n.data = std::move(data);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return DiffValue{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(DiffValue loss) {
  if (loss.tape != this || loss.id < 0) throw Error("NotScalarLoss", "loss not on this tape");
  const Matrix& l = node_data(loss.id);
  if (l.rows != 1 || l.cols != 1)
    throw Error("NotScalarLoss", "loss must be 1x1, got " + std::to_string(l.rows) + "x" +
                                     std::to_string(l.cols));
  if (backward_done_) throw Error("TapeReused", "backward already ran; reset() first");
  backward_done_ = true;

  nodes_[static_cast<std::size_t>(loss.id)].grad.values[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward) n.backward(*this, id);
    if (n.bound) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.bound->grad.values[i] += n.grad.values[i];
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

DiffValue add(DiffValue a, DiffValue b) {
  require_same_tape(a, b);
  require_same_shape(a.data(), b.data(), "add");
  Matrix out = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += b.data().values[i];
  const int ia = a.id, ib = b.id;
  return a.tape->make_node(std::move(out), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    Matrix& ga = t.node_grad(ia);
    Matrix& gb = t.node_grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.values[i] += g.values[i];
      gb.values[i] += g.values[i];
    }
  });
}

DiffValue sub(DiffValue a, DiffValue b) {
  require_same_tape(a, b);
  require_same_shape(a.data(), b.data(), "sub");
  Matrix out = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= b.data().values[i];
  const int ia = a.id, ib = b.id;
  return a.tape->make_node(std::move(out), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    Matrix& ga = t.node_grad(ia);
    Matrix& gb = t.node_grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.values[i] += g.values[i];
      gb.values[i] -= g.values[i];
    }
  });
}

DiffValue mul_elem(DiffValue a, DiffValue b) {
  require_same_tape(a, b);
  require_same_shape(a.data(), b.data(), "mul_elem");
  Matrix out = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= b.data().values[i];
  const int ia = a.id, ib = b.id;
  return a.tape->make_node(std::move(out), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    const Matrix& da = t.node_data(ia);
    const Matrix& db = t.node_data(ib);
    Matrix& ga = t.node_grad(ia);
    Matrix& gb = t.node_grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.values[i] += g.values[i] * db.values[i];
      gb.values[i] += g.values[i] * da.values[i];
    }
  });
}

DiffValue matmul(DiffValue a, DiffValue b) {
  require_same_tape(a, b);
  Matrix out = matmul(a.data(), b.data());
  const int ia = a.id, ib = b.id;
  return a.tape->make_node(std::move(out), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    const Matrix& da = t.node_data(ia);
    const Matrix& db = t.node_data(ib);
    // dA += G B^T ; dB += A^T G
    Matrix ga = matmul(g, transpose(db));
    Matrix gb = matmul(transpose(da), g);
    Matrix& accum_a = t.node_grad(ia);
    Matrix& accum_b = t.node_grad(ib);
    for (std::size_t i = 0; i < ga.size(); ++i) accum_a.values[i] += ga.values[i];
    for (std::size_t i = 0; i < gb.size(); ++i) accum_b.values[i] += gb.values[i];
  });
}

DiffValue concat_cols(DiffValue a, DiffValue b) {
  require_same_tape(a, b);
  const Matrix& ma = a.data();
  const Matrix& mb = b.data();
  if (ma.rows != mb.rows) throw Error("ShapeMismatch", "concat_cols: row counts differ");
  Matrix out(ma.rows, ma.cols + mb.cols);
  for (std::size_t i = 0; i < ma.rows; ++i) {
    for (std::size_t j = 0; j < ma.cols; ++j) out.at(i, j) = ma.at(i, j);
    for (std::size_t j = 0; j < mb.cols; ++j) out.at(i, ma.cols + j) = mb.at(i, j);
  }
  const int ia = a.id, ib = b.id;
  const std::size_t ca = ma.cols;
  return a.tape->make_node(std::move(out), [ia, ib, ca](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    Matrix& ga = t.node_grad(ia);
    Matrix& gb = t.node_grad(ib);
    for (std::size_t i = 0; i < g.rows; ++i) {
      for (std::size_t j = 0; j < ca; ++j) ga.at(i, j) += g.at(i, j);
      for (std::size_t j = ca; j < g.cols; ++j) gb.at(i, j - ca) += g.at(i, j);
    }
  });
}

DiffValue relu(DiffValue a) {
  Matrix out = a.data();
  for (double& v : out.values) v = v > 0.0 ? v : 0.0;
  const int ia = a.id;
  return a.tape->make_node(std::move(out), [ia](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    const Matrix& da = t.node_data(ia);
    Matrix& ga = t.node_grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (da.values[i] > 0.0) ga.values[i] += g.values[i];
    }
  });
}

DiffValue square(DiffValue a) {
  Matrix out = a.data();
  for (double& v : out.values) v *= v;
  const int ia = a.id;
  return a.tape->make_node(std::move(out), [ia](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    const Matrix& da = t.node_data(ia);
    Matrix& ga = t.node_grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += 2.0 * g.values[i] * da.values[i];
  });
}

DiffValue scalar_mul(double c, DiffValue a) {
  Matrix out = a.data();
  for (double& v : out.values) v *= c;
  const int ia = a.id;
  return a.tape->make_node(std::move(out), [ia, c](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    Matrix& ga = t.node_grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += c * g.values[i];
  });
}

DiffValue sum(DiffValue a) {
  double total = 0.0;
  for (double v : a.data().values) total += v;
  const int ia = a.id;
  return a.tape->make_node(Matrix(1, 1, total), [ia](Tape& t, int self) {
    const double g = t.node_grad(self).values[0];
    Matrix& ga = t.node_grad(ia);
    for (double& v : ga.values) v += g;
  });
}

DiffValue mean_all(DiffValue a) {
  const Matrix& m = a.data();
  if (m.empty()) throw Error("ShapeMismatch", "mean_all of empty matrix");
  double total = 0.0;
  for (double v : m.values) total += v;
  const double inv = 1.0 / static_cast<double>(m.size());
  const int ia = a.id;
  return a.tape->make_node(Matrix(1, 1, total * inv), [ia, inv](Tape& t, int self) {
    const double g = t.node_grad(self).values[0] * inv;
    Matrix& ga = t.node_grad(ia);
    for (double& v : ga.values) v += g;
  });
}

DiffValue mean_rows(DiffValue a) {
  const Matrix& m = a.data();
  if (m.rows == 0) throw Error("ShapeMismatch", "mean_rows of empty matrix");
  Matrix out(1, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out.values[j] += m.at(i, j);
  const double inv = 1.0 / static_cast<double>(m.rows);
  for (double& v : out.values) v *= inv;
  const int ia = a.id;
  return a.tape->make_node(std::move(out), [ia, inv](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    Matrix& ga = t.node_grad(ia);
    for (std::size_t i = 0; i < ga.rows; ++i)
      for (std::size_t j = 0; j < ga.cols; ++j) ga.at(i, j) += g.values[j] * inv;
  });
}

DiffValue add_rowwise(DiffValue a, DiffValue row) {
  require_same_tape(a, row);
  const Matrix& m = a.data();
  const Matrix& r = row.data();
  if (r.rows != 1 || r.cols != m.cols)
    throw Error("ShapeMismatch", "add_rowwise expects a 1x" + std::to_string(m.cols) + " row");
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out.at(i, j) += r.values[j];
  const int ia = a.id, ir = row.id;
  return a.tape->make_node(std::move(out), [ia, ir](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    Matrix& ga = t.node_grad(ia);
    Matrix& gr = t.node_grad(ir);
    for (std::size_t i = 0; i < g.rows; ++i)
      for (std::size_t j = 0; j < g.cols; ++j) {
        ga.at(i, j) += g.at(i, j);
        gr.values[j] += g.at(i, j);
      }
  });
}

DiffValue scale(DiffValue s, DiffValue a) {
  require_same_tape(s, a);
  const Matrix& ms = s.data();
  if (ms.rows != 1 || ms.cols != 1) throw Error("ShapeMismatch", "scale expects a 1x1 scalar");
  const double c = ms.values[0];
  Matrix out = a.data();
  for (double& v : out.values) v *= c;
  const int is = s.id, ia = a.id;
  return a.tape->make_node(std::move(out), [is, ia, c](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    const Matrix& da = t.node_data(ia);
    Matrix& ga = t.node_grad(ia);
    double ds = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.values[i] += c * g.values[i];
      ds += g.values[i] * da.values[i];
    }
    t.node_grad(is).values[0] += ds;
  });
}

void adamw_update(Matrix& value, const Matrix& grad, Matrix& m, Matrix& v,
                  const AdamWConfig& cfg, std::size_t t) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad.values[i];
    m.values[i] = cfg.beta1 * m.values[i] + (1.0 - cfg.beta1) * g;
    v.values[i] = cfg.beta2 * v.values[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = m.values[i] / bc1;
    const double vhat = v.values[i] / bc2;
    const double prev = value.values[i];
    value.values[i] = prev - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps) -
                      cfg.lr * cfg.weight_decay * prev;
  }
}

AdamW::AdamW(AdamWConfig cfg) : cfg_(cfg) {
  if (!(cfg.lr > 0.0)) throw Error("InvalidHyperparameter", "lr must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw Error("InvalidHyperparameter", "betas must be in [0, 1)");
  if (!(cfg.eps > 0.0)) throw Error("InvalidHyperparameter", "eps must be positive");
  if (cfg.weight_decay < 0.0) throw Error("InvalidHyperparameter", "weight_decay must be >= 0");
}

void AdamW::step(const std::vector<Parameter*>& params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.rows, p->value.cols);
      v_.emplace_back(p->value.rows, p->value.cols);
    }
  }
  if (m_.size() != params.size())
    throw Error("InvalidHyperparameter", "parameter list changed between steps");
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adamw_update(params[i]->value, params[i]->grad, m_[i], v_[i], cfg_, t_);
  }
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params)
    for (double& v : p->grad.values) v = 0.0;
}

}  // namespace fgp
