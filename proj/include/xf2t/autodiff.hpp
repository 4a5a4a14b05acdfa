#pragma once

// Minimal tape-based reverse-mode differentiation over dense row-major
// matrices. Rows are token positions, columns are features.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace xf2t::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Handle to a node on a Graph.
struct Var {
  size_t id = SIZE_MAX;
};

/// Layout of a batched attention call. Query row b*queries+i attends over
/// key rows b*keys+j for which key_valid[b*keys+j] is set (and j <= i when
/// causal).
struct AttentionLayout {
  size_t batch = 0;
  size_t queries = 0;
  size_t keys = 0;
  size_t heads = 1;
  bool causal = false;
  std::vector<uint8_t> key_valid;
};

class Graph {
 public:
  /// A graph built with record=false keeps no backward closures; use it for
  /// inference.
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  const Matrix& value(Var v) const { return nodes_.at(v.id).value(); }

  /// Accumulated gradient; an empty matrix means the node received none.
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }

  Var constant(Matrix m) { return push(std::move(m), false); }

  /// Leaf that receives gradients. The graph references `m` without copying,
  /// so it must outlive the graph.
  Var parameter(const Matrix& m) {
    Node n;
    n.external = &m;
    n.needs_grad = record_;
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  Var add(Var a, Var b) {
    const Matrix& x = value(a);
    const Matrix& y = value(b);
    check_same_shape(x, y, "add");
    Var out = push(x + y, needs(a) || needs(b));
    on_backward(out, [this, a, b, out] {
      const Matrix& g = nodes_[out.id].grad;
      accumulate(a, g);
      accumulate(b, g);
    });
    return out;
  }

  /// x + bias broadcast over rows; bias is [1 × cols].
  Var add_row(Var x, Var bias) {
    const Matrix& xv = value(x);
    const Matrix& bv = value(bias);
    if (bv.rows() != 1 || bv.cols() != xv.cols()) throw shape_error("add_row", xv, bv);
    Matrix y = xv;
    y.rowwise() += bv.row(0);
    Var out = push(std::move(y), needs(x) || needs(bias));
    on_backward(out, [this, x, bias, out] {
      const Matrix& g = nodes_[out.id].grad;
      accumulate(x, g);
      if (needs(bias)) accumulate(bias, Matrix(g.colwise().sum()));
    });
    return out;
  }

  Var matmul(Var a, Var b) {
    const Matrix& x = value(a);
    const Matrix& w = value(b);
    if (x.cols() != w.rows()) throw shape_error("matmul", x, w);
    Matrix y = x * w;
    Var out = push(std::move(y), needs(a) || needs(b));
    on_backward(out, [this, a, b, out] {
      const Matrix& g = nodes_[out.id].grad;
      if (needs(a)) accumulate(a, Matrix(g * value(b).transpose()));
      if (needs(b)) accumulate(b, Matrix(value(a).transpose() * g));
    });
    return out;
  }

  /// a · bᵀ without materializing the transpose.
  Var matmul_transposed(Var a, Var b) {
    const Matrix& x = value(a);
    const Matrix& w = value(b);
    if (x.cols() != w.cols()) throw shape_error("matmul_transposed", x, w);
    Matrix y = x * w.transpose();
    Var out = push(std::move(y), needs(a) || needs(b));
    on_backward(out, [this, a, b, out] {
      const Matrix& g = nodes_[out.id].grad;
      if (needs(a)) accumulate(a, Matrix(g * value(b)));
      if (needs(b)) accumulate(b, Matrix(g.transpose() * value(a)));
    });
    return out;
  }

  /// Row gather: out.row(i) = table.row(ids[i]).
  Var gather_rows(Var table, std::vector<int32_t> ids) {
    const Matrix& t = value(table);
    Matrix y(static_cast<Eigen::Index>(ids.size()), t.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= t.rows()) {
        throw std::out_of_range("gather_rows: index " + std::to_string(ids[i]) +
                                " out of range for " + std::to_string(t.rows()) + " rows");
      }
      y.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
    }
    Var out = push(std::move(y), needs(table));
    on_backward(out, [this, table, out, ids = std::move(ids)] {
      const Matrix& g = nodes_[out.id].grad;
      Matrix& tg = grad_buffer(table);
      for (size_t i = 0; i < ids.size(); ++i) {
        tg.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
      }
    });
    return out;
  }

  /// Per-row layer normalization with learned gain and bias ([1 × cols]).
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
    const Matrix& xv = value(x);
    const Matrix& gv = value(gain);
    const Matrix& bv = value(bias);
    if (gv.cols() != xv.cols() || bv.cols() != xv.cols()) throw shape_error("layer_norm", xv, gv);
    const Eigen::Index n = xv.rows();
    const double d = static_cast<double>(xv.cols());
    Matrix xhat(n, xv.cols());
    Eigen::VectorXd rstd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = xv.row(i).mean();
      const double var = (xv.row(i).array() - mu).square().sum() / d;
      rstd(i) = 1.0 / std::sqrt(var + eps);
      xhat.row(i) = (xv.row(i).array() - mu) * rstd(i);
    }
    Matrix y = xhat;
    y.array().rowwise() *= gv.row(0).array();
    y.rowwise() += bv.row(0);
    Var out = push(std::move(y), needs(x) || needs(gain) || needs(bias));
    on_backward(out, [this, x, gain, bias, out, xhat = std::move(xhat), rstd = std::move(rstd),
                      d] {
      const Matrix& g = nodes_[out.id].grad;
      if (needs(gain)) accumulate(gain, Matrix((g.array() * xhat.array()).colwise().sum()));
      if (needs(bias)) accumulate(bias, Matrix(g.colwise().sum()));
      if (!needs(x)) return;
      Matrix dxhat = g;
      dxhat.array().rowwise() *= value(gain).row(0).array();
      Matrix dx(g.rows(), g.cols());
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const double m1 = dxhat.row(i).sum() / d;
        const double m2 = dxhat.row(i).dot(xhat.row(i)) / d;
        dx.row(i) = rstd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
      }
      accumulate(x, dx);
    });
    return out;
  }

  /// GELU, tanh approximation.
  Var gelu(Var x) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    const Matrix& xv = value(x);
    Matrix y = xv.unaryExpr([](double v) {
      return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
    });
    Var out = push(std::move(y), needs(x));
    on_backward(out, [this, x, out] {
      const Matrix& g = nodes_[out.id].grad;
      Matrix dy = value(x).unaryExpr([](double v) {
        const double u = c * (v + 0.044715 * v * v * v);
        const double t = std::tanh(u);
        const double du = c * (1.0 + 3.0 * 0.044715 * v * v);
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      });
      accumulate(x, Matrix(g.array() * dy.array()));
    });
    return out;
  }

  /// Inverted dropout; identity when rate is zero.
  Var dropout(Var x, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return x;
    const Matrix& xv = value(x);
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    Matrix mask(xv.rows(), xv.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
    Var out = push(Matrix(xv.array() * mask.array()), needs(x));
    on_backward(out, [this, x, out, mask = std::move(mask)] {
      accumulate(x, Matrix(nodes_[out.id].grad.array() * mask.array()));
    });
    return out;
  }

  /// Scaled dot-product attention over `layout.heads` column blocks. Masked
  /// keys receive exactly zero weight.
  Var attention(Var q, Var k, Var v, AttentionLayout layout) {
    const Matrix& qv = value(q);
    const Matrix& kv = value(k);
    const Matrix& vv = value(v);
    const auto B = static_cast<Eigen::Index>(layout.batch);
    const auto Tq = static_cast<Eigen::Index>(layout.queries);
    const auto Tk = static_cast<Eigen::Index>(layout.keys);
    const auto H = static_cast<Eigen::Index>(layout.heads);
    const Eigen::Index dm = qv.cols();
    if (qv.rows() != B * Tq || kv.rows() != B * Tk || vv.rows() != B * Tk || kv.cols() != dm ||
        vv.cols() != dm || H <= 0 || dm % H != 0 ||
        layout.key_valid.size() != static_cast<size_t>(B * Tk)) {
      throw std::invalid_argument("attention: inconsistent layout");
    }
    const Eigen::Index dh = dm / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix y = Matrix::Zero(B * Tq, dm);
    std::vector<Matrix> probs(static_cast<size_t>(B * H));
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index h = 0; h < H; ++h) {
        auto qb = qv.block(b * Tq, h * dh, Tq, dh);
        auto kb = kv.block(b * Tk, h * dh, Tk, dh);
        auto vb = vv.block(b * Tk, h * dh, Tk, dh);
        Matrix s = (qb * kb.transpose()) * scale;
        for (Eigen::Index i = 0; i < Tq; ++i) {
          double mx = -std::numeric_limits<double>::infinity();
          for (Eigen::Index j = 0; j < Tk; ++j) {
            const bool ok = layout.key_valid[static_cast<size_t>(b * Tk + j)] &&
                            (!layout.causal || j <= i);
            if (!ok) s(i, j) = -std::numeric_limits<double>::infinity();
            else mx = std::max(mx, s(i, j));
          }
          if (mx == -std::numeric_limits<double>::infinity()) {
            s.row(i).setZero();
            continue;
          }
          double z = 0.0;
          for (Eigen::Index j = 0; j < Tk; ++j) {
            const double e = std::isinf(s(i, j)) ? 0.0 : std::exp(s(i, j) - mx);
            s(i, j) = e;
            z += e;
          }
          s.row(i) /= z;
        }
        y.block(b * Tq, h * dh, Tq, dh) = s * vb;
        probs[static_cast<size_t>(b * H + h)] = std::move(s);
      }
    }
    Var out = push(std::move(y), needs(q) || needs(k) || needs(v));
    on_backward(out, [this, q, k, v, out, B, Tq, Tk, H, dh, scale, probs = std::move(probs)] {
      const Matrix& g = nodes_[out.id].grad;
      const Matrix& qv = value(q);
      const Matrix& kv = value(k);
      const Matrix& vv = value(v);
      Matrix dq = Matrix::Zero(qv.rows(), qv.cols());
      Matrix dk = Matrix::Zero(kv.rows(), kv.cols());
      Matrix dv = Matrix::Zero(vv.rows(), vv.cols());
      for (Eigen::Index b = 0; b < B; ++b) {
        for (Eigen::Index h = 0; h < H; ++h) {
          const Matrix& p = probs[static_cast<size_t>(b * H + h)];
          auto gb = g.block(b * Tq, h * dh, Tq, dh);
          auto qb = qv.block(b * Tq, h * dh, Tq, dh);
          auto kb = kv.block(b * Tk, h * dh, Tk, dh);
          auto vb = vv.block(b * Tk, h * dh, Tk, dh);
          Matrix dp = gb * vb.transpose();
          dv.block(b * Tk, h * dh, Tk, dh) += p.transpose() * gb;
          Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
          Matrix ds = p.array() * (dp.colwise() - rowdot).array();
          ds *= scale;
          dq.block(b * Tq, h * dh, Tq, dh) += ds * kb;
          dk.block(b * Tk, h * dh, Tk, dh) += ds.transpose() * qb;
        }
      }
      if (needs(q)) accumulate(q, dq);
      if (needs(k)) accumulate(k, dk);
      if (needs(v)) accumulate(v, dv);
    });
    return out;
  }

  /// Mean cross-entropy of `logits` rows against `targets` over rows whose
  /// weight is non-zero. Returns a [1 × 1] node.
  Var cross_entropy(Var logits, std::vector<int32_t> targets, std::vector<uint8_t> active) {
    const Matrix& z = value(logits);
    if (targets.size() != static_cast<size_t>(z.rows()) || active.size() != targets.size()) {
      throw std::invalid_argument("cross_entropy: target count does not match logits");
    }
    double count = 0.0;
    for (auto a : active) count += a ? 1.0 : 0.0;
    if (count == 0.0) throw std::invalid_argument("cross_entropy: no active targets");
    Matrix soft(z.rows(), z.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double mx = z.row(i).maxCoeff();
      const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
      soft.row(i) = (z.row(i).array() - lse).exp();
      if (active[static_cast<size_t>(i)]) {
        const auto t = targets[static_cast<size_t>(i)];
        if (t < 0 || t >= z.cols()) throw std::out_of_range("cross_entropy: target out of range");
        total += lse - z(i, t);
      }
    }
    Matrix loss(1, 1);
    loss(0, 0) = total / count;
    Var out = push(std::move(loss), needs(logits));
    on_backward(out, [this, logits, out, targets = std::move(targets),
                      active = std::move(active), soft = std::move(soft), count] {
      const double g = nodes_[out.id].grad(0, 0) / count;
      Matrix d = Matrix::Zero(soft.rows(), soft.cols());
      for (Eigen::Index i = 0; i < soft.rows(); ++i) {
        if (!active[static_cast<size_t>(i)]) continue;
        d.row(i) = soft.row(i) * g;
        d(i, targets[static_cast<size_t>(i)]) -= g;
      }
      accumulate(logits, d);
    });
    return out;
  }

  /// Seeds d(root)/d(root) = 1 and propagates to every recorded node.
  void backward(Var root) {
    if (!record_) throw std::logic_error("backward on a non-recording graph");
    const Matrix& r = value(root);
    grad_buffer(root) = Matrix::Ones(r.rows(), r.cols());
    for (size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() != 0) n.backward();
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix own;
    const Matrix* external = nullptr;
    Matrix grad;
    std::function<void()> backward;
    bool needs_grad = false;

    const Matrix& value() const { return external ? *external : own; }
  };

  Var push(Matrix m, bool needs_grad) {
    Node n;
    n.own = std::move(m);
    n.needs_grad = record_ && needs_grad;
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  template <class F>
  void on_backward(Var out, F&& f) {
    if (record_ && nodes_[out.id].needs_grad) nodes_[out.id].backward = std::forward<F>(f);
  }

  Matrix& grad_buffer(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) {
      const Matrix& val = n.value();
      n.grad = Matrix::Zero(val.rows(), val.cols());
    }
    return n.grad;
  }

  void accumulate(Var v, const Matrix& g) {
    if (!needs(v)) return;
    grad_buffer(v) += g;
  }

  static void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw shape_error(op, a, b);
  }

  static std::invalid_argument shape_error(const char* op, const Matrix& a, const Matrix& b) {
    return std::invalid_argument(std::string(op) + ": shape mismatch [" +
                                 std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                 "] vs [" + std::to_string(b.rows()) + "x" +
                                 std::to_string(b.cols()) + "]");
  }

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace xf2t::ad
