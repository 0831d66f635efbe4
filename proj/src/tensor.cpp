#include "fewsum/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace fewsum {

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<TensorNode> make_node(int rows, int cols) {
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(size_t(rows) * size_t(cols), 0.0);
  return n;
}

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

// Attaches parents and the backward closure when gradients are live.
void wire(Tensor& out, std::initializer_list<Tensor> parents, std::function<void()> fn) {
  bool needs = false;
  if (g_grad_enabled)
    for (const auto& p : parents) needs = needs || p.requires_grad();
  if (!needs) return;
  out.node()->requires_grad = true;
  for (const auto& p : parents) out.node()->parents.push_back(p.node());
  out.node()->backward_fn = std::move(fn);
}

enum class BroadcastKind { kSame, kRow, kScalar };

BroadcastKind broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return BroadcastKind::kSame;
  if (b.rows() == 1 && b.cols() == a.cols()) return BroadcastKind::kRow;
  if (b.rows() == 1 && b.cols() == 1) return BroadcastKind::kScalar;
  fail(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  auto n = make_node(rows, cols);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::from_values(int rows, int cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != size_t(rows) * size_t(cols)) fail("from_values: size mismatch");
  auto n = make_node(rows, cols);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::row(const std::vector<double>& values) {
  return from_values(1, int(values.size()), values);
}

double Tensor::scalar() const {
  if (size() != 1) fail("scalar: tensor is " + shape_str(*this));
  return node_->value[0];
}

// ---------------------------------------------------------------------------
// Elementwise / broadcast ops
// ---------------------------------------------------------------------------

template <typename FwdOp, typename BwdA, typename BwdB>
static Tensor binary_broadcast(const Tensor& a, const Tensor& b, const char* name, FwdOp fwd,
                               BwdA bwd_a, BwdB bwd_b) {
  BroadcastKind kind = broadcast_kind(a, b, name);
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  auto an = a.node();
  auto bn = b.node();
  auto on = out.node();
  const size_t n = a.size();
  const size_t cols = size_t(a.cols());
  for (size_t i = 0; i < n; ++i) {
    size_t bi = kind == BroadcastKind::kSame ? i : (kind == BroadcastKind::kRow ? i % cols : 0);
    on->value[i] = fwd(an->value[i], bn->value[bi]);
  }
  wire(out, {a, b}, [an, bn, on, kind, cols, n, bwd_a, bwd_b]() {
    for (size_t i = 0; i < n; ++i) {
      size_t bi = kind == BroadcastKind::kSame ? i : (kind == BroadcastKind::kRow ? i % cols : 0);
      double g = on->grad[i];
      if (an->requires_grad) an->grad[i] += bwd_a(g, an->value[i], bn->value[bi]);
      if (bn->requires_grad) bn->grad[bi] += bwd_b(g, an->value[i], bn->value[bi]);
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

template <typename FwdOp, typename BwdOp>
static Tensor unary_elem(const Tensor& a, FwdOp fwd, BwdOp bwd) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  auto an = a.node();
  auto on = out.node();
  const size_t n = a.size();
  for (size_t i = 0; i < n; ++i) on->value[i] = fwd(an->value[i]);
  wire(out, {a}, [an, on, n, bwd]() {
    for (size_t i = 0; i < n; ++i) an->grad[i] += bwd(on->grad[i], an->value[i], on->value[i]);
  });
  return out;
}

Tensor scale(const Tensor& a, double k) {
  return unary_elem(
      a, [k](double x) { return k * x; }, [k](double g, double, double) { return k * g; });
}

Tensor add_scalar(const Tensor& a, double k) {
  return unary_elem(
      a, [k](double x) { return x + k; }, [](double g, double, double) { return g; });
}

Tensor relu(const Tensor& a) {
  return unary_elem(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elem(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double g, double, double y) { return g * y * (1.0 - y); });
}

Tensor log_elem(const Tensor& a) {
  return unary_elem(
      a, [](double x) { return std::log(x); }, [](double g, double x, double) { return g / x; });
}

Tensor abs_elem(const Tensor& a) {
  return unary_elem(
      a, [](double x) { return std::fabs(x); },
      [](double g, double x, double) { return x > 0.0 ? g : (x < 0.0 ? -g : 0.0); });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    fail("matmul: shape mismatch " + shape_str(a) + " · " + shape_str(b));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros(m, n);
  auto an = a.node();
  auto bn = b.node();
  auto on = out.node();
  const double* A = an->value.data();
  const double* B = bn->value.data();
  double* C = on->value.data();
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < k; ++l) {
      double av = A[size_t(i) * size_t(k) + size_t(l)];
      if (av == 0.0) continue;
      const double* brow = B + size_t(l) * size_t(n);
      double* crow = C + size_t(i) * size_t(n);
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  wire(out, {a, b}, [an, bn, on, m, k, n]() {
    const double* A = an->value.data();
    const double* B = bn->value.data();
    const double* G = on->grad.data();
    if (an->requires_grad) {
      double* dA = an->grad.data();
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
          const double* grow = G + size_t(i) * size_t(n);
          const double* brow = B + size_t(l) * size_t(n);
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
          dA[size_t(i) * size_t(k) + size_t(l)] += s;
        }
    }
    if (bn->requires_grad) {
      double* dB = bn->grad.data();
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
          double av = A[size_t(i) * size_t(k) + size_t(l)];
          if (av == 0.0) continue;
          const double* grow = G + size_t(i) * size_t(n);
          double* drow = dB + size_t(l) * size_t(n);
          for (int j = 0; j < n; ++j) drow[j] += av * grow[j];
        }
    }
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  const int m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros(n, m);
  auto an = a.node();
  auto on = out.node();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) on->at(j, i) = an->at(i, j);
  wire(out, {a}, [an, on, m, n]() {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        an->grad[size_t(i) * size_t(n) + size_t(j)] +=
            on->grad[size_t(j) * size_t(m) + size_t(i)];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Normalization and softmax
// ---------------------------------------------------------------------------

Tensor softmax_rows(const Tensor& a) {
  const int m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros(m, n);
  auto an = a.node();
  auto on = out.node();
  for (int i = 0; i < m; ++i) {
    const double* x = an->value.data() + size_t(i) * size_t(n);
    double* y = on->value.data() + size_t(i) * size_t(n);
    double mx = x[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      denom += y[j];
    }
    for (int j = 0; j < n; ++j) y[j] /= denom;
  }
  wire(out, {a}, [an, on, m, n]() {
    for (int i = 0; i < m; ++i) {
      const double* y = on->value.data() + size_t(i) * size_t(n);
      const double* gy = on->grad.data() + size_t(i) * size_t(n);
      double* gx = an->grad.data() + size_t(i) * size_t(n);
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (int j = 0; j < n; ++j) gx[j] += y[j] * (gy[j] - dot);
    }
  });
  return out;
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  const int m = a.rows(), n = a.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n)
    fail("layer_norm_rows: gain/bias must be 1x" + std::to_string(n));
  Tensor out = Tensor::zeros(m, n);
  auto an = a.node();
  auto gn = gain.node();
  auto bn = bias.node();
  auto on = out.node();
  // Normalized activations are re-derived in backward from value/gain/bias;
  // keep the per-row inverse stddev.
  auto inv_std = std::make_shared<std::vector<double>>(size_t(m));
  auto means = std::make_shared<std::vector<double>>(size_t(m));
  for (int i = 0; i < m; ++i) {
    const double* x = an->value.data() + size_t(i) * size_t(n);
    double* y = on->value.data() + size_t(i) * size_t(n);
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += x[j];
    mean /= double(n);
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= double(n);
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[size_t(i)] = is;
    (*means)[size_t(i)] = mean;
    for (int j = 0; j < n; ++j) y[j] = (x[j] - mean) * is * gn->value[size_t(j)] + bn->value[size_t(j)];
  }
  wire(out, {a, gain, bias}, [an, gn, bn, on, m, n, inv_std, means]() {
    for (int i = 0; i < m; ++i) {
      const double* x = an->value.data() + size_t(i) * size_t(n);
      const double* gy = on->grad.data() + size_t(i) * size_t(n);
      double is = (*inv_std)[size_t(i)];
      double mean = (*means)[size_t(i)];
      double sum_gh = 0.0, sum_gh_xhat = 0.0;
      for (int j = 0; j < n; ++j) {
        double xhat = (x[j] - mean) * is;
        double gh = gy[j] * gn->value[size_t(j)];
        sum_gh += gh;
        sum_gh_xhat += gh * xhat;
        if (gn->requires_grad) gn->grad[size_t(j)] += gy[j] * xhat;
        if (bn->requires_grad) bn->grad[size_t(j)] += gy[j];
      }
      if (an->requires_grad) {
        double* gx = an->grad.data() + size_t(i) * size_t(n);
        for (int j = 0; j < n; ++j) {
          double xhat = (x[j] - mean) * is;
          double gh = gy[j] * gn->value[size_t(j)];
          gx[j] += is * (gh - sum_gh / double(n) - xhat * sum_gh_xhat / double(n));
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Gather / concat / slice
// ---------------------------------------------------------------------------

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  const int n = table.cols();
  Tensor out = Tensor::zeros(int(ids.size()), n);
  auto tn = table.node();
  auto on = out.node();
  for (size_t k = 0; k < ids.size(); ++k) {
    int id = ids[k];
    if (id < 0 || id >= table.rows())
      fail("gather_rows: id " + std::to_string(id) + " out of range 0.." +
           std::to_string(table.rows() - 1));
    std::copy_n(tn->value.data() + size_t(id) * size_t(n), size_t(n),
                on->value.data() + k * size_t(n));
  }
  auto ids_copy = std::make_shared<std::vector<int>>(ids);
  wire(out, {table}, [tn, on, n, ids_copy]() {
    for (size_t k = 0; k < ids_copy->size(); ++k) {
      double* dst = tn->grad.data() + size_t((*ids_copy)[k]) * size_t(n);
      const double* src = on->grad.data() + k * size_t(n);
      for (int j = 0; j < n; ++j) dst[j] += src[j];
    }
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat_cols: no parts");
  const int m = parts[0].rows();
  int total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) fail("concat_cols: row mismatch");
    total += p.cols();
  }
  Tensor out = Tensor::zeros(m, total);
  auto on = out.node();
  int off = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < m; ++i)
      std::copy_n(p.node()->value.data() + size_t(i) * size_t(p.cols()), size_t(p.cols()),
                  on->value.data() + size_t(i) * size_t(total) + size_t(off));
    off += p.cols();
  }
  bool needs = false;
  if (g_grad_enabled)
    for (const auto& p : parts) needs = needs || p.requires_grad();
  if (needs) {
    on->requires_grad = true;
    auto nodes = std::make_shared<std::vector<std::shared_ptr<TensorNode>>>();
    for (const auto& p : parts) {
      on->parents.push_back(p.node());
      nodes->push_back(p.node());
    }
    on->backward_fn = [on, nodes, m, total]() {
      int off = 0;
      for (auto& pn : *nodes) {
        if (pn->requires_grad) {
          for (int i = 0; i < m; ++i) {
            const double* src = on->grad.data() + size_t(i) * size_t(total) + size_t(off);
            double* dst = pn->grad.data() + size_t(i) * size_t(pn->cols);
            for (int j = 0; j < pn->cols; ++j) dst[j] += src[j];
          }
        }
        off += pn->cols;
      }
    };
  }
  return out;
}

Tensor slice_cols(const Tensor& a, int start, int len) {
  if (start < 0 || len < 0 || start + len > a.cols())
    fail("slice_cols: range [" + std::to_string(start) + "," + std::to_string(start + len) +
         ") outside 0.." + std::to_string(a.cols()));
  const int m = a.rows();
  Tensor out = Tensor::zeros(m, len);
  auto an = a.node();
  auto on = out.node();
  for (int i = 0; i < m; ++i)
    std::copy_n(an->value.data() + size_t(i) * size_t(a.cols()) + size_t(start), size_t(len),
                on->value.data() + size_t(i) * size_t(len));
  const int acols = a.cols();
  wire(out, {a}, [an, on, m, len, start, acols]() {
    for (int i = 0; i < m; ++i) {
      const double* src = on->grad.data() + size_t(i) * size_t(len);
      double* dst = an->grad.data() + size_t(i) * size_t(acols) + size_t(start);
      for (int j = 0; j < len; ++j) dst[j] += src[j];
    }
  });
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat_rows: no parts");
  const int n = parts[0].cols();
  int total = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) fail("concat_rows: column mismatch");
    total += p.rows();
  }
  Tensor out = Tensor::zeros(total, n);
  auto on = out.node();
  size_t off = 0;
  for (const auto& p : parts) {
    std::copy_n(p.node()->value.data(), p.size(), on->value.data() + off);
    off += p.size();
  }
  bool needs = false;
  if (g_grad_enabled)
    for (const auto& p : parts) needs = needs || p.requires_grad();
  if (needs) {
    on->requires_grad = true;
    auto nodes = std::make_shared<std::vector<std::shared_ptr<TensorNode>>>();
    for (const auto& p : parts) {
      on->parents.push_back(p.node());
      nodes->push_back(p.node());
    }
    on->backward_fn = [on, nodes]() {
      size_t off = 0;
      for (auto& pn : *nodes) {
        if (pn->requires_grad)
          for (size_t i = 0; i < pn->size(); ++i) pn->grad[i] += on->grad[off + i];
        off += pn->size();
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dropout, reductions, loss
// ---------------------------------------------------------------------------

Tensor dropout(const Tensor& a, double rate, Rng& rng, bool train) {
  if (!train || rate <= 0.0) return a;
  if (rate >= 1.0) fail("dropout: rate must be < 1");
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  auto an = a.node();
  auto on = out.node();
  auto mask = std::make_shared<std::vector<double>>(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    (*mask)[i] = rng.next_unit() >= rate ? keep_scale : 0.0;
    on->value[i] = an->value[i] * (*mask)[i];
  }
  wire(out, {a}, [an, on, mask]() {
    for (size_t i = 0; i < mask->size(); ++i) an->grad[i] += on->grad[i] * (*mask)[i];
  });
  return out;
}

Tensor sum_all(const Tensor& a) {
  Tensor out = Tensor::zeros(1, 1);
  auto an = a.node();
  auto on = out.node();
  double s = 0.0;
  for (double v : an->value) s += v;
  on->value[0] = s;
  wire(out, {a}, [an, on]() {
    for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[0];
  });
  return out;
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / double(a.size())); }

Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets) {
  const int m = logits.rows(), n = logits.cols();
  if (int(targets.size()) != m)
    fail("cross_entropy_mean: " + std::to_string(targets.size()) + " targets for " +
         std::to_string(m) + " rows");
  int used = 0;
  for (int t : targets) {
    if (t >= n) fail("cross_entropy_mean: target id " + std::to_string(t) + " out of range");
    if (t >= 0) ++used;
  }
  if (used == 0) fail("cross_entropy_mean: all rows are padding");
  Tensor out = Tensor::zeros(1, 1);
  auto ln = logits.node();
  auto on = out.node();
  auto probs = std::make_shared<std::vector<double>>(logits.size());
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const double* x = ln->value.data() + size_t(i) * size_t(n);
    double* p = probs->data() + size_t(i) * size_t(n);
    double mx = x[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      p[j] = std::exp(x[j] - mx);
      denom += p[j];
    }
    for (int j = 0; j < n; ++j) p[j] /= denom;
    if (targets[size_t(i)] >= 0) total += -std::log(p[targets[size_t(i)]]);
  }
  on->value[0] = total / double(used);
  auto tgt = std::make_shared<std::vector<int>>(targets);
  wire(out, {logits}, [ln, on, probs, tgt, m, n, used]() {
    double g = on->grad[0] / double(used);
    for (int i = 0; i < m; ++i) {
      int t = (*tgt)[size_t(i)];
      if (t < 0) continue;
      const double* p = probs->data() + size_t(i) * size_t(n);
      double* gx = ln->grad.data() + size_t(i) * size_t(n);
      for (int j = 0; j < n; ++j) gx[j] += g * (p[j] - (j == t ? 1.0 : 0.0));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void backward(const Tensor& root) {
  if (root.size() != 1) fail("backward: root must be a scalar");
  if (!root.requires_grad()) fail("backward: root does not require gradients");
  // Iterative topological sort over parents.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorNode* parent = node->parents[idx].get();
      ++idx;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // Intermediate grads start at zero; leaf (parameter) grads accumulate
  // across calls and are reset by the optimizer.
  for (TensorNode* node : order) node->ensure_grad();
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn();
}

}  // namespace fewsum
