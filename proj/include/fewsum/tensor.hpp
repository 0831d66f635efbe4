#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fewsum/common.hpp"

namespace fewsum {

// Reverse-mode autodiff over dense 2-D double tensors. Each op builds a graph
// node whose closure scatters upstream gradients into the parents; backward()
// walks the graph in reverse topological order. Single-threaded by design so
// every run is bit-reproducible.
struct TensorNode {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backward_fn;  // may be empty

  size_t size() const { return size_t(rows) * size_t(cols); }
  double& at(int i, int j) { return value[size_t(i) * size_t(cols) + size_t(j)]; }
  double at(int i, int j) const { return value[size_t(i) * size_t(cols) + size_t(j)]; }
  void ensure_grad() {
    if (grad.size() != size()) grad.assign(size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor from_values(int rows, int cols, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor row(const std::vector<double>& values);  // [1, n] constant

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  size_t size() const { return node_->size(); }
  double& at(int i, int j) { return node_->at(i, j); }
  double at(int i, int j) const { return node_->at(i, j); }
  double scalar() const;
  std::vector<double>& values() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  void zero_grad() { node_->grad.assign(node_->size(), 0.0); }
  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// Disables graph construction (and gradient tracking) while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Elementwise with broadcasting: b may match a, be a [1, n] row, or a [1, 1]
// scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double k);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor abs_elem(const Tensor& a);

Tensor softmax_rows(const Tensor& a);
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);

// Row gather; used for embedding lookup (gradient scatter-adds into the
// table) and for deterministic row permutations.
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int start, int len);
Tensor concat_rows(const std::vector<Tensor>& parts);

// Inverted dropout; identity when train is false or rate is 0.
Tensor dropout(const Tensor& a, double rate, Rng& rng, bool train);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// Mean negative log-likelihood over rows with non-negative target ids;
// rows with target < 0 are ignored (padding).
Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets);

void backward(const Tensor& root);

}  // namespace fewsum
