#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace geaet {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

std::string shape_str(Index rows, Index cols);

struct TensorNode {
  Matrix value;
  Matrix grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  bool is_leaf = true;
};

/// Shared handle to a dense row-major float64 matrix with an optional
/// gradient slot. Copies alias the same storage; ops never mutate inputs.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor constant(Index rows, Index cols, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::string shape() const { return shape_str(rows(), cols()); }

  const Matrix& value() const { return node_->value; }
  // Only for optimizers and finite-difference probes, between steps.
  Matrix& mutable_value() { return node_->value; }

  bool has_grad() const { return node_->grad.size() > 0; }
  const Matrix& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }
  bool is_leaf() const { return node_->is_leaf; }

  double item() const;
  double operator()(Index r, Index c) const { return node_->value(r, c); }

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  bool same_as(const Tensor& other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

/// Ordered record of differentiable ops executed on this thread.
/// `backward` replays it in reverse and then clears it.
class Tape {
 public:
  using BackwardFn = std::function<void(const Matrix& grad_out)>;

  struct Entry {
    std::shared_ptr<TensorNode> output;
    BackwardFn backward;
    std::string_view op;
  };

  static Tape& current();

  void record(std::shared_ptr<TensorNode> output, BackwardFn fn, std::string_view op);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  // When set, backward appends the name of every op it visits.
  void set_trace(std::vector<std::string>* trace) { trace_ = trace; }

 private:
  friend void backward(const Tensor& loss);
  std::vector<Entry> entries_;
  std::vector<std::string>* trace_ = nullptr;
};

/// Populates grad of every requires_grad tensor reachable from a 1x1 loss.
void backward(const Tensor& loss);

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

/// Per-thread count of scalar multiply-adds done by forward ops.
class FlopCounter {
 public:
  static std::uint64_t multiply_adds();
  static void add(std::uint64_t n);
  static void reset();
};

namespace detail {

// Builds the op result and, when any input needs a gradient, records
// `fn` on the tape. `fn` receives the gradient of the result.
Tensor record(std::string_view op, Matrix value, std::initializer_list<const Tensor*> inputs,
              Tape::BackwardFn fn);
Tensor record(std::string_view op, Matrix value, bool inputs_need_grad, Tape::BackwardFn fn);

// Adds `c` into node->grad when the node takes gradients.
template <typename Derived>
void accumulate(const std::shared_ptr<TensorNode>& node, const Eigen::MatrixBase<Derived>& c) {
  if (!node->requires_grad) return;
  if (node->grad.size() == 0) {
    node->grad = c;
  } else {
    node->grad += c;
  }
}

// Gradient buffer of `node`, zero-filled on first use, for ops that add
// into a sub-block. Only valid when node->requires_grad.
inline Matrix& grad_slot(const std::shared_ptr<TensorNode>& node) {
  if (node->grad.size() == 0) node->grad = Matrix::Zero(node->value.rows(), node->value.cols());
  return node->grad;
}

// Takes ownership of a freshly computed gradient when the slot is empty.
inline void accumulate(const std::shared_ptr<TensorNode>& node, Matrix&& c) {
  if (!node->requires_grad) return;
  if (node->grad.size() == 0) {
    node->grad = std::move(c);
  } else {
    node->grad += c;
  }
}

}  // namespace detail

namespace testing {
// Negative-control hook: scales the backward of the named op by 1.5.
void set_corrupted_backward(std::string op);
const std::string& corrupted_backward();
}  // namespace testing

}  // namespace geaet
