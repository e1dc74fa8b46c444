#include "geaet/tensor.hpp"

#include <sstream>

namespace geaet {

namespace {
thread_local Tape g_tape;
thread_local bool g_grad_enabled = true;
thread_local std::uint64_t g_flops = 0;
std::string g_corrupted_op;
}  // namespace

std::string shape_str(Index rows, Index cols) {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

Tensor::Tensor() : node_(std::make_shared<TensorNode>()) {}

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<TensorNode>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::constant(Index rows, Index cols, double v, bool requires_grad) {
  return Tensor(Matrix::Constant(rows, cols, v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor::constant(1, 1, v, requires_grad); }

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item() needs a 1x1 tensor, got " + shape());
  return node_->value(0, 0);
}

Tape& Tape::current() { return g_tape; }

void Tape::record(std::shared_ptr<TensorNode> output, BackwardFn fn, std::string_view op) {
  entries_.push_back(Entry{std::move(output), std::move(fn), op});
}

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + loss.shape());
  }
  Tape& tape = Tape::current();
  const auto& node = loss.node();
  if (!node->requires_grad) throw std::logic_error("backward: loss does not require grad");

  // The loss is the most recent entry that produced it.
  std::ptrdiff_t start = -1;
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(tape.entries_.size()) - 1; i >= 0; --i) {
    if (tape.entries_[i].output == node) {
      start = i;
      break;
    }
  }
  if (start < 0 && !node->is_leaf) throw std::logic_error("backward: loss is not on the tape");

  detail::accumulate(node, Matrix::Ones(1, 1));
  for (std::ptrdiff_t i = start; i >= 0; --i) {
    auto& entry = tape.entries_[i];
    if (tape.trace_) tape.trace_->emplace_back(entry.op);
    if (entry.output->grad.size() == 0) continue;
    entry.backward(entry.output->grad);
  }
  for (auto& entry : tape.entries_) {
    if (!entry.output->is_leaf) entry.output->grad.resize(0, 0);
  }
  tape.clear();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

std::uint64_t FlopCounter::multiply_adds() { return g_flops; }
void FlopCounter::add(std::uint64_t n) { g_flops += n; }
void FlopCounter::reset() { g_flops = 0; }

namespace detail {

Tensor record(std::string_view op, Matrix value, std::initializer_list<const Tensor*> inputs,
              Tape::BackwardFn fn) {
  bool needs = false;
  for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  return record(op, std::move(value), needs, std::move(fn));
}

Tensor record(std::string_view op, Matrix value, bool inputs_need_grad, Tape::BackwardFn fn) {
  Tensor out(std::move(value));
  if (!g_grad_enabled || !inputs_need_grad) return out;

  auto node = out.node();
  node->requires_grad = true;
  node->is_leaf = false;
  if (!g_corrupted_op.empty() && op == g_corrupted_op) {
    fn = [inner = std::move(fn)](const Matrix& g) { inner(1.5 * g); };
  }
  g_tape.record(node, std::move(fn), op);
  return out;
}

}  // namespace detail

namespace testing {
void set_corrupted_backward(std::string op) { g_corrupted_op = std::move(op); }
const std::string& corrupted_backward() { return g_corrupted_op; }
}  // namespace testing

}  // namespace geaet
