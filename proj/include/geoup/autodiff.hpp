#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace geoup::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// While alive, accumulates a digest of the discrete choices made by ops on
/// this thread: relu masks, max and min picks, gathered row indices. Two
/// evaluations with equal digests followed the same piecewise branch.
class SelectionTrace {
 public:
  SelectionTrace();
  ~SelectionTrace();
  SelectionTrace(const SelectionTrace&) = delete;
  SelectionTrace& operator=(const SelectionTrace&) = delete;

  std::uint64_t digest() const { return digest_; }

  static bool active();
  static void record(std::uint64_t value);

 private:
  SelectionTrace* previous_;
  std::uint64_t digest_ = 1469598103934665603ull;
};

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Adds this node's grad into the grads of its inputs.
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Reverse-mode autodiff value. Copies share the underlying node; values of a
/// recorded node are never modified after construction. Only leaves created
/// with parameter() accumulate gradients across backward() calls.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<T> values);
  static Tensor parameter(Shape shape, std::vector<T> values);
  static Tensor zeros(Shape shape);
  static Tensor scalar(T value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const T> values() const { return node_->value; }
  /// Raw access for optimizer updates; only valid on leaves.
  std::span<T> mutable_values();
  /// Empty until a backward pass reached this tensor.
  std::span<const T> grad() const { return node_->grad; }
  T item() const;
  T operator[](std::size_t flat) const { return node_->value[flat]; }

  /// d(this)/d(every reachable tensor); this must be a single element.
  void backward() const;
  void zero_grad();

  /// A leaf copy of the current values that records no history.
  Tensor detach() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Casts values to another precision as a new leaf (parameter iff the source is).
template <class To, class From>
Tensor<To> cast(const Tensor<From>& x);

template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> transpose(const Tensor<T>& a);
template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// Elementwise min; gradient goes to a on ties.
template <class T> Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b);
/// a[M,N] + b[N] broadcast over rows.
template <class T> Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& b);
/// a[M,N] * s[M,1] broadcast over columns.
template <class T> Tensor<T> scale_rows(const Tensor<T>& a, const Tensor<T>& s);
template <class T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <class T> Tensor<T> add_scalar(const Tensor<T>& a, T value);
template <class T> Tensor<T> relu(const Tensor<T>& a);
template <class T> Tensor<T> square(const Tensor<T>& a);
template <class T> Tensor<T> sqrt(const Tensor<T>& a);
template <class T> Tensor<T> softmax(const Tensor<T>& a, std::size_t axis);
/// Max over one axis; gradient routed to the first maximal element.
template <class T> Tensor<T> reduce_max(const Tensor<T>& a, std::size_t axis);
template <class T> Tensor<T> reduce_sum(const Tensor<T>& a, std::size_t axis);
template <class T> Tensor<T> sum(const Tensor<T>& a);
template <class T> Tensor<T> mean(const Tensor<T>& a);
template <class T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
/// Rows a[idx[0]], a[idx[1]], ... of a 2-D tensor; backward scatter-adds.
template <class T> Tensor<T> gather_rows(const Tensor<T>& a, std::span<const int> idx);
/// Columns cols of a 2-D tensor.
template <class T> Tensor<T> select_cols(const Tensor<T>& a, std::span<const int> cols);
/// Each row divided by sqrt(|row|^2 + eps).
template <class T> Tensor<T> normalize_rows(const Tensor<T>& a, T eps = T(0));
/// Inverse of a 3x3 matrix (cofactor formula).
template <class T> Tensor<T> inverse3(const Tensor<T>& a);

template <class T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <class T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <class T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

}  // namespace geoup::ad
