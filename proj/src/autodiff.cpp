#include "geoup/autodiff.hpp"

#include "geoup/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>
#include <utility>

namespace geoup::ad {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace {

thread_local SelectionTrace* active_trace = nullptr;

}  // namespace

SelectionTrace::SelectionTrace() : previous_(active_trace) { active_trace = this; }

SelectionTrace::~SelectionTrace() { active_trace = previous_; }

bool SelectionTrace::active() { return active_trace != nullptr; }

void SelectionTrace::record(std::uint64_t value) {
  if (active_trace == nullptr) return;
  for (int b = 0; b < 8; ++b) {
    active_trace->digest_ ^= (value >> (8 * b)) & 0xffu;
    active_trace->digest_ *= 1099511628211ull;
  }
}

namespace {

template <class T>
using NodePtr = std::shared_ptr<Node<T>>;

template <class T>
Tensor<T> make_leaf(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor<T>(std::move(node));
}

// Records history only when some input needs a gradient.
template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::vector<NodePtr<T>> inputs,
                      std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                   [](const NodePtr<T>& in) { return in->requires_grad; });
  if (tracked) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

void require(bool ok, const std::string& op, const Shape& a, const Shape& b) {
  if (!ok) throw ShapeError(op + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_rank(const Shape& a, std::size_t rank, const std::string& op) {
  if (a.size() != rank) {
    throw ShapeError(op + ": expected rank " + std::to_string(rank) + ", got shape " + shape_string(a));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const std::string& op) {
  if (axis >= shape.size()) {
    throw ShapeError(op + ": axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

template <class T>
bool has_grad(const NodePtr<T>& n) {
  return n->requires_grad;
}

// Elementwise binary op helper: forward f(a,b), partials da(a,b,y), db(a,b,y).
template <class T, class F, class DA, class DB>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, const std::string& op, F f, DA da, DB db) {
  require(a.shape() == b.shape(), op, a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [da, db](Node<T>& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) {
      auto& g = na.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * da(na.value[i], nb.value[i], self.value[i]);
    }
    if (nb.requires_grad) {
      auto& g = nb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * db(na.value[i], nb.value[i], self.value[i]);
    }
  });
}

template <class T, class F, class D>
Tensor<T> unary(const Tensor<T>& a, F f, D d) {
  const auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [d](Node<T>& self) {
    auto& na = *self.inputs[0];
    auto& g = na.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * d(na.value[i], self.value[i]);
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

template <class T>
Tensor<T> Tensor<T>::constant(Shape shape, std::vector<T> values) {
  return make_leaf<T>(std::move(shape), std::move(values), false);
}

template <class T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> values) {
  return make_leaf<T>(std::move(shape), std::move(values), true);
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  const std::size_t n = shape_size(shape);
  return make_leaf<T>(std::move(shape), std::vector<T>(n, T(0)), false);
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value) {
  return make_leaf<T>(Shape{}, std::vector<T>{value}, false);
}

template <class T>
std::span<T> Tensor<T>::mutable_values() {
  if (!node_->inputs.empty()) throw ArgumentError("mutable_values: tensor is not a leaf");
  return node_->value;
}

template <class T>
T Tensor<T>::item() const {
  if (size() != 1) throw ArgumentError("item: tensor of shape " + shape_string(shape()) + " is not scalar");
  return node_->value[0];
}

template <class T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return constant(shape(), node_->value);
}

template <class T>
void Tensor<T>::backward() const {
  if (size() != 1) {
    throw ArgumentError("backward: loss must be a single element, got shape " + shape_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS over tracked nodes: inputs precede consumers.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node<T>* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  // Interior gradients are per pass; leaves accumulate.
  for (Node<T>* n : order) {
    if (!n->inputs.empty()) n->grad.assign(n->value.size(), T(0));
  }
  node_->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

template <class To, class From>
Tensor<To> cast(const Tensor<From>& x) {
  std::vector<To> values(x.values().begin(), x.values().end());
  return x.requires_grad() && x.node()->inputs.empty() ? Tensor<To>::parameter(x.shape(), std::move(values))
                                                       : Tensor<To>::constant(x.shape(), std::move(values));
}

// ---------------------------------------------------------------------------
// Ops

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<T> values(x.values().begin(), x.values().end());
  return make_result<T>(std::move(shape), std::move(values), {x.node()}, [](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), "matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const T* av = a.values().data();
  const T* bv = b.values().data();
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = av[i * k + p];
      const T* brow = bv + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return make_result<T>({m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node<T>& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    const T* g = self.grad.data();
    if (na.requires_grad) {
      T* ga = na.ensure_grad().data();
      const T* bv = nb.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          T acc = T(0);
          const T* grow = g + i * n;
          const T* brow = bv + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      T* gb = nb.ensure_grad().data();
      const T* av = na.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T s = av[i * k + p];
          T* gbrow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += s * grow[j];
        }
      }
    }
  });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a.shape(), 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto av = a.values();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_result<T>({n, m}, std::move(out), {a.node()}, [m, n](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(1); });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(-1); });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y, T) { return y; }, [](T x, T, T) { return x; });
}

template <class T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
  if (SelectionTrace::active() && a.size() == b.size()) {
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) SelectionTrace::record(bv[i] < av[i] ? 1 : 0);
  }
  return elementwise(
      a, b, "minimum", [](T x, T y) { return y < x ? y : x; },
      [](T x, T y, T) { return y < x ? T(0) : T(1); }, [](T x, T y, T) { return y < x ? T(1) : T(0); });
}

template <class T>
Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.size() == a.dim(1), "add_bias", a.shape(), b.shape());
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
  return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [m, n](Node<T>& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) {
      auto& g = na.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (nb.requires_grad) {
      auto& g = nb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

template <class T>
Tensor<T> scale_rows(const Tensor<T>& a, const Tensor<T>& s) {
  require(a.rank() == 2 && s.size() == a.dim(0), "scale_rows", a.shape(), s.shape());
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto av = a.values();
  const auto sv = s.values();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] * sv[i];
  return make_result<T>(a.shape(), std::move(out), {a.node(), s.node()}, [m, n](Node<T>& self) {
    auto& na = *self.inputs[0];
    auto& ns = *self.inputs[1];
    if (na.requires_grad) {
      auto& g = na.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * ns.value[i];
    }
    if (ns.requires_grad) {
      auto& g = ns.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        T acc = T(0);
        for (std::size_t j = 0; j < n; ++j) acc += self.grad[i * n + j] * na.value[i * n + j];
        g[i] += acc;
      }
    }
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  return unary(a, [value](T x) { return x + value; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
  if (SelectionTrace::active()) {
    for (T x : a.values()) SelectionTrace::record(x > T(0) ? 1 : 0);
  }
  return unary(a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> square(const Tensor<T>& a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <class T>
Tensor<T> sqrt(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::sqrt(x); }, [](T, T y) { return T(0.5) / y; });
}

template <class T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "softmax");
  const auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t l = 0; l < s.length; ++l) mx = std::max(mx, av[base + l * s.inner]);
      T total = T(0);
      for (std::size_t l = 0; l < s.length; ++l) {
        const T e = std::exp(av[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.length; ++l) out[base + l * s.inner] /= total;
    }
  }
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [s](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    const auto& y = self.value;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.length * s.inner + in;
        T dot = T(0);
        for (std::size_t l = 0; l < s.length; ++l) {
          const std::size_t k = base + l * s.inner;
          dot += self.grad[k] * y[k];
        }
        for (std::size_t l = 0; l < s.length; ++l) {
          const std::size_t k = base + l * s.inner;
          g[k] += y[k] * (self.grad[k] - dot);
        }
      }
    }
  });
}

template <class T>
Tensor<T> reduce_max(const Tensor<T>& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "reduce_max");
  if (s.length == 0) throw ShapeError("reduce_max: empty axis in shape " + shape_string(a.shape()));
  const auto av = a.values();
  std::vector<T> out(s.outer * s.inner);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      std::size_t best = base;
      for (std::size_t l = 1; l < s.length; ++l) {
        const std::size_t k = base + l * s.inner;
        if (av[k] > av[best]) best = k;
      }
      out[o * s.inner + in] = av[best];
      arg[o * s.inner + in] = best;
      SelectionTrace::record(best);
    }
  }
  return make_result<T>(drop_axis(a.shape(), axis), std::move(out), {a.node()},
                        [arg = std::move(arg)](Node<T>& self) {
                          auto& g = self.inputs[0]->ensure_grad();
                          for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
                        });
}

template <class T>
Tensor<T> reduce_sum(const Tensor<T>& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "reduce_sum");
  const auto av = a.values();
  std::vector<T> out(s.outer * s.inner, T(0));
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.length; ++l)
      for (std::size_t in = 0; in < s.inner; ++in)
        out[o * s.inner + in] += av[(o * s.length + l) * s.inner + in];
  return make_result<T>(drop_axis(a.shape(), axis), std::move(out), {a.node()}, [s](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t l = 0; l < s.length; ++l)
        for (std::size_t in = 0; in < s.inner; ++in)
          g[(o * s.length + l) * s.inner + in] += self.grad[o * s.inner + in];
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.values()) total += v;
  return make_result<T>(Shape{}, std::vector<T>{total}, {a.node()}, [](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (auto& gi : g) gi += self.grad[0];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const AxisSplit s0 = split_axis(first, axis, "concat");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> chunk;  // per part: length * inner
  for (const auto& p : parts) {
    bool ok = p.rank() == first.size();
    for (std::size_t d = 0; ok && d < first.size(); ++d) ok = d == axis || p.dim(d) == first[d];
    require(ok, "concat", first, p.shape());
    out_shape[axis] += p.dim(axis);
    chunk.push_back(p.dim(axis) * s0.inner);
  }
  std::size_t row = 0;
  for (auto c : chunk) row += c;
  std::vector<T> out(s0.outer * row);
  std::vector<NodePtr<T>> inputs;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].values();
    for (std::size_t o = 0; o < s0.outer; ++o)
      std::copy_n(pv.begin() + o * chunk[k], chunk[k], out.begin() + o * row + offset);
    offset += chunk[k];
    inputs.push_back(parts[k].node());
  }
  const std::size_t outer = s0.outer;
  return make_result<T>(std::move(out_shape), std::move(out), std::move(inputs),
                        [chunk, row, outer](Node<T>& self) {
                          std::size_t off = 0;
                          for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                            auto& in = *self.inputs[k];
                            if (in.requires_grad) {
                              auto& g = in.ensure_grad();
                              for (std::size_t o = 0; o < outer; ++o)
                                for (std::size_t c = 0; c < chunk[k]; ++c)
                                  g[o * chunk[k] + c] += self.grad[o * row + off + c];
                            }
                            off += chunk[k];
                          }
                        });
}

template <class T>
Tensor<T> gather_rows(const Tensor<T>& a, std::span<const int> idx) {
  require_rank(a.shape(), 2, "gather_rows");
  const std::size_t m = a.dim(0), f = a.dim(1);
  const auto av = a.values();
  std::vector<T> out(idx.size() * f);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= m) {
      throw ShapeError("gather_rows: index " + std::to_string(idx[r]) + " out of range for shape " +
                       shape_string(a.shape()));
    }
    std::copy_n(av.begin() + idx[r] * f, f, out.begin() + r * f);
    SelectionTrace::record(static_cast<std::uint64_t>(idx[r]));
  }
  std::vector<int> rows(idx.begin(), idx.end());
  return make_result<T>({idx.size(), f}, std::move(out), {a.node()}, [rows = std::move(rows), f](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < f; ++c) g[rows[r] * f + c] += self.grad[r * f + c];
  });
}

template <class T>
Tensor<T> select_cols(const Tensor<T>& a, std::span<const int> cols) {
  require_rank(a.shape(), 2, "select_cols");
  const std::size_t m = a.dim(0), n = a.dim(1), c = cols.size();
  for (int col : cols) {
    if (col < 0 || static_cast<std::size_t>(col) >= n) {
      throw ShapeError("select_cols: column " + std::to_string(col) + " out of range for shape " +
                       shape_string(a.shape()));
    }
  }
  const auto av = a.values();
  std::vector<T> out(m * c);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * n + cols[j]];
  std::vector<int> picked(cols.begin(), cols.end());
  return make_result<T>({m, c}, std::move(out), {a.node()}, [picked = std::move(picked), m, n](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    const std::size_t c = picked.size();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * n + picked[j]] += self.grad[i * c + j];
  });
}

template <class T>
Tensor<T> normalize_rows(const Tensor<T>& a, T eps) {
  require_rank(a.shape(), 2, "normalize_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto av = a.values();
  std::vector<T> out(m * n);
  std::vector<T> inv(m);
  for (std::size_t i = 0; i < m; ++i) {
    T s = T(0);
    for (std::size_t j = 0; j < n; ++j) s += av[i * n + j] * av[i * n + j];
    inv[i] = T(1) / std::sqrt(s + eps);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] * inv[i];
  }
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [inv = std::move(inv), m, n](Node<T>& self) {
    auto& na = *self.inputs[0];
    auto& g = na.ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * na.value[i * n + j];
      const T inv3 = inv[i] * inv[i] * inv[i];
      for (std::size_t j = 0; j < n; ++j)
        g[i * n + j] += self.grad[i * n + j] * inv[i] - na.value[i * n + j] * dot * inv3;
    }
  });
}

template <class T>
Tensor<T> inverse3(const Tensor<T>& a) {
  if (a.size() != 9) throw ShapeError("inverse3: expected 3x3, got shape " + shape_string(a.shape()));
  const auto m = a.values();
  const T c00 = m[4] * m[8] - m[5] * m[7];
  const T c01 = m[5] * m[6] - m[3] * m[8];
  const T c02 = m[3] * m[7] - m[4] * m[6];
  const T det = m[0] * c00 + m[1] * c01 + m[2] * c02;
  if (det == T(0) || !std::isfinite(det)) throw NumericalError("inverse3: singular matrix");
  const T id = T(1) / det;
  std::vector<T> b = {c00 * id,
                      (m[2] * m[7] - m[1] * m[8]) * id,
                      (m[1] * m[5] - m[2] * m[4]) * id,
                      c01 * id,
                      (m[0] * m[8] - m[2] * m[6]) * id,
                      (m[2] * m[3] - m[0] * m[5]) * id,
                      c02 * id,
                      (m[1] * m[6] - m[0] * m[7]) * id,
                      (m[0] * m[4] - m[1] * m[3]) * id};
  return make_result<T>({3, 3}, std::move(b), {a.node()}, [](Node<T>& self) {
    // dA = -B^T G B^T with B = A^{-1}.
    const auto& B = self.value;
    const auto& G = self.grad;
    T tmp[9];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        T acc = T(0);
        for (int k = 0; k < 3; ++k) acc += B[k * 3 + i] * G[k * 3 + j];
        tmp[i * 3 + j] = acc;
      }
    auto& g = self.inputs[0]->ensure_grad();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        T acc = T(0);
        for (int k = 0; k < 3; ++k) acc += tmp[i * 3 + k] * B[j * 3 + k];
        g[i * 3 + j] -= acc;
      }
  });
}

#define GEOUP_AD_INSTANTIATE(T)                                                      \
  template class Tensor<T>;                                                          \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                            \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> transpose<T>(const Tensor<T>&);                                 \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> minimum<T>(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> add_bias<T>(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> scale_rows<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                  \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                             \
  template Tensor<T> relu<T>(const Tensor<T>&);                                      \
  template Tensor<T> square<T>(const Tensor<T>&);                                    \
  template Tensor<T> sqrt<T>(const Tensor<T>&);                                      \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);                      \
  template Tensor<T> reduce_max<T>(const Tensor<T>&, std::size_t);                   \
  template Tensor<T> reduce_sum<T>(const Tensor<T>&, std::size_t);                   \
  template Tensor<T> sum<T>(const Tensor<T>&);                                       \
  template Tensor<T> mean<T>(const Tensor<T>&);                                      \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, std::size_t);          \
  template Tensor<T> gather_rows<T>(const Tensor<T>&, std::span<const int>);         \
  template Tensor<T> select_cols<T>(const Tensor<T>&, std::span<const int>);         \
  template Tensor<T> normalize_rows<T>(const Tensor<T>&, T);                         \
  template Tensor<T> inverse3<T>(const Tensor<T>&);

GEOUP_AD_INSTANTIATE(float)
GEOUP_AD_INSTANTIATE(double)

template Tensor<float> cast<float, float>(const Tensor<float>&);
template Tensor<double> cast<double, float>(const Tensor<float>&);
template Tensor<float> cast<float, double>(const Tensor<double>&);
template Tensor<double> cast<double, double>(const Tensor<double>&);

}  // namespace geoup::ad
