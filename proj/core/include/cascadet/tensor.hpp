#pragma once

// Dense tensors with a dynamic reverse-mode tape.
//
// Every op that sees an input with requires_grad records a node holding its
// inputs and a closure that pushes the node's gradient back into them. The
// graph is owned by the result tensor; dropping the last handle frees it.
// Nodes carry a per-thread creation sequence number, so reverse creation order
// is a valid topological order for backward().

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cascadet {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first touched
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

std::uint64_t next_seq();
bool grad_enabled();

}  // namespace detail

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t rank() const { return shape().size(); }
  std::int64_t numel() const;

  std::span<const T> data() const;
  // Writable view of a leaf's values. Throws for nodes recorded on a tape.
  std::span<T> mutable_data();

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  T item() const;
  T at(std::int64_t flat_index) const { return data()[static_cast<std::size_t>(flat_index)]; }

  // Seeds d(this)/d(this) = 1 and walks the tape in reverse creation order.
  // Gradients of leaves accumulate across calls; interior gradients are reset.
  void backward() const;

  // Same values, no history, no gradient.
  Tensor detach() const;

  const NodePtr& node() const { return node_; }
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

 private:
  NodePtr node_;
};

// Creates the output node of an op. When any input requires grad (and grad
// mode is on) the node is linked into the tape with `backward`.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      std::vector<std::shared_ptr<detail::Node<T>>> inputs,
                      std::function<void(detail::Node<T>&)> backward);

// Checks whether any of the given tensors will record history.
template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> tensors);

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace cascadet
