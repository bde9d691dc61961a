#include "cascadet/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace cascadet {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) {
    if (extent < 0) throw std::invalid_argument("negative extent in shape " + shape_str(shape));
    n *= extent;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

namespace {
thread_local std::uint64_t t_seq = 0;
thread_local bool t_grad_enabled = true;
}  // namespace

std::uint64_t next_seq() { return ++t_seq; }
bool grad_enabled() { return t_grad_enabled; }

}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(detail::t_grad_enabled) { detail::t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { detail::t_grad_enabled = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  auto n = static_cast<std::size_t>(shape_numel(shape));
  return from_data(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> data, bool requires_grad) {
  if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
    throw std::invalid_argument("tensor data has " + std::to_string(data.size()) +
                                " elements but shape " + shape_str(shape) + " needs " +
                                std::to_string(shape_numel(shape)));
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  node->seq = detail::next_seq();
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->shape;
}

template <typename T>
std::int64_t Tensor<T>::numel() const {
  return static_cast<std::int64_t>(data().size());
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->value;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_) throw std::logic_error("use of undefined tensor");
  if (node_->backward) throw std::logic_error("in-place write to a tensor recorded on the tape");
  return node_->value;
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return node_ && !node_->grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  if (!node_) throw std::logic_error("use of undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape()));
  return data()[0];
}

template <typename T>
void Tensor<T>::backward() const {
  if (!node_) throw std::logic_error("backward() on undefined tensor");
  if (node_->value.size() != 1) {
    throw std::invalid_argument("backward() needs a scalar root, got shape " + shape_str(node_->shape));
  }
  if (!node_->requires_grad) return;

  using NodeT = detail::Node<T>;
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> seen;
  std::vector<NodeT*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    NodeT* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const NodeT* a, const NodeT* b) { return a->seq > b->seq; });

  for (NodeT* n : order) {
    if (n->backward) {
      n->grad.assign(n->value.size(), T(0));
    }
  }
  node_->ensure_grad();
  node_->grad[0] += T(1);
  for (NodeT* n : order) {
    if (n->backward) n->backward(*n);
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from_data(shape(), node_->value, false);
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      std::vector<std::shared_ptr<detail::Node<T>>> inputs,
                      std::function<void(detail::Node<T>&)> backward) {
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->seq = detail::next_seq();
  if (detail::grad_enabled()) {
    bool any = false;
    for (const auto& in : inputs) any = any || (in && in->requires_grad);
    if (any) {
      node->requires_grad = true;
      node->inputs = std::move(inputs);
      node->backward = std::move(backward);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> tensors) {
  if (!detail::grad_enabled()) return false;
  for (const auto* t : tensors) {
    if (t && t->requires_grad()) return true;
  }
  return false;
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(Shape, std::vector<float>, std::vector<std::shared_ptr<detail::Node<float>>>,
                                   std::function<void(detail::Node<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, std::vector<std::shared_ptr<detail::Node<double>>>,
                                    std::function<void(detail::Node<double>&)>);
template bool any_requires_grad(std::initializer_list<const Tensor<float>*>);
template bool any_requires_grad(std::initializer_list<const Tensor<double>*>);

}  // namespace cascadet
