#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace edl {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated iff tracked
    bool tracked = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Distributes this node's gradient into its inputs' gradients.
    std::function<void(Node&)> backprop;

    bool is_leaf() const { return inputs.empty(); }
};

}  // namespace detail

// Value-semantic handle to a graph node. Copies are shallow; ops on tracked
// tensors extend the graph, ops on untracked tensors are pure computation.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v);
    static Tensor from(Shape shape, std::vector<double> values);
    // tracked leaf (trainable parameter or input under test)
    static Tensor param(Shape shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::int64_t dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(node_->value.size()); }

    std::span<const double> values() const { return node_->value; }
    std::span<double> mutable_values() { return node_->value; }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->grad; }

    bool tracked() const { return node_->tracked; }
    void set_tracked(bool on);
    void zero_grad();

    // scalar-only access
    double item() const;

    // throws NumericalError naming `what` if any value (or gradient) is non-finite
    void check_finite(const std::string& what) const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Reverse-topological record of the tracked subgraph below a root.
// backward() visits each recorded node exactly once.
class Tape {
public:
    static Tape from(const Tensor& root);
    // Seeds d(root)/d(root) = 1 and propagates. Leaf gradients accumulate
    // across repeated calls; intermediate gradients are recomputed fresh.
    void backward(bool check_finite = true);
    std::size_t node_count() const { return order_.size(); }

private:
    std::vector<detail::Node*> order_;  // inputs before outputs
    std::shared_ptr<detail::Node> root_;
};

// Convenience: Tape::from(root).backward(check_finite). Root must be scalar.
// An untracked root is a no-op (all leaf gradients stay as they are).
void backward(const Tensor& root, bool check_finite = true);

}  // namespace edl
