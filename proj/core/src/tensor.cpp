#include "edl/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "edl/errors.hpp"

namespace edl {

std::int64_t shape_size(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::zeros(Shape shape) {
    auto node = std::make_shared<detail::Node>();
    node->value.assign(static_cast<std::size_t>(shape_size(shape)), 0.0);
    node->shape = std::move(shape);
    return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double v) {
    Tensor t = zeros(std::move(shape));
    for (auto& x : t.node()->value) x = v;
    return t;
}

Tensor Tensor::scalar(double v) { return from({}, {v}); }

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    if (shape_size(shape) != static_cast<std::int64_t>(values.size())) {
        throw ShapeError("Tensor::from: shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    return Tensor(std::move(node));
}

Tensor Tensor::param(Shape shape, std::vector<double> values) {
    Tensor t = from(std::move(shape), std::move(values));
    t.set_tracked(true);
    return t;
}

void Tensor::set_tracked(bool on) {
    node_->tracked = on;
    if (on && node_->grad.size() != node_->value.size()) {
        node_->grad.assign(node_->value.size(), 0.0);
    }
    if (!on) node_->grad.clear();
}

void Tensor::zero_grad() {
    for (auto& g : node_->grad) g = 0.0;
}

double Tensor::item() const {
    if (size() != 1) {
        throw ShapeError("Tensor::item: expected a scalar, got shape " + shape_str(shape()));
    }
    return node_->value[0];
}

void Tensor::check_finite(const std::string& what) const {
    for (double v : node_->value) {
        if (!std::isfinite(v)) throw NumericalError("non-finite value in " + what);
    }
    for (double g : node_->grad) {
        if (!std::isfinite(g)) throw NumericalError("non-finite gradient in " + what);
    }
}

Tape Tape::from(const Tensor& root) {
    Tape tape;
    tape.root_ = root.node();
    if (!root.node()->tracked) return tape;

    // iterative post-order DFS over the tracked subgraph
    std::unordered_set<detail::Node*> visited;
    struct Frame {
        detail::Node* node;
        std::size_t next_input;
    };
    std::vector<Frame> stack;
    stack.push_back({root.node().get(), 0});
    visited.insert(root.node().get());
    while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.next_input < top.node->inputs.size()) {
            detail::Node* in = top.node->inputs[top.next_input++].get();
            if (in->tracked && !visited.count(in)) {
                visited.insert(in);
                stack.push_back({in, 0});
            }
        } else {
            tape.order_.push_back(top.node);
            stack.pop_back();
        }
    }
    return tape;
}

void Tape::backward(bool check_finite) {
    if (order_.empty()) return;
    if (root_->value.size() != 1) {
        throw ShapeError("backward: root must be a scalar, got shape " + shape_str(root_->shape));
    }
    // fresh gradients for interior nodes; leaves keep accumulating
    for (detail::Node* n : order_) {
        if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
    root_->grad[0] += 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backprop) n->backprop(*n);
    }
    if (check_finite) {
        for (detail::Node* n : order_) {
            for (double v : n->value) {
                if (!std::isfinite(v)) {
                    throw NumericalError(std::string("non-finite value in op '") + n->op + "'");
                }
            }
            for (double g : n->grad) {
                if (!std::isfinite(g)) {
                    throw NumericalError(std::string("non-finite gradient in op '") + n->op + "'");
                }
            }
        }
    }
}

void backward(const Tensor& root, bool check_finite) {
    if (root.size() != 1) {
        throw ShapeError("backward: root must be a scalar, got shape " + shape_str(root.shape()));
    }
    Tape::from(root).backward(check_finite);
}

}  // namespace edl
