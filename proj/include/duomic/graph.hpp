#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "duomic/tensor.hpp"

namespace duomic {

/// One value in the computation graph. Nodes are produced by the ops in
/// nn_ops.hpp and form a DAG; backward() releases gradients into every node
/// it reaches, leaves included.
template <typename T>
struct NodeT {
    BasicTensor<T> value;
    BasicTensor<T> grad;  // sized lazily by backward()
    bool requires_grad = false;
    std::vector<std::shared_ptr<NodeT<T>>> inputs;
    // Pulls this node's grad into inputs' grads. Empty for leaves.
    std::function<void(NodeT<T>&)> backprop;
};

template <typename T>
using NodePtr = std::shared_ptr<NodeT<T>>;

namespace detail {
inline thread_local int no_grad_depth = 0;
}

/// RAII guard: ops executed under it build no graph edges (inference mode).
class NoGradGuard {
public:
    NoGradGuard() { ++detail::no_grad_depth; }
    ~NoGradGuard() { --detail::no_grad_depth; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

template <typename T>
NodePtr<T> make_leaf(BasicTensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

/// Constant input (targets, class weights): never tracked.
template <typename T>
NodePtr<T> make_const(BasicTensor<T> value) {
    return make_leaf<T>(std::move(value), false);
}

template <typename T>
NodePtr<T> make_node(BasicTensor<T> value, std::vector<NodePtr<T>> inputs,
                     std::function<void(NodeT<T>&)> backprop) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(value);
    if (grad_enabled()) {
        for (const auto& in : inputs)
            if (in->requires_grad) n->requires_grad = true;
        if (n->requires_grad) {
            n->inputs = std::move(inputs);
            n->backprop = std::move(backprop);
        }
    }
    return n;
}

template <typename T>
void ensure_grad(NodeT<T>& n) {
    if (!n.grad.same_shape(n.value)) n.grad = BasicTensor<T>(n.value.shape);
}

/// Topological order of the subgraph reachable from `root` (inputs first).
template <typename T>
std::vector<NodeT<T>*> topo_order(const NodePtr<T>& root) {
    std::vector<NodeT<T>*> order;
    std::unordered_set<NodeT<T>*> done;
    // Iterative post-order DFS; second visit emits the node.
    std::vector<std::pair<NodeT<T>*, std::size_t>> stack{{root.get(), 0}};
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (done.count(node)) {
            stack.pop_back();
            continue;
        }
        if (next < node->inputs.size()) {
            NodeT<T>* child = node->inputs[next++].get();
            if (!done.count(child)) stack.emplace_back(child, 0);
        } else {
            done.insert(node);
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

/// Reverse-mode sweep seeded with d(root)/d(root) = seed. Gradients of every
/// node reachable from `root` are (re)initialized to zero first, so each
/// backward call starts clean; each node's backprop runs exactly once.
template <typename T>
void backward_seed(const NodePtr<T>& root, const BasicTensor<T>& seed) {
    if (!seed.same_shape(root->value))
        throw DimensionError("backward: seed shape " + seed.shape_str() + " does not match root " +
                             root->value.shape_str());
    auto order = topo_order(root);
    for (NodeT<T>* n : order) {
        ensure_grad(*n);
        std::fill(n->grad.data.begin(), n->grad.data.end(), T(0));
    }
    root->grad = seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT<T>* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

/// Standard entry point: root must be scalar (loss).
template <typename T>
void backward(const NodePtr<T>& root) {
    if (root->value.size() != 1)
        throw ValueError("backward: loss must be scalar, got shape " + root->value.shape_str());
    BasicTensor<T> seed(root->value.shape, T(1));
    backward_seed(root, seed);
}

/// Named trainable parameters and non-trainable buffers (running statistics),
/// in stable registration order. The freeze mask lives here.
template <typename T>
class ParamStoreT {
public:
    struct Entry {
        std::string name;
        NodePtr<T> node;
        bool trainable = true;  // false: buffer (bn running stats, counters)
        bool frozen = false;
    };

    NodePtr<T> add(const std::string& name, BasicTensor<T> value, bool trainable = true) {
        if (index_.count(name)) throw ValueError("duplicate parameter name: " + name);
        auto node = make_leaf<T>(std::move(value), trainable);
        index_[name] = entries_.size();
        entries_.push_back(Entry{name, node, trainable, false});
        return node;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Entry& entry(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ValueError("unknown parameter: " + name);
        return entries_[it->second];
    }
    const Entry& entry(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ValueError("unknown parameter: " + name);
        return entries_[it->second];
    }

    NodePtr<T> node(const std::string& name) { return entry(name).node; }
    BasicTensor<T>& value(const std::string& name) { return entry(name).node->value; }
    const BasicTensor<T>& value(const std::string& name) const { return entry(name).node->value; }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    /// Gradient of a parameter after backward(); zero tensor if untouched.
    BasicTensor<T>& grad(const std::string& name) {
        auto& e = entry(name);
        ensure_grad(*e.node);
        return e.node->grad;
    }

    void zero_grads() {
        for (auto& e : entries_) {
            ensure_grad(*e.node);
            std::fill(e.node->grad.data.begin(), e.node->grad.data.end(), T(0));
        }
    }

    std::size_t trainable_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (e.trainable && !e.frozen) n += e.node->value.size();
        return n;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

using ParamStore = ParamStoreT<float>;

}  // namespace duomic
