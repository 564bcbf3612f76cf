#include "cosmo/tg/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace tg {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
    return full(shape, Scalar(0), requires_grad);
}

Tensor Tensor::full(const std::vector<int>& shape, Scalar value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->data.assign(static_cast<size_t>(n->numel()), value);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_data(const std::vector<int>& shape, std::vector<Scalar> data,
                         bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = shape;
    if (static_cast<int64_t>(data.size()) != n->numel())
        throw std::invalid_argument("from_data: shape does not match data length");
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::detach() const {
    auto n = std::make_shared<Node>();
    n->shape = node_->shape;
    n->data = node_->data;
    n->requires_grad = false;
    return Tensor(n);
}

namespace {

// Iterative DFS postorder over parent links; result holds each reachable node
// once, children after all their ancestors' dependencies (i.e. topological
// order with the root last).
std::vector<Node*> topo_order(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

void backward_seeded(const Tensor& out, const std::vector<Scalar>& seed) {
    Node* root = out.node().get();
    if (seed.size() != root->data.size())
        throw std::invalid_argument("backward_seeded: seed length mismatch");
    root->ensure_grad();
    for (size_t i = 0; i < seed.size(); ++i) root->grad[i] += seed[i];
    std::vector<Node*> order = topo_order(root);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward) {
            n->ensure_grad();
            n->backward(*n);
        }
    }
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar");
    backward_seeded(loss, {Scalar(1)});
}

}  // namespace tg
