#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace tg {

#ifdef TG_SCALAR_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One tape entry. `backward` reads this node's grad and accumulates into the
// parents' grads; parents are kept alive through shared_ptr.
struct Node {
    std::vector<int> shape;
    std::vector<Scalar> data;
    std::vector<Scalar> grad;  // allocated lazily, same length as data
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), Scalar(0));
    }
};

// Thread-local switch; with grad disabled, ops produce pure data nodes.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev); }
};

// Value-semantic handle to a graph node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
    static Tensor full(const std::vector<int>& shape, Scalar value, bool requires_grad = false);
    static Tensor from_data(const std::vector<int>& shape, std::vector<Scalar> data,
                            bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    int64_t numel() const { return node_->numel(); }

    std::vector<Scalar>& data() { return node_->data; }
    const std::vector<Scalar>& data() const { return node_->data; }
    std::vector<Scalar>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    void zero_grad() { node_->grad.assign(node_->data.size(), Scalar(0)); }

    Scalar item() const {
        if (node_->numel() != 1) throw std::invalid_argument("item(): tensor is not scalar");
        return node_->data[0];
    }

    // Copy of the data with no graph history.
    Tensor detach() const;

    NodePtr node() const { return node_; }

private:
    NodePtr node_;
};

// Reverse-mode pass from a scalar loss. Visits each reachable node exactly
// once, in reverse topological order; leaf gradients accumulate additively.
void backward(const Tensor& loss);

// Accumulates `seed` (same length as out.data) as d(out) and backpropagates.
void backward_seeded(const Tensor& out, const std::vector<Scalar>& seed);

}  // namespace tg
