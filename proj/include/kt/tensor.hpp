#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kt/matrix.hpp"

namespace kt {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense double tensor, row-major, rank 1 or 2. grad is sized on demand and
/// accumulated by Tape::backward.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::string name;

    std::int64_t size() const {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    bool is_scalar() const { return size() == 1; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() { grad.assign(data.size(), 0.0); }

    static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
    static TensorPtr from(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
    static TensorPtr scalar(double value, bool requires_grad = false);
};

/// Records forward primitives and replays them in reverse for gradients.
/// One tape per forward pass; backward consumes the record exactly once.
/// Not thread-safe; parallel model replicas use one Tape each.
class Tape {
public:
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b, bool trans_a = false,
                     bool trans_b = false);
    /// Elementwise add; b may be rank-1 (or 1-row) and broadcast over rows of a.
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    /// Hadamard product, identical shapes.
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr scale(const TensorPtr& a, double factor);
    TensorPtr concat(const std::vector<TensorPtr>& xs, int axis);
    /// out[i] = a[idx[i]], with idx -1 producing a zero row. Gradients to
    /// duplicated source rows accumulate; -1 rows propagate nothing.
    TensorPtr row_gather(const TensorPtr& a, std::vector<int> idx);
    TensorPtr sigmoid(const TensorPtr& a);
    TensorPtr tanh(const TensorPtr& a);
    TensorPtr relu(const TensorPtr& a);
    /// Inverted-dropout with a stateless counter-based mask keyed by key.
    /// Identity when train is false or rate == 0.
    TensorPtr dropout(const TensorPtr& a, double rate, bool train, std::uint64_t key);
    /// Row softmax over permitted entries only. Disallowed entries get weight
    /// exactly 0; a row with no permitted entry yields all zeros.
    TensorPtr softmax_masked(const TensorPtr& logits, const BoolMatrix& allowed);
    /// Mean binary cross-entropy over mask-true positions, probs clamped to
    /// [1e-7, 1 - 1e-7]. Errors if the mask selects nothing.
    TensorPtr bce_masked(const TensorPtr& probs, const std::vector<double>& labels,
                         const std::vector<std::uint8_t>& mask);

    /// Reverse sweep from a scalar loss; populates grad of every tensor that
    /// requires it, then clears the record.
    void backward(const TensorPtr& loss);

    std::size_t recorded_ops() const { return nodes_.size(); }

private:
    struct Node {
        std::function<void()> backprop;
    };
    std::vector<Node> nodes_;
    bool consumed_ = false;

    void record(std::function<void()> fn);
};

/// Max over all parameter entries of |analytic - central difference| /
/// max(1, |central difference|). f re-runs the forward on a fresh tape each
/// call and must return a scalar.
double gradcheck(const std::function<TensorPtr(Tape&)>& f, const std::vector<TensorPtr>& params,
                 double eps);

}  // namespace kt
