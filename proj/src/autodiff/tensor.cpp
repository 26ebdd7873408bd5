#include "dar/autodiff/tensor.hpp"

#include "dar/error.hpp"

#include <algorithm>

namespace dar::ad {

std::string shape_str(const Shape& s) {
    return "[" + std::to_string(s[0]) + "x" + std::to_string(s[1]) + "]";
}

Tensor::Tensor(std::size_t rows, std::size_t cols, bool requires_grad)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    set_requires_grad(requires_grad);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str({rows, cols}));
    set_requires_grad(requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

void Tensor::set_requires_grad(bool on) {
    requires_grad_ = on;
    if (on)
        grad_.assign(data_.size(), 0.0);
    else
        grad_.clear();
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

void sgd_step(std::span<Tensor* const> params, double lr, double weight_decay) {
    for (Tensor* p : params) {
        if (!p->requires_grad())
            throw ContractError("sgd_step: refusing to update a frozen tensor");
    }
    for (Tensor* p : params) {
        auto d = p->data();
        auto g = p->grad();
        for (std::size_t k = 0; k < d.size(); ++k) d[k] -= lr * (g[k] + weight_decay * d[k]);
    }
}

} // namespace dar::ad
