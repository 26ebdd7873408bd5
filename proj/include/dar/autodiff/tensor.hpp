#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dar::ad {

using Shape = std::array<std::size_t, 2>;

std::string shape_str(const Shape& s);

/// Dense row-major matrix of doubles. Vectors are stored as n x 1 or 1 x n.
///
/// A tensor that requires a gradient owns a same-shape gradient buffer; tapes
/// accumulate into it during backward.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, bool requires_grad = false);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data,
           bool requires_grad = false);

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }
    static Tensor identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    Shape shape() const { return {rows_, cols_}; }
    std::size_t size() const { return data_.size(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<double> grad() { return grad_; }
    std::span<const double> grad() const { return grad_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool on);
    void zero_grad();

    bool operator==(const Tensor& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
    bool requires_grad_ = false;
    std::vector<double> grad_;
};

/// p <- p - lr * (g + weight_decay * p) for every tensor in `params`.
///
/// Throws ContractError when handed a tensor that does not require a
/// gradient (a frozen weight).
void sgd_step(std::span<Tensor* const> params, double lr, double weight_decay);

} // namespace dar::ad
