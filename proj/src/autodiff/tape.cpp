#include "dar/autodiff/tape.hpp"

#include "dar/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dar::ad {

namespace {

const Tape::Node& node_of(Var v) { return v.tape().node(v.id()); }

void same_tape(Var a, Var b, const char* op) {
    if (&a.tape() != &b.tape())
        throw ContractError(std::string(op) + ": operands live on different tapes");
}

[[noreturn]] void shape_mismatch(const char* op, Var a, Var b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
}

} // namespace

// ---------------------------------------------------------------------------
// Var

std::size_t Var::rows() const { return node_of(*this).rows; }
std::size_t Var::cols() const { return node_of(*this).cols; }
std::span<const double> Var::value() const { return node_of(*this).value; }
std::span<const double> Var::grad() const { return node_of(*this).grad; }

double Var::item() const {
    if (rows() != 1 || cols() != 1)
        throw ContractError("item() on non-scalar of shape " + shape_str(shape()));
    return value()[0];
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::param(Tensor& t) {
    if (auto it = param_ids_.find(&t); it != param_ids_.end()) return Var(this, it->second);
    Node n;
    n.rows = t.rows();
    n.cols = t.cols();
    n.value.assign(t.data().begin(), t.data().end());
    n.needs_grad = t.requires_grad();
    n.leaf = &t;
    auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(std::move(n));
    param_ids_.emplace(&t, id);
    return Var(this, id);
}

Var Tape::constant(Tensor t) {
    return constant(t.rows(), t.cols(), std::vector<double>(t.data().begin(), t.data().end()));
}

Var Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> data) {
    if (data.size() != rows * cols)
        throw ShapeError("constant: data length " + std::to_string(data.size()) +
                         " does not match " + shape_str({rows, cols}));
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.value = std::move(data);
    auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(std::move(n));
    return Var(this, id);
}

Var Tape::zeros(std::size_t rows, std::size_t cols) {
    return constant(rows, cols, std::vector<double>(rows * cols, 0.0));
}

Var Tape::push(std::size_t rows, std::size_t cols, std::vector<double> value,
               std::initializer_list<Var> parents, Backward backward) {
    return push(rows, cols, std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Tape::push(std::size_t rows, std::size_t cols, std::vector<double> value,
               std::span<const Var> parents, Backward backward) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.value = std::move(value);
    for (Var p : parents) {
        if (&p.tape() != this) throw ContractError("operand recorded on a different tape");
        n.needs_grad = n.needs_grad || nodes_[p.id()].needs_grad;
    }
    if (n.needs_grad) n.backward = std::move(backward);
    auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(std::move(n));
    return Var(this, id);
}

std::span<double> Tape::grad_of(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

void Tape::backward(Var loss) {
    if (&loss.tape() != this) throw ContractError("backward: loss recorded on a different tape");
    if (loss.rows() != 1 || loss.cols() != 1)
        throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    for (auto& n : nodes_) n.grad.clear();
    grad_of(loss.id())[0] = 1.0;
    for (std::int64_t i = loss.id(); i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.empty() || !n.needs_grad) continue;
        if (n.backward) n.backward(*this, static_cast<std::uint32_t>(i));
    }
    for (auto& n : nodes_) {
        if (n.leaf == nullptr || n.grad.empty() || !n.leaf->requires_grad()) continue;
        auto g = n.leaf->grad();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
}

// ---------------------------------------------------------------------------
// Core ops

namespace {

// C += A B for row-major A (m x k), B (k x n), C (m x n). Each output entry
// is accumulated over p in ascending order in a register block, so row i of
// the result depends only on row i of A and never on m.
template <int W>
void gemm_block(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
                std::size_t j0) {
    using Block = Eigen::Array<double, W, 1>;
    Block acc = Block::Zero();
    for (std::size_t p = 0; p < k; ++p) acc += a[p] * Eigen::Map<const Block>(b + p * n + j0);
    Eigen::Map<Block>(c + j0) += acc;
}

void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) gemm_block<8>(arow, b, crow, k, n, j);
        for (; j + 4 <= n; j += 4) gemm_block<4>(arow, b, crow, k, n, j);
        for (; j < n; ++j) gemm_block<1>(arow, b, crow, k, n, j);
    }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

// da += g b^T and db += a^T g for a (m x k), b (k x n).
void matmul_backward(Tape& t, std::uint32_t ia, std::uint32_t ib, const double* g, std::size_t m,
                     std::size_t k, std::size_t n) {
    const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
               N = static_cast<Eigen::Index>(n);
    MapC G(g, M, N);
    if (t.needs_grad(ia)) Map(t.grad_of(ia).data(), M, K).noalias() += G * MapC(t.node(ib).value.data(), K, N).transpose();
    if (t.needs_grad(ib)) Map(t.grad_of(ib).data(), K, N).noalias() += MapC(t.node(ia).value.data(), M, K).transpose() * G;
}

} // namespace

Var matmul(Var a, Var b) {
    same_tape(a, b, "matmul");
    if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    gemm_acc(a.value().data(), b.value().data(), out.data(), m, k, n);
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(m, n, std::move(out), {a, b}, [ia, ib, m, k, n](Tape& t, std::uint32_t self) {
        matmul_backward(t, ia, ib, t.node(self).grad.data(), m, k, n);
    });
}

Var linear(Var x, Var w, Var b, bool relu_out) {
    same_tape(x, w, "linear");
    same_tape(x, b, "linear");
    if (x.cols() != w.rows()) shape_mismatch("linear", x, w);
    if (b.rows() != 1 || b.cols() != w.cols()) shape_mismatch("linear", w, b);
    const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
    std::vector<double> out(m * n);
    auto bv = b.value();
    for (std::size_t i = 0; i < m; ++i) std::copy(bv.begin(), bv.end(), out.begin() + static_cast<std::ptrdiff_t>(i * n));
    gemm_acc(x.value().data(), w.value().data(), out.data(), m, k, n);
    if (relu_out)
        for (double& v : out) v = v > 0.0 ? v : 0.0;
    const auto ix = x.id(), iw = w.id(), ib = b.id();
    return x.tape().push(m, n, std::move(out), {x, w, b},
                         [ix, iw, ib, m, k, n, relu_out](Tape& t, std::uint32_t self) {
                             const auto& node = t.node(self);
                             std::vector<double> masked;
                             const double* g = node.grad.data();
                             if (relu_out) {
                                 masked.resize(m * n);
                                 for (std::size_t q = 0; q < m * n; ++q)
                                     masked[q] = node.value[q] > 0.0 ? node.grad[q] : 0.0;
                                 g = masked.data();
                             }
                             if (t.needs_grad(ib)) {
                                 auto db = t.grad_of(ib);
                                 for (std::size_t i = 0; i < m; ++i)
                                     for (std::size_t j = 0; j < n; ++j) db[j] += g[i * n + j];
                             }
                             matmul_backward(t, ix, iw, g, m, k, n);
                         });
}

Var gather_sum(std::span<const GatherTerm> terms, Var bias, bool relu_out) {
    if (terms.empty()) throw ShapeError("gather_sum: no terms");
    const std::size_t c = terms[0].value.cols();
    const std::size_t m = terms[0].index ? terms[0].index->size() : terms[0].value.rows();
    std::vector<Var> parents;
    std::vector<std::uint32_t> ids;
    std::vector<std::vector<std::uint32_t>> index;
    for (const auto& term : terms) {
        Var v = term.value;
        same_tape(terms[0].value, v, "gather_sum");
        const std::size_t rows = term.index ? term.index->size() : v.rows();
        if (v.cols() != c || rows != m) shape_mismatch("gather_sum", terms[0].value, v);
        if (term.index)
            for (auto r : *term.index)
                if (r >= v.rows())
                    throw IndexError("gather_sum: index " + std::to_string(r) + " outside " +
                                     shape_str(v.shape()));
        parents.push_back(v);
        ids.push_back(v.id());
        index.emplace_back(term.index ? std::vector<std::uint32_t>(term.index->begin(), term.index->end())
                                      : std::vector<std::uint32_t>{});
    }
    const bool has_bias = bias.valid();
    if (has_bias) {
        if (bias.rows() != 1 || bias.cols() != c) shape_mismatch("gather_sum", terms[0].value, bias);
        parents.push_back(bias);
    }
    std::vector<double> out(m * c, 0.0);
    for (std::size_t q = 0; q < ids.size(); ++q) {
        const double* v = parents[q].value().data();
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = v + (index[q].empty() ? i : index[q][i]) * c;
            double* o = out.data() + i * c;
            for (std::size_t j = 0; j < c; ++j) o[j] += row[j];
        }
    }
    if (has_bias) {
        auto bv = bias.value();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bv[j];
    }
    if (relu_out)
        for (double& v : out) v = v > 0.0 ? v : 0.0;
    const std::uint32_t ibias = has_bias ? bias.id() : 0;
    return terms[0].value.tape().push(
        m, c, std::move(out), parents,
        [ids = std::move(ids), index = std::move(index), has_bias, ibias, m, c, relu_out](
            Tape& t, std::uint32_t self) {
            const auto& node = t.node(self);
            std::vector<double> masked;
            const double* g = node.grad.data();
            if (relu_out) {
                masked.resize(m * c);
                for (std::size_t q = 0; q < m * c; ++q) masked[q] = node.value[q] > 0.0 ? node.grad[q] : 0.0;
                g = masked.data();
            }
            for (std::size_t q = 0; q < ids.size(); ++q) {
                if (!t.needs_grad(ids[q])) continue;
                double* d = t.grad_of(ids[q]).data();
                for (std::size_t i = 0; i < m; ++i) {
                    double* row = d + (index[q].empty() ? i : index[q][i]) * c;
                    for (std::size_t j = 0; j < c; ++j) row[j] += g[i * c + j];
                }
            }
            if (has_bias && t.needs_grad(ibias)) {
                auto db = t.grad_of(ibias);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < c; ++j) db[j] += g[i * c + j];
            }
        });
}

namespace {

template <class Fwd, class Bwd>
Var elementwise_binary(Var a, Var b, const char* name, Fwd fwd, Bwd bwd) {
    same_tape(a, b, name);
    if (a.shape() != b.shape()) shape_mismatch(name, a, b);
    auto av = a.value();
    auto bv = b.value();
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = fwd(av[k], bv[k]);
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(a.rows(), a.cols(), std::move(out), {a, b},
                         [ia, ib, bwd](Tape& t, std::uint32_t self) {
                             const auto& g = t.node(self).grad;
                             const auto& av = t.node(ia).value;
                             const auto& bv = t.node(ib).value;
                             if (t.needs_grad(ia)) {
                                 auto da = t.grad_of(ia);
                                 for (std::size_t k = 0; k < g.size(); ++k)
                                     da[k] += g[k] * bwd(av[k], bv[k], 0);
                             }
                             if (t.needs_grad(ib)) {
                                 auto db = t.grad_of(ib);
                                 for (std::size_t k = 0; k < g.size(); ++k)
                                     db[k] += g[k] * bwd(av[k], bv[k], 1);
                             }
                         });
}

// Unary op whose derivative is expressed through the output value.
template <class Fwd, class Dout>
Var elementwise_unary(Var a, Fwd fwd, Dout dout) {
    auto av = a.value();
    std::vector<double> out(av.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = fwd(av[k]);
    const auto ia = a.id();
    return a.tape().push(a.rows(), a.cols(), std::move(out), {a},
                         [ia, dout](Tape& t, std::uint32_t self) {
                             const auto& n = t.node(self);
                             auto da = t.grad_of(ia);
                             const auto& x = t.node(ia).value;
                             for (std::size_t k = 0; k < n.grad.size(); ++k)
                                 da[k] += n.grad[k] * dout(x[k], n.value[k]);
                         });
}

} // namespace

Var add(Var a, Var b) {
    return elementwise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, int) { return 1.0; });
}

Var sub(Var a, Var b) {
    return elementwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, int which) { return which == 0 ? 1.0 : -1.0; });
}

Var mul(Var a, Var b) {
    return elementwise_binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double x, double y, int which) { return which == 0 ? y : x; });
}

Var scale(Var a, double s) {
    return elementwise_unary(
        a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var relu(Var a) {
    return elementwise_unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
    return elementwise_unary(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
    return elementwise_unary(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Var add_row(Var a, Var row) {
    same_tape(a, row, "add_row");
    if (row.rows() != 1 || row.cols() != a.cols()) shape_mismatch("add_row", a, row);
    const std::size_t m = a.rows(), c = a.cols();
    auto av = a.value();
    auto rv = row.value();
    std::vector<double> out(m * c);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] + rv[j];
    const auto ia = a.id(), ir = row.id();
    return a.tape().push(m, c, std::move(out), {a, row}, [ia, ir, m, c](Tape& t, std::uint32_t self) {
        const auto& g = t.node(self).grad;
        if (t.needs_grad(ia)) {
            auto da = t.grad_of(ia);
            for (std::size_t k = 0; k < g.size(); ++k) da[k] += g[k];
        }
        if (t.needs_grad(ir)) {
            auto dr = t.grad_of(ir);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < c; ++j) dr[j] += g[i * c + j];
        }
    });
}

Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no operands");
    const std::size_t m = parts[0].rows();
    std::size_t total = 0;
    for (Var p : parts) {
        if (p.rows() != m) shape_mismatch("concat_cols", parts[0], p);
        total += p.cols();
    }
    std::vector<double> out(m * total);
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> widths;
    std::size_t offset = 0;
    for (Var p : parts) {
        auto pv = p.value();
        const std::size_t w = p.cols();
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(pv.data() + i * w, w, out.data() + i * total + offset);
        offset += w;
        ids.push_back(p.id());
        widths.push_back(w);
    }
    return parts[0].tape().push(
        m, total, std::move(out), parts,
        [ids = std::move(ids), widths = std::move(widths), m, total](Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            std::size_t off = 0;
            for (std::size_t q = 0; q < ids.size(); ++q) {
                const std::size_t w = widths[q];
                if (t.needs_grad(ids[q])) {
                    auto d = t.grad_of(ids[q]);
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < w; ++j) d[i * w + j] += g[i * total + off + j];
                }
                off += w;
            }
        });
}

Var transpose(Var a) {
    const std::size_t m = a.rows(), n = a.cols();
    auto av = a.value();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
    const auto ia = a.id();
    return a.tape().push(n, m, std::move(out), {a}, [ia, m, n](Tape& t, std::uint32_t self) {
        const auto& g = t.node(self).grad;
        auto da = t.grad_of(ia);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[j * m + i];
    });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
    if (rows * cols != a.rows() * a.cols())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str({rows, cols}));
    auto av = a.value();
    const auto ia = a.id();
    return a.tape().push(rows, cols, std::vector<double>(av.begin(), av.end()), {a},
                         [ia](Tape& t, std::uint32_t self) {
                             const auto& g = t.node(self).grad;
                             auto da = t.grad_of(ia);
                             for (std::size_t k = 0; k < g.size(); ++k) da[k] += g[k];
                         });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.rows())
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") outside " + shape_str(a.shape()));
    const std::size_t c = a.cols();
    auto av = a.value();
    std::vector<double> out(av.begin() + static_cast<std::ptrdiff_t>(begin * c),
                            av.begin() + static_cast<std::ptrdiff_t>(end * c));
    const auto ia = a.id();
    return a.tape().push(end - begin, c, std::move(out), {a},
                         [ia, begin, c](Tape& t, std::uint32_t self) {
                             const auto& g = t.node(self).grad;
                             auto da = t.grad_of(ia);
                             for (std::size_t k = 0; k < g.size(); ++k) da[begin * c + k] += g[k];
                         });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.cols())
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") outside " + shape_str(a.shape()));
    const std::size_t m = a.rows(), c = a.cols(), w = end - begin;
    auto av = a.value();
    std::vector<double> out(m * w);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * c + begin + j];
    const auto ia = a.id();
    return a.tape().push(m, w, std::move(out), {a}, [ia, m, c, w, begin](Tape& t, std::uint32_t self) {
        const auto& g = t.node(self).grad;
        auto da = t.grad_of(ia);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) da[i * c + begin + j] += g[i * w + j];
    });
}

Var detach(Var a) {
    auto av = a.value();
    return a.tape().constant(a.rows(), a.cols(), std::vector<double>(av.begin(), av.end()));
}

Var gather_rows(Var a, std::span<const std::uint32_t> index) {
    const std::size_t c = a.cols(), m = a.rows();
    auto av = a.value();
    std::vector<double> out(index.size() * c);
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= m)
            throw IndexError("gather_rows: index " + std::to_string(index[k]) + " outside " +
                             shape_str(a.shape()));
        std::copy_n(av.data() + index[k] * c, c, out.data() + k * c);
    }
    const auto ia = a.id();
    std::vector<std::uint32_t> idx(index.begin(), index.end());
    return a.tape().push(index.size(), c, std::move(out), {a},
                         [ia, c, idx = std::move(idx)](Tape& t, std::uint32_t self) {
                             const auto& g = t.node(self).grad;
                             auto da = t.grad_of(ia);
                             for (std::size_t k = 0; k < idx.size(); ++k)
                                 for (std::size_t j = 0; j < c; ++j) da[idx[k] * c + j] += g[k * c + j];
                         });
}

Var gather_entries(Var a, std::span<const std::pair<std::uint32_t, std::uint32_t>> at) {
    const std::size_t c = a.cols();
    auto av = a.value();
    std::vector<double> out(at.size());
    std::vector<std::size_t> flat(at.size());
    for (std::size_t k = 0; k < at.size(); ++k) {
        if (at[k].first >= a.rows() || at[k].second >= c)
            throw IndexError("gather_entries: (" + std::to_string(at[k].first) + ", " +
                             std::to_string(at[k].second) + ") outside " + shape_str(a.shape()));
        flat[k] = at[k].first * c + at[k].second;
        out[k] = av[flat[k]];
    }
    const auto ia = a.id();
    return a.tape().push(at.size(), 1, std::move(out), {a},
                         [ia, flat = std::move(flat)](Tape& t, std::uint32_t self) {
                             const auto& g = t.node(self).grad;
                             auto da = t.grad_of(ia);
                             for (std::size_t k = 0; k < flat.size(); ++k) da[flat[k]] += g[k];
                         });
}

Var scatter_entries(Var v, std::span<const std::pair<std::uint32_t, std::uint32_t>> at,
                    std::size_t n) {
    if (v.cols() != 1 || v.rows() != at.size())
        throw ShapeError("scatter_entries: values " + shape_str(v.shape()) + " for " +
                         std::to_string(at.size()) + " entries");
    auto vv = v.value();
    std::vector<double> out(n * n, 0.0);
    std::vector<std::size_t> flat(at.size());
    for (std::size_t k = 0; k < at.size(); ++k) {
        if (at[k].first >= n || at[k].second >= n)
            throw IndexError("scatter_entries: (" + std::to_string(at[k].first) + ", " +
                             std::to_string(at[k].second) + ") outside n=" + std::to_string(n));
        flat[k] = at[k].first * n + at[k].second;
        out[flat[k]] = vv[k];
    }
    const auto iv = v.id();
    return v.tape().push(n, n, std::move(out), {v},
                         [iv, flat = std::move(flat)](Tape& t, std::uint32_t self) {
                             const auto& g = t.node(self).grad;
                             auto dv = t.grad_of(iv);
                             for (std::size_t k = 0; k < flat.size(); ++k) dv[k] += g[flat[k]];
                         });
}

Var outer_add(Var u, Var v, Var bias, bool relu_out) {
    same_tape(u, v, "outer_add");
    if (u.cols() != v.cols()) shape_mismatch("outer_add", u, v);
    const std::size_t n = u.rows(), m = v.rows(), d = u.cols();
    const bool has_bias = bias.valid();
    if (has_bias && (bias.rows() != 1 || bias.cols() != d)) shape_mismatch("outer_add", u, bias);
    auto uv = u.value();
    auto vv = v.value();
    std::vector<double> zero;
    if (!has_bias) zero.assign(d, 0.0);
    const double* bv = has_bias ? bias.value().data() : zero.data();
    std::vector<double> out(n * m * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double* o = out.data() + (i * m + j) * d;
            for (std::size_t c = 0; c < d; ++c) {
                const double x = uv[i * d + c] + vv[j * d + c] + bv[c];
                o[c] = relu_out && !(x > 0.0) ? 0.0 : x;
            }
        }
    const auto iu = u.id(), iv = v.id();
    const std::uint32_t ib = has_bias ? bias.id() : 0;
    std::vector<Var> parents{u, v};
    if (has_bias) parents.push_back(bias);
    return u.tape().push(n * m, d, std::move(out), parents,
                         [iu, iv, ib, has_bias, relu_out, n, m, d](Tape& t, std::uint32_t self) {
        const auto& node = t.node(self);
        std::vector<double> g(node.grad.begin(), node.grad.end());
        if (relu_out)
            for (std::size_t q = 0; q < g.size(); ++q)
                if (!(node.value[q] > 0.0)) g[q] = 0.0;
        // Column sums per block of rows sharing u[i].
        std::vector<double> gi(n * d, 0.0), gj(m * d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double* row = g.data() + (i * m + j) * d;
                for (std::size_t c = 0; c < d; ++c) {
                    gi[i * d + c] += row[c];
                    gj[j * d + c] += row[c];
                }
            }
        if (t.needs_grad(iu)) {
            auto du = t.grad_of(iu);
            for (std::size_t q = 0; q < gi.size(); ++q) du[q] += gi[q];
        }
        if (t.needs_grad(iv)) {
            auto dv = t.grad_of(iv);
            for (std::size_t q = 0; q < gj.size(); ++q) dv[q] += gj[q];
        }
        if (has_bias && t.needs_grad(ib)) {
            auto db = t.grad_of(ib);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < d; ++c) db[c] += gi[i * d + c];
        }
    });
}

Var row_sum(Var a) {
    const std::size_t m = a.rows(), c = a.cols();
    auto av = a.value();
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i] += av[i * c + j];
    const auto ia = a.id();
    return a.tape().push(m, 1, std::move(out), {a}, [ia, m, c](Tape& t, std::uint32_t self) {
        const auto& g = t.node(self).grad;
        auto da = t.grad_of(ia);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) da[i * c + j] += g[i];
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double x : a.value()) s += x;
    const auto ia = a.id();
    return a.tape().push(1, 1, {s}, {a}, [ia](Tape& t, std::uint32_t self) {
        const double g = t.node(self).grad[0];
        for (double& d : t.grad_of(ia)) d += g;
    });
}

Var mean(Var a) {
    const auto count = static_cast<double>(a.value().size());
    if (count == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / count);
}

Var segment_aggregate(Var messages, std::span<const std::uint32_t> targets, std::size_t n,
                      Aggregation op) {
    const std::size_t m = messages.rows(), d = messages.cols();
    if (targets.size() != m)
        throw ShapeError("segment_aggregate: " + std::to_string(targets.size()) +
                         " targets for messages " + shape_str(messages.shape()));
    for (auto tgt : targets)
        if (tgt >= n)
            throw IndexError("segment_aggregate: target " + std::to_string(tgt) +
                             " outside [0, " + std::to_string(n) + ")");
    auto mv = messages.value();
    std::vector<double> out(n * d, 0.0);
    std::vector<std::uint32_t> count(n, 0);
    // Winning message per (segment, column); only used for max.
    std::vector<std::int64_t> arg;
    if (op == Aggregation::max) arg.assign(n * d, -1);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t s = targets[k];
        const double* row = mv.data() + k * d;
        double* o = out.data() + s * d;
        if (op == Aggregation::max) {
            for (std::size_t c = 0; c < d; ++c) {
                if (arg[s * d + c] < 0 || row[c] > o[c]) {
                    o[c] = row[c];
                    arg[s * d + c] = static_cast<std::int64_t>(k);
                }
            }
        } else {
            for (std::size_t c = 0; c < d; ++c) o[c] += row[c];
        }
        ++count[s];
    }
    if (op == Aggregation::mean)
        for (std::size_t s = 0; s < n; ++s)
            if (count[s] > 0)
                for (std::size_t c = 0; c < d; ++c) out[s * d + c] /= count[s];

    const auto im = messages.id();
    std::vector<std::uint32_t> tg(targets.begin(), targets.end());
    return messages.tape().push(
        n, d, std::move(out), {messages},
        [im, d, op, tg = std::move(tg), count = std::move(count), arg = std::move(arg)](
            Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            auto dm = t.grad_of(im);
            if (op == Aggregation::max) {
                for (std::size_t q = 0; q < arg.size(); ++q)
                    if (arg[q] >= 0) dm[static_cast<std::size_t>(arg[q]) * d + q % d] += g[q];
                return;
            }
            for (std::size_t k = 0; k < tg.size(); ++k) {
                const std::size_t s = tg[k];
                const double w = op == Aggregation::mean ? 1.0 / count[s] : 1.0;
                for (std::size_t c = 0; c < d; ++c) dm[k * d + c] += w * g[s * d + c];
            }
        });
}

Var masked_aggregate(Var messages, std::span<const std::uint8_t> mask, std::size_t n,
                     Aggregation op) {
    const std::size_t d = messages.cols();
    if (messages.rows() != n * n || mask.size() != n * n)
        throw ShapeError("masked_aggregate: expected " + std::to_string(n * n) +
                         " message rows and mask entries, got " + shape_str(messages.shape()) +
                         " and " + std::to_string(mask.size()));
    auto mv = messages.value();
    std::vector<double> out(n * d, 0.0);
    std::vector<std::uint32_t> count(n, 0);
    std::vector<std::int64_t> arg;
    if (op == Aggregation::max) arg.assign(n * d, -1);
    for (std::size_t i = 0; i < n; ++i) {
        double* o = out.data() + i * d;
        for (std::size_t j = 0; j < n; ++j) {
            if (!mask[i * n + j]) continue;
            const std::size_t k = i * n + j;
            const double* row = mv.data() + k * d;
            if (op == Aggregation::max) {
                for (std::size_t c = 0; c < d; ++c)
                    if (arg[i * d + c] < 0 || row[c] > o[c]) {
                        o[c] = row[c];
                        arg[i * d + c] = static_cast<std::int64_t>(k);
                    }
            } else {
                for (std::size_t c = 0; c < d; ++c) o[c] += row[c];
            }
            ++count[i];
        }
        if (op == Aggregation::mean && count[i] > 0)
            for (std::size_t c = 0; c < d; ++c) o[c] /= count[i];
    }
    const auto im = messages.id();
    std::vector<std::uint8_t> mk(mask.begin(), mask.end());
    return messages.tape().push(
        n, d, std::move(out), {messages},
        [im, n, d, op, mk = std::move(mk), count = std::move(count), arg = std::move(arg)](
            Tape& t, std::uint32_t self) {
            const auto& g = t.node(self).grad;
            auto dm = t.grad_of(im);
            if (op == Aggregation::max) {
                for (std::size_t q = 0; q < arg.size(); ++q)
                    if (arg[q] >= 0) dm[static_cast<std::size_t>(arg[q]) * d + q % d] += g[q];
                return;
            }
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    if (!mk[i * n + j]) continue;
                    const double w = op == Aggregation::mean ? 1.0 / count[i] : 1.0;
                    for (std::size_t c = 0; c < d; ++c) dm[(i * n + j) * d + c] += w * g[i * d + c];
                }
        });
}

Var mask_fill(Var a, std::span<const std::uint8_t> mask, double fill) {
    if (mask.size() != a.value().size())
        throw ShapeError("mask_fill: mask of " + std::to_string(mask.size()) + " entries for " +
                         shape_str(a.shape()));
    auto av = a.value();
    std::vector<double> out(av.begin(), av.end());
    for (std::size_t k = 0; k < out.size(); ++k)
        if (!mask[k]) out[k] = fill;
    const auto ia = a.id();
    std::vector<std::uint8_t> mk(mask.begin(), mask.end());
    return a.tape().push(a.rows(), a.cols(), std::move(out), {a},
                         [ia, mk = std::move(mk)](Tape& t, std::uint32_t self) {
                             const auto& g = t.node(self).grad;
                             auto da = t.grad_of(ia);
                             for (std::size_t k = 0; k < g.size(); ++k)
                                 if (mk[k]) da[k] += g[k];
                         });
}

Var antisymmetric_tanh_scale(Var raw, std::span<const double> envelope) {
    const std::size_t n = raw.rows();
    if (raw.cols() != n || envelope.size() != n * n)
        throw ShapeError("antisymmetric_tanh_scale: raw " + shape_str(raw.shape()) +
                         " with envelope of " + std::to_string(envelope.size()) + " entries");
    auto rv = raw.value();
    std::vector<double> out(n * n, 0.0);
    // Derivative of out(i, j) with respect to the antisymmetric pre-activation.
    std::vector<double> slope(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double a = rv[i * n + j] - rv[j * n + i];
            const double cap = a >= 0.0 ? envelope[i * n + j] : envelope[j * n + i];
            const double th = std::tanh(a);
            out[i * n + j] = th * cap;
            slope[i * n + j] = (1.0 - th * th) * cap;
        }
    const auto ir = raw.id();
    return raw.tape().push(n, n, std::move(out), {raw},
                           [ir, n, slope = std::move(slope)](Tape& t, std::uint32_t self) {
                               const auto& g = t.node(self).grad;
                               auto dr = t.grad_of(ir);
                               for (std::size_t i = 0; i < n; ++i)
                                   for (std::size_t j = 0; j < n; ++j) {
                                       const double da = g[i * n + j] * slope[i * n + j];
                                       dr[i * n + j] += da;
                                       dr[j * n + i] -= da;
                                   }
                           });
}

// ---------------------------------------------------------------------------
// Losses

Var softmax_cross_entropy(Var logits, std::span<const std::uint32_t> target) {
    const std::size_t m = logits.rows(), c = logits.cols();
    if (target.size() != m)
        throw ShapeError("softmax_cross_entropy: " + std::to_string(target.size()) +
                         " targets for logits " + shape_str(logits.shape()));
    auto lv = logits.value();
    std::vector<double> prob(m * c, 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (target[i] >= c)
            throw IndexError("softmax_cross_entropy: target " + std::to_string(target[i]) +
                             " outside " + std::to_string(c) + " classes");
        const double* row = lv.data() + i * c;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::isinf(row[j]) && row[j] < 0 ? 0.0 : std::exp(row[j] - mx);
            prob[i * c + j] = e;
            z += e;
        }
        for (std::size_t j = 0; j < c; ++j) prob[i * c + j] /= z;
        loss += (mx + std::log(z)) - row[target[i]];
    }
    loss /= static_cast<double>(m);
    const auto il = logits.id();
    std::vector<std::uint32_t> tg(target.begin(), target.end());
    return logits.tape().push(1, 1, {loss}, {logits},
                              [il, m, c, tg = std::move(tg), prob = std::move(prob)](Tape& t,
                                                                                     std::uint32_t self) {
                                  const double g = t.node(self).grad[0] / static_cast<double>(m);
                                  auto dl = t.grad_of(il);
                                  for (std::size_t i = 0; i < m; ++i) {
                                      for (std::size_t j = 0; j < c; ++j) dl[i * c + j] += g * prob[i * c + j];
                                      dl[i * c + tg[i]] -= g;
                                  }
                              });
}

Var bce_with_logits(Var logits, std::span<const double> target) {
    auto lv = logits.value();
    if (target.size() != lv.size())
        throw ShapeError("bce_with_logits: " + std::to_string(target.size()) + " targets for " +
                         shape_str(logits.shape()));
    const auto count = static_cast<double>(lv.size());
    double loss = 0.0;
    for (std::size_t k = 0; k < lv.size(); ++k) {
        const double x = lv[k];
        loss += std::max(x, 0.0) - x * target[k] + std::log1p(std::exp(-std::abs(x)));
    }
    loss /= count;
    const auto il = logits.id();
    std::vector<double> tg(target.begin(), target.end());
    return logits.tape().push(1, 1, {loss}, {logits},
                              [il, count, tg = std::move(tg)](Tape& t, std::uint32_t self) {
                                  const double g = t.node(self).grad[0] / count;
                                  auto dl = t.grad_of(il);
                                  const auto& x = t.node(il).value;
                                  for (std::size_t k = 0; k < tg.size(); ++k)
                                      dl[k] += g * (1.0 / (1.0 + std::exp(-x[k])) - tg[k]);
                              });
}

Var mse_entries(Var a, std::span<const double> target,
                std::span<const std::pair<std::uint32_t, std::uint32_t>> at) {
    const std::size_t c = a.cols();
    if (target.size() != a.value().size())
        throw ShapeError("mse_entries: target of " + std::to_string(target.size()) +
                         " entries for " + shape_str(a.shape()));
    if (at.empty()) return a.tape().zeros(1, 1);
    auto av = a.value();
    std::vector<std::size_t> flat(at.size());
    std::vector<double> diff(at.size());
    double loss = 0.0;
    for (std::size_t k = 0; k < at.size(); ++k) {
        if (at[k].first >= a.rows() || at[k].second >= c)
            throw IndexError("mse_entries: entry outside " + shape_str(a.shape()));
        flat[k] = at[k].first * c + at[k].second;
        diff[k] = av[flat[k]] - target[flat[k]];
        loss += diff[k] * diff[k];
    }
    const auto count = static_cast<double>(at.size());
    loss /= count;
    const auto ia = a.id();
    return a.tape().push(1, 1, {loss}, {a},
                         [ia, count, flat = std::move(flat), diff = std::move(diff)](Tape& t,
                                                                                     std::uint32_t self) {
                             const double g = t.node(self).grad[0];
                             auto da = t.grad_of(ia);
                             for (std::size_t k = 0; k < flat.size(); ++k)
                                 da[flat[k]] += g * 2.0 * diff[k] / count;
                         });
}

} // namespace dar::ad
