#pragma once

#include "dar/autodiff/tape.hpp"
#include "dar/graph/generators.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace gradcheck {

using namespace dar;
using namespace dar::ad;


using Builder = std::function<Var(Tape&, std::vector<Var>&)>;

inline std::vector<Tensor> random_inputs(const std::vector<Shape>& shapes, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Tensor> out;
    for (auto [r, c] : shapes) {
        Tensor t(r, c, true);
        for (double& x : t.data()) x = g(rng);
        out.push_back(std::move(t));
    }
    return out;
}

inline double eval_loss(const Builder& f, std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vs;
    for (auto& x : xs) vs.push_back(tape.param(x));
    return f(tape, vs).item();
}

// Worst relative error between backward and central differences (step 1e-4)
// over every input entry. The denominator is floored at 1 so entries with
// vanishing gradient are compared absolutely.
inline double gradient_error(const Builder& f, std::vector<Tensor>& xs) {
    for (auto& x : xs) x.zero_grad();
    {
        Tape tape;
        std::vector<Var> vs;
        for (auto& x : xs) vs.push_back(tape.param(x));
        tape.backward(f(tape, vs));
    }
    const double h = 1e-4;
    double worst = 0.0;
    for (auto& x : xs) {
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double keep = x.data()[k];
            x.data()[k] = keep + h;
            const double up = eval_loss(f, xs);
            x.data()[k] = keep - h;
            const double down = eval_loss(f, xs);
            x.data()[k] = keep;
            const double fd = (up - down) / (2 * h);
            const double an = x.grad()[k];
            worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd) + std::abs(an)));
        }
    }
    return worst;
}

// Projects any tensor to a scalar with fixed pseudo-random weights, so every
// entry of the op's output reaches the loss with a distinct coefficient.
inline Var probe(Tape& t, Var v) {
    std::vector<double> w(v.value().size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::sin(1.0 + 0.7 * static_cast<double>(k));
    return sum(mul(v, t.constant(v.rows(), v.cols(), std::move(w))));
}

struct OpCase {
    const char* name;
    std::vector<Shape> shapes;
    Builder f;
};

inline std::vector<OpCase> op_cases() {
    static const std::vector<std::uint32_t> seg{0, 2, 2, 1, 0, 2};
    static const std::vector<std::uint32_t> idx{2, 0, 1, 1};
    static const std::vector<std::pair<std::uint32_t, std::uint32_t>> at{{0, 1}, {2, 0}, {1, 2}};
    static const std::vector<std::uint8_t> mask{1, 0, 1, 1, 1, 0, 0, 1, 1};
    static const std::vector<double> env{0.0, 0.5, 1.0, 0.5, 0.0, 2.0, 1.0, 0.25, 0.0};
    static const std::vector<std::uint32_t> classes{2, 0, 1};
    static const std::vector<double> labels{1, 0, 1};
    std::vector<OpCase> c;
    c.push_back({"matmul", {{3, 4}, {4, 2}}, [](Tape& t, auto& v) { return probe(t, matmul(v[0], v[1])); }});
    c.push_back({"linear", {{3, 4}, {4, 2}, {1, 2}}, [](Tape& t, auto& v) { return probe(t, linear(v[0], v[1], v[2])); }});
    c.push_back({"linear_relu", {{5, 4}, {4, 3}, {1, 3}},
                 [](Tape& t, auto& v) { return probe(t, linear(v[0], v[1], v[2], true)); }});
    c.push_back({"add", {{2, 3}, {2, 3}}, [](Tape& t, auto& v) { return probe(t, add(v[0], v[1])); }});
    c.push_back({"sub", {{2, 3}, {2, 3}}, [](Tape& t, auto& v) { return probe(t, sub(v[0], v[1])); }});
    c.push_back({"mul", {{2, 3}, {2, 3}}, [](Tape& t, auto& v) { return probe(t, mul(v[0], v[1])); }});
    c.push_back({"scale", {{2, 3}}, [](Tape& t, auto& v) { return probe(t, scale(v[0], -1.7)); }});
    c.push_back({"add_row", {{3, 2}, {1, 2}}, [](Tape& t, auto& v) { return probe(t, add_row(v[0], v[1])); }});
    c.push_back({"concat_cols", {{3, 2}, {3, 1}, {3, 3}},
                 [](Tape& t, auto& v) { return probe(t, concat_cols({v[0], v[1], v[2]})); }});
    c.push_back({"relu", {{4, 3}}, [](Tape& t, auto& v) { return probe(t, relu(v[0])); }});
    c.push_back({"tanh", {{4, 3}}, [](Tape& t, auto& v) { return probe(t, ad::tanh(v[0])); }});
    c.push_back({"sigmoid", {{4, 3}}, [](Tape& t, auto& v) { return probe(t, sigmoid(v[0])); }});
    c.push_back({"transpose", {{2, 3}}, [](Tape& t, auto& v) { return probe(t, transpose(v[0])); }});
    c.push_back({"reshape", {{2, 3}}, [](Tape& t, auto& v) { return probe(t, reshape(v[0], 3, 2)); }});
    c.push_back({"slice_rows", {{4, 2}}, [](Tape& t, auto& v) { return probe(t, slice_rows(v[0], 1, 3)); }});
    c.push_back({"slice_cols", {{2, 4}}, [](Tape& t, auto& v) { return probe(t, slice_cols(v[0], 1, 4)); }});
    c.push_back({"gather_rows", {{3, 2}}, [](Tape& t, auto& v) { return probe(t, gather_rows(v[0], idx)); }});
    c.push_back({"gather_entries", {{3, 3}}, [](Tape& t, auto& v) { return probe(t, gather_entries(v[0], at)); }});
    c.push_back({"scatter_entries", {{3, 1}}, [](Tape& t, auto& v) { return probe(t, scatter_entries(v[0], at, 3)); }});
    c.push_back({"gather_sum", {{3, 2}, {4, 2}, {1, 2}}, [](Tape& t, auto& v) {
                     std::vector<GatherTerm> terms{{v[0], &idx}, {v[1]}};
                     return probe(t, gather_sum(terms, v[2], true));
                 }});
    c.push_back({"outer_add", {{3, 2}, {2, 2}, {1, 2}},
                 [](Tape& t, auto& v) { return probe(t, outer_add(v[0], v[1], v[2], true)); }});
    c.push_back({"outer_add_plain", {{3, 2}, {2, 2}}, [](Tape& t, auto& v) { return probe(t, outer_add(v[0], v[1])); }});
    c.push_back({"row_sum", {{3, 4}}, [](Tape& t, auto& v) { return probe(t, row_sum(v[0])); }});
    c.push_back({"mean", {{3, 4}}, [](Tape& t, auto& v) { return mean(mul(v[0], v[0])); }});
    c.push_back({"segment_max", {{6, 3}}, [](Tape& t, auto& v) {
                     return probe(t, segment_aggregate(v[0], seg, 4, Aggregation::max));
                 }});
    c.push_back({"segment_mean", {{6, 3}}, [](Tape& t, auto& v) {
                     return probe(t, segment_aggregate(v[0], seg, 4, Aggregation::mean));
                 }});
    c.push_back({"segment_sum", {{6, 3}}, [](Tape& t, auto& v) {
                     return probe(t, segment_aggregate(v[0], seg, 4, Aggregation::sum));
                 }});
    c.push_back({"masked_max", {{9, 2}}, [](Tape& t, auto& v) {
                     return probe(t, masked_aggregate(v[0], mask, 3, Aggregation::max));
                 }});
    c.push_back({"masked_mean", {{9, 2}}, [](Tape& t, auto& v) {
                     return probe(t, masked_aggregate(v[0], mask, 3, Aggregation::mean));
                 }});
    c.push_back({"masked_sum", {{9, 2}}, [](Tape& t, auto& v) {
                     return probe(t, masked_aggregate(v[0], mask, 3, Aggregation::sum));
                 }});
    c.push_back({"mask_fill", {{3, 3}}, [](Tape& t, auto& v) { return probe(t, mask_fill(v[0], mask, 0.5)); }});
    c.push_back({"antisymmetric_tanh_scale", {{3, 3}},
                 [](Tape& t, auto& v) { return probe(t, antisymmetric_tanh_scale(v[0], env)); }});
    c.push_back({"softmax_cross_entropy", {{3, 4}}, [](Tape&, auto& v) { return softmax_cross_entropy(v[0], classes); }});
    c.push_back({"softmax_cross_entropy_masked", {{3, 3}}, [](Tape&, auto& v) {
                     return softmax_cross_entropy(mask_fill(v[0], mask, -INFINITY), std::vector<std::uint32_t>{0, 1, 2});
                 }});
    c.push_back({"bce_with_logits", {{3, 1}}, [](Tape&, auto& v) { return bce_with_logits(v[0], labels); }});
    c.push_back({"mse_entries", {{3, 3}}, [](Tape&, auto& v) {
                     return mse_entries(v[0], env, at);
                 }});
    return c;
}

} // namespace gradcheck
