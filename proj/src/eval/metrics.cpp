#include "dar/eval/metrics.hpp"

#include "dar/algo/max_flow.hpp"
#include "dar/error.hpp"
#include "dar/graph/generators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace dar {

using ad::Var;

nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json j = {{"F_mae", r.F_mae}, {"qual_gap", r.qual_gap}, {"graphs", r.graphs}};
    j["Fbar_mae"] = r.Fbar_mae ? nlohmann::json(*r.Fbar_mae) : nlohmann::json(nullptr);
    j["cut_acc"] = r.cut_acc ? nlohmann::json(*r.cut_acc) : nlohmann::json(nullptr);
    j["r2"] = r.r2 ? nlohmann::json(*r.r2) : nlohmann::json(nullptr);
    return j;
}

double edge_mae(const FlowNetwork& net, std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != net.n * net.n || truth.size() != net.n * net.n)
        throw ShapeError("edge_mae: flows must have n*n entries");
    if (net.edges.empty()) return 0.0;
    double s = 0.0;
    for (const Edge& e : net.edges) {
        const std::size_t k = e.from * net.n + e.to;
        s += std::abs(pred[k] - truth[k]);
    }
    return s / static_cast<double>(net.edges.size());
}

double qualitative_gap(std::span<const double> flow, const FlowNetwork& net, double optimum) {
    const std::size_t n = net.n;
    double out_s = 0.0, in_t = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        out_s += flow[net.source * n + j];
        in_t += flow[j * n + net.sink];
    }
    return std::abs(std::max(std::abs(out_s), std::abs(in_t)) - optimum);
}

double cut_accuracy(std::span<const double> logits, std::span<const std::uint8_t> labels) {
    if (logits.size() != labels.size())
        throw ShapeError("cut_accuracy: " + std::to_string(logits.size()) + " logits for " +
                         std::to_string(labels.size()) + " labels");
    if (labels.empty()) return 1.0;
    std::size_t hits = 0;
    // sigmoid(x) > 0.5 iff x > 0.
    for (std::size_t i = 0; i < labels.size(); ++i) hits += (logits[i] > 0.0) == (labels[i] != 0);
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

MetricsReport evaluate(DarModel& model, const Dataset& ds) {
    MetricsReport rep;
    rep.graphs = ds.items.size();
    if (ds.items.empty()) return rep;
    const bool algo = model.config().variant != Variant::no_algo;
    const bool cut = model.config().has_cut_head();
    double f = 0.0, fbar = 0.0, acc = 0.0, gap = 0.0;
    for (std::size_t k = 0; k < ds.items.size(); ++k) {
        const auto& item = ds.items[k];
        const auto& truth = item.trajectory;
        ad::Tape tape;
        auto steps = rollout(model, tape, item.net, truth.T(), mix_seed(ds.seed, k));
        std::vector<double> final_flow(item.net.n * item.net.n, 0.0);
        if (!steps.empty()) {
            auto v = steps.back().flow.value();
            final_flow.assign(v.begin(), v.end());
        }
        f += edge_mae(item.net, final_flow, truth.final_flow);
        gap += qualitative_gap(final_flow, item.net, flow_value(item.net, truth.final_flow));
        if (algo) {
            double s = 0.0;
            for (std::size_t t = 0; t < steps.size(); ++t)
                s += edge_mae(item.net, steps[t].flow.value(), truth.steps[t].flow);
            fbar += steps.empty() ? 0.0 : s / static_cast<double>(steps.size());
        }
        if (cut) {
            if (steps.empty()) {
                std::vector<double> zero(item.net.n, 0.0);
                acc += cut_accuracy(zero, truth.cut);
            } else {
                acc += cut_accuracy(steps.back().cut_logits.value(), truth.cut);
            }
        }
    }
    const double g = static_cast<double>(ds.items.size());
    rep.F_mae = f / g;
    rep.qual_gap = gap / g;
    if (algo) rep.Fbar_mae = fbar / g;
    if (cut) rep.cut_acc = acc / g;
    return rep;
}

std::vector<double> random_flow_baseline(const FlowNetwork& net, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0xba5e));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> raw(net.n * net.n);
    for (double& x : raw) x = normal(rng);
    ad::Tape tape;
    Var out = DarModel::rescale_flow(tape.constant(net.n, net.n, std::move(raw)), net);
    auto v = out.value();
    return {v.begin(), v.end()};
}

MetricsReport evaluate_random_baseline(const Dataset& ds, std::uint64_t seed) {
    MetricsReport rep;
    rep.graphs = ds.items.size();
    if (ds.items.empty()) return rep;
    std::mt19937_64 coin(mix_seed(seed, 0xc017));
    std::bernoulli_distribution fair(0.5);
    double f = 0.0, fbar = 0.0, acc = 0.0, gap = 0.0;
    for (std::size_t k = 0; k < ds.items.size(); ++k) {
        const auto& item = ds.items[k];
        const auto& truth = item.trajectory;
        auto flow = random_flow_baseline(item.net, mix_seed(seed, k));
        f += edge_mae(item.net, flow, truth.final_flow);
        gap += qualitative_gap(flow, item.net, flow_value(item.net, truth.final_flow));
        double s = 0.0;
        for (std::size_t t = 0; t < truth.T(); ++t)
            s += edge_mae(item.net, random_flow_baseline(item.net, mix_seed(mix_seed(seed, k), t + 1)),
                          truth.steps[t].flow);
        fbar += truth.T() == 0 ? 0.0 : s / static_cast<double>(truth.T());
        std::vector<double> logits(item.net.n);
        for (double& x : logits) x = fair(coin) ? 1.0 : -1.0;
        acc += cut_accuracy(logits, truth.cut);
    }
    const double g = static_cast<double>(ds.items.size());
    rep.F_mae = f / g;
    rep.Fbar_mae = fbar / g;
    rep.cut_acc = acc / g;
    rep.qual_gap = gap / g;
    return rep;
}

double r2_score_linear(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
    const std::size_t m = X.size();
    if (m < 2) throw InvalidArgument("r2 probe needs at least 2 samples, got " + std::to_string(m));
    if (y.size() != m) throw ShapeError("r2 probe: " + std::to_string(y.size()) + " targets for " +
                                        std::to_string(m) + " samples");
    const std::size_t d = X.front().size();
    Eigen::MatrixXd A(m, d + 1);
    Eigen::VectorXd b(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (X[i].size() != d) throw ShapeError("r2 probe: ragged feature rows");
        for (std::size_t c = 0; c < d; ++c) A(i, c) = X[i][c];
        A(i, d) = 1.0;
        b(i) = y[i];
    }
    Eigen::MatrixXd gram = A.transpose() * A;
    gram.diagonal().array() += 1e-8;
    Eigen::VectorXd w = gram.ldlt().solve(A.transpose() * b);
    const double mean = b.mean();
    const double ss_tot = (b.array() - mean).square().sum();
    const double ss_res = (A * w - b).squaredNorm();
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

double r2_probe(DarModel& model, const Dataset& ds) {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (std::size_t k = 0; k < ds.items.size(); ++k) {
        const auto& item = ds.items[k];
        ad::Tape tape;
        auto steps = rollout(model, tape, item.net, item.trajectory.T(), mix_seed(ds.seed, k));
        const std::size_t d = model.config().hidden_dim;
        std::vector<double> pooled(d, 0.0);
        if (!steps.empty()) {
            Var h = steps.back().H;
            std::fill(pooled.begin(), pooled.end(), -std::numeric_limits<double>::infinity());
            for (std::size_t i = 0; i < h.rows(); ++i)
                for (std::size_t c = 0; c < d; ++c) pooled[c] = std::max(pooled[c], h.at(i, c));
        }
        X.push_back(std::move(pooled));
        y.push_back(flow_value(item.net, item.trajectory.final_flow));
    }
    return r2_score_linear(X, y);
}

nlohmann::json export_embeddings(DarModel& model, const Dataset& ds) {
    nlohmann::json graphs = nlohmann::json::array();
    const std::size_t d = model.config().hidden_dim;
    for (std::size_t k = 0; k < ds.items.size(); ++k) {
        const auto& item = ds.items[k];
        ad::Tape tape;
        auto steps = rollout(model, tape, item.net, 1, mix_seed(ds.seed, k));
        const std::size_t n = item.net.n;
        std::vector<std::vector<double>> nodes(n, std::vector<double>(d, 0.0));
        if (!steps.empty())
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < d; ++c) nodes[i][c] = steps.front().H.at(i, c);
        nlohmann::json edges = nlohmann::json::array();
        for (const Edge& e : item.net.edges) {
            std::vector<double> row(d);
            for (std::size_t c = 0; c < d; ++c) row[c] = nodes[e.from][c] + nodes[e.to][c];
            edges.push_back({{"from", e.from}, {"to", e.to}, {"embedding", row}});
        }
        graphs.push_back({{"n", n}, {"nodes", nodes}, {"edges", edges}});
    }
    return {{"hidden_dim", d}, {"graphs", graphs}};
}

Summary summarize(std::span<const double> xs) {
    Summary s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    for (double x : xs) s.std += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(s.std / static_cast<double>(xs.size()));
    return s;
}

namespace {

template <typename Get>
std::optional<Summary> collect(std::span<const MetricsReport> reports, Get get) {
    std::vector<double> xs;
    for (const auto& r : reports) {
        std::optional<double> v = get(r);
        if (!v) return std::nullopt;
        xs.push_back(*v);
    }
    if (xs.empty()) return std::nullopt;
    return summarize(xs);
}

} // namespace

nlohmann::json summarize_reports(std::span<const MetricsReport> reports) {
    nlohmann::json j = {{"trials", reports.size()}};
    auto put = [&](const char* key, std::optional<Summary> s) {
        j[key] = s ? nlohmann::json{{"mean", s->mean}, {"std", s->std}} : nlohmann::json(nullptr);
    };
    put("F_mae", collect(reports, [](const MetricsReport& r) { return std::optional(r.F_mae); }));
    put("Fbar_mae", collect(reports, [](const MetricsReport& r) { return r.Fbar_mae; }));
    put("cut_acc", collect(reports, [](const MetricsReport& r) { return r.cut_acc; }));
    put("qual_gap", collect(reports, [](const MetricsReport& r) { return std::optional(r.qual_gap); }));
    put("r2", collect(reports, [](const MetricsReport& r) { return r.r2; }));
    return j;
}

std::string table_csv(const std::vector<std::pair<std::string, std::vector<MetricsReport>>>& rows) {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "model,F_mae,F_std,Fbar_mae,Fbar_std,cut_acc,cut_std,qual_gap,qual_std\n";
    auto cell = [&](std::optional<Summary> s) {
        if (s) os << s->mean << ',' << s->std;
        else os << ',';
    };
    for (const auto& [label, reports] : rows) {
        std::span<const MetricsReport> r(reports);
        os << label << ',';
        cell(collect(r, [](const MetricsReport& m) { return std::optional(m.F_mae); }));
        os << ',';
        cell(collect(r, [](const MetricsReport& m) { return m.Fbar_mae; }));
        os << ',';
        cell(collect(r, [](const MetricsReport& m) { return m.cut_acc; }));
        os << ',';
        cell(collect(r, [](const MetricsReport& m) { return std::optional(m.qual_gap); }));
        os << '\n';
    }
    return os.str();
}

} // namespace dar
