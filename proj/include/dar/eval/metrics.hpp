#pragma once

#include "dar/graph/dataset.hpp"
#include "dar/model/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dar {

/// Averages over the graphs of a dataset. MAEs are taken over directed edge
/// entries only.
struct MetricsReport {
    double F_mae = 0.0;
    std::optional<double> Fbar_mae; // absent for no_algo
    std::optional<double> cut_acc;  // absent without a cut head
    double qual_gap = 0.0;
    std::optional<double> r2;
    std::size_t graphs = 0;
};

nlohmann::json report_to_json(const MetricsReport& r);

/// Mean |pred - truth| over the directed edges of `net`.
double edge_mae(const FlowNetwork& net, std::span<const double> pred, std::span<const double> truth);

/// |max(|out-flow of s|, |in-flow of t|) - optimum|.
double qualitative_gap(std::span<const double> flow, const FlowNetwork& net, double optimum);

/// Fraction of nodes whose thresholded sigmoid(logit) matches the label.
double cut_accuracy(std::span<const double> logits, std::span<const std::uint8_t> labels);

/// Rolls out every item for its ground-truth length without teacher forcing.
MetricsReport evaluate(DarModel& model, const Dataset& ds);

/// Standard-normal raw flow pushed through the antisymmetric tanh rescale.
std::vector<double> random_flow_baseline(const FlowNetwork& net, std::uint64_t seed);

/// Random flows for F and fair-coin cut labels.
MetricsReport evaluate_random_baseline(const Dataset& ds, std::uint64_t seed);

/// In-sample R^2 of an ordinary least-squares fit (with intercept and a
/// 1e-8 ridge) of y on the rows of X.
double r2_score_linear(const std::vector<std::vector<double>>& X, const std::vector<double>& y);

/// Max-pools the final latent state of each episode and scores how linearly
/// decodable the optimal flow value is.
double r2_probe(DarModel& model, const Dataset& ds);

/// Node states after the first step and edge embeddings h_i + h_j for
/// every directed edge, one entry per graph.
nlohmann::json export_embeddings(DarModel& model, const Dataset& ds);

struct Summary {
    double mean = 0.0;
    double std = 0.0;
};
/// Mean and population standard deviation.
Summary summarize(std::span<const double> xs);

/// mean +- std over trials for every metric present in all reports.
nlohmann::json summarize_reports(std::span<const MetricsReport> reports);

/// One CSV row per (label, report set): label,F,Fbar,cut_acc,qual_gap.
std::string table_csv(const std::vector<std::pair<std::string, std::vector<MetricsReport>>>& rows);

} // namespace dar
