#pragma once

#include "dar/eval/metrics.hpp"
#include "dar/graph/dataset.hpp"
#include "dar/model/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dar {

struct LossTerms {
    ad::Var total;
    double pointer = 0.0;
    double flow = 0.0;
    double cut = 0.0;
};

/// Pointer cross-entropy (mean over nodes) + flow MSE over directed edges +
/// cut BCE for models with a cut head, summed without weights.
LossTerms step_loss(const StepOutputs& pred, const Trajectory::Step& truth,
                    const std::vector<std::uint8_t>& cut, const FlowNetwork& net,
                    const ModelConfig& config);

/// Step losses over the whole rollout plus the final flow and cut losses.
/// `teacher` switches on forcing for this episode.
ad::Var episode_loss(DarModel& model, ad::Tape& tape, const DatasetItem& item, bool teacher,
                     std::uint64_t feature_seed);

/// decay^epoch.
double gate_probability(std::size_t epoch, double decay);
bool teacher_force_gate(std::size_t epoch, double decay, std::mt19937_64& rng);

struct TrainConfig {
    std::size_t epochs = 20000;
    double lr = 0.009868;
    double weight_decay = 0.001734;
    double teacher_decay = 0.999;
    std::uint64_t seed = 0;
    ModelConfig model;
    /// Validation pass cadence in epochs; the last epoch is always validated.
    std::size_t valid_every = 1;

    void validate() const;
};

/// Best hyperparameters of the search for the dual and primal models.
TrainConfig full_profile(Variant variant);
/// full_profile cut to hidden size 16 and 2000 epochs, validated every 50
/// (paired with 200 training graphs).
TrainConfig desk_profile(Variant variant);

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct CurvePoint {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> valid_F_mae;
    std::optional<double> cut_acc;
};

struct TrainResult {
    DarModel model;
    std::vector<CurvePoint> curve;
    std::size_t best_epoch = 0;
    double best_valid_F_mae = 0.0;
};

using ProgressFn = std::function<void(const CurvePoint&)>;

/// SGD with one update per training graph, shuffled every epoch. Returns
/// the weights of the epoch with the lowest validation F MAE. Throws
/// TrainingDiverged on a non-finite loss.
TrainResult train(const Dataset& train_set, const Dataset& valid_set, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

/// Continues training `model` in place (no validation, no checkpoint
/// selection); returns the mean loss of each epoch.
std::vector<double> fit(DarModel& model, const Dataset& train_set, const TrainConfig& cfg,
                        std::size_t epoch_offset = 0);

/// Loss curve as CSV: epoch,train_loss,valid_F_mae,cut_acc.
std::string curve_csv(const std::vector<CurvePoint>& curve);

struct ReconstructionResult {
    DarModel model;
    /// Mean episode loss of each epoch, each graph measured before its update.
    std::vector<double> loss_curve;
};

/// Freezes every pre-trained weight, attaches a fresh surrogate edge
/// encoder and trains only that encoder on `data`.
ReconstructionResult retrain_encoders(const DarModel& pretrained, const Dataset& data,
                                      std::size_t epochs, double lr, std::uint64_t seed);

} // namespace dar
