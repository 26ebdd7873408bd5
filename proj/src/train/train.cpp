#include "dar/train/train.hpp"

#include "dar/error.hpp"
#include "dar/graph/generators.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace dar {

using ad::Tape;
using ad::Var;

LossTerms step_loss(const StepOutputs& pred, const Trajectory::Step& truth,
                    const std::vector<std::uint8_t>& cut, const FlowNetwork& net,
                    const ModelConfig& config) {
    LossTerms out;
    GraphView g(net);
    std::vector<Var> parts;
    if (config.has_pointer_head()) {
        std::vector<std::uint32_t> target(truth.pred.begin(), truth.pred.end());
        Var ce = softmax_cross_entropy(pred.pointer_logits, target);
        out.pointer = ce.item();
        parts.push_back(ce);
    }
    Var mse = mse_entries(pred.flow, truth.flow, g.edges);
    out.flow = mse.item();
    parts.push_back(mse);
    if (config.has_cut_head()) {
        if (cut.size() != net.n)
            throw DataError("step_loss: cut head needs " + std::to_string(net.n) +
                            " cut labels, got " + std::to_string(cut.size()));
        std::vector<double> target(cut.begin(), cut.end());
        Var bce = bce_with_logits(pred.cut_logits, target);
        out.cut = bce.item();
        parts.push_back(bce);
    }
    out.total = parts.front();
    for (std::size_t k = 1; k < parts.size(); ++k) out.total = add(out.total, parts[k]);
    return out;
}

Var episode_loss(DarModel& model, Tape& tape, const DatasetItem& item, bool teacher,
                 std::uint64_t feature_seed) {
    const auto& traj = item.trajectory;
    const auto& cfg = model.config();
    auto steps = rollout(model, tape, item.net, traj.T(), feature_seed, teacher ? &traj : nullptr);
    const ArcList edges = GraphView(item.net).edges;
    if (steps.empty()) return tape.zeros(1, 1);
    Var total = mse_entries(steps.back().flow, traj.final_flow, edges);
    if (cfg.variant == Variant::no_algo) return total;
    if (cfg.has_cut_head()) {
        std::vector<double> target(traj.cut.begin(), traj.cut.end());
        total = add(total, bce_with_logits(steps.back().cut_logits, target));
    }
    for (std::size_t t = 0; t < steps.size(); ++t)
        total = add(total, step_loss(steps[t], traj.steps[t], traj.cut, item.net, cfg).total);
    return total;
}

double gate_probability(std::size_t epoch, double decay) {
    return std::pow(decay, static_cast<double>(epoch));
}

bool teacher_force_gate(std::size_t epoch, double decay, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng) < gate_probability(epoch, decay);
}

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
    if (!(teacher_decay > 0.0 && teacher_decay <= 1.0))
        throw InvalidArgument("teacher_decay must lie in (0, 1]");
    if (lr < 0.0 || weight_decay < 0.0) throw InvalidArgument("lr and weight_decay must be >= 0");
    if (valid_every < 1) throw InvalidArgument("valid_every must be at least 1");
    model.validate();
}

TrainConfig full_profile(Variant variant) {
    TrainConfig c;
    c.model.variant = variant;
    if (variant == Variant::primal) {
        c.model.hidden_dim = 68;
        c.lr = 0.009341;
        c.weight_decay = 0.003420;
    } else {
        c.model.hidden_dim = 65;
        c.lr = 0.009868;
        c.weight_decay = 0.001734;
    }
    c.epochs = 20000;
    return c;
}

TrainConfig desk_profile(Variant variant) {
    TrainConfig c = full_profile(variant);
    c.model.hidden_dim = 16;
    c.epochs = 2000;
    c.valid_every = 50;
    return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"teacher_decay", c.teacher_decay},
            {"seed", c.seed},
            {"valid_every", c.valid_every},
            {"model", config_to_json(c.model)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("train config: expected an object");
    TrainConfig c;
    if (j.contains("profile")) {
        const auto name = j.at("profile").get<std::string>();
        const Variant v = j.contains("model") && j.at("model").contains("variant")
                              ? variant_from_string(j.at("model").at("variant").get<std::string>())
                              : Variant::dual;
        if (name == "full") c = full_profile(v);
        else if (name == "desk") c = desk_profile(v);
        else throw ParseError("train config: unknown profile '" + name + "'");
    }
    try {
        if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
        if (j.contains("lr")) c.lr = j.at("lr").get<double>();
        if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
        if (j.contains("teacher_decay")) c.teacher_decay = j.at("teacher_decay").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("valid_every")) c.valid_every = j.at("valid_every").get<std::size_t>();
        if (j.contains("model")) {
            nlohmann::json merged = config_to_json(c.model);
            merged.update(j.at("model"));
            c.model = config_from_json(merged);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

// One pass over the training graphs in a fresh random order; returns the
// mean episode loss.
double run_epoch(DarModel& model, const Dataset& data, const TrainConfig& cfg, std::size_t epoch,
                 std::vector<std::size_t>& order, std::mt19937_64& rng, bool forcing) {
    std::shuffle(order.begin(), order.end(), rng);
    auto params = model.params().trainable();
    double total = 0.0;
    for (std::size_t idx : order) {
        const bool teach = forcing && teacher_force_gate(epoch, cfg.teacher_decay, rng);
        Tape tape;
        Var loss = episode_loss(model, tape, data.items[idx], teach, mix_seed(data.seed, idx));
        const double value = loss.item();
        if (!std::isfinite(value))
            throw TrainingDiverged("non-finite loss " + std::to_string(value) + " at epoch " +
                                   std::to_string(epoch) + ", graph " + std::to_string(idx));
        total += value;
        model.params().zero_grad();
        tape.backward(loss);
        ad::sgd_step(params, cfg.lr, cfg.weight_decay);
    }
    return data.items.empty() ? 0.0 : total / static_cast<double>(data.items.size());
}

} // namespace

TrainResult train(const Dataset& train_set, const Dataset& valid_set, const TrainConfig& cfg,
                  const ProgressFn& progress) {
    cfg.validate();
    if (valid_set.items.empty()) throw InvalidArgument("train: validation split is empty");
    DarModel model(cfg.model, cfg.seed);
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x7a11));
    std::vector<std::size_t> order(train_set.items.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<CurvePoint> curve;
    ad::ParameterStore best = model.params();
    std::size_t best_epoch = 0;
    double best_mae = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        CurvePoint pt;
        pt.epoch = epoch;
        pt.train_loss = run_epoch(model, train_set, cfg, epoch, order, rng, true);
        if ((epoch + 1) % cfg.valid_every == 0 || epoch + 1 == cfg.epochs) {
            MetricsReport rep = evaluate(model, valid_set);
            pt.valid_F_mae = rep.F_mae;
            pt.cut_acc = rep.cut_acc;
            if (rep.F_mae < best_mae) {
                best_mae = rep.F_mae;
                best_epoch = epoch;
                best = model.params();
            }
        }
        curve.push_back(pt);
        if (progress) progress(pt);
    }
    return {DarModel(model.config(), std::move(best)), std::move(curve), best_epoch, best_mae};
}

std::vector<double> fit(DarModel& model, const Dataset& train_set, const TrainConfig& cfg,
                        std::size_t epoch_offset) {
    cfg.validate();
    std::mt19937_64 rng(mix_seed(cfg.seed, 0xf17 + epoch_offset));
    std::vector<std::size_t> order(train_set.items.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> losses;
    for (std::size_t e = 0; e < cfg.epochs; ++e)
        losses.push_back(run_epoch(model, train_set, cfg, epoch_offset + e, order, rng, true));
    return losses;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream os;
    os << std::setprecision(10) << "epoch,train_loss,valid_F_mae,cut_acc\n";
    for (const auto& p : curve) {
        os << p.epoch << ',' << p.train_loss << ',';
        if (p.valid_F_mae) os << *p.valid_F_mae;
        os << ',';
        if (p.cut_acc) os << *p.cut_acc;
        os << '\n';
    }
    return os.str();
}

ReconstructionResult retrain_encoders(const DarModel& pretrained, const Dataset& data,
                                      std::size_t epochs, double lr, std::uint64_t seed) {
    DarModel model = pretrained;
    model.prepare_reconstruction(seed);
    TrainConfig cfg;
    cfg.lr = lr;
    cfg.weight_decay = 0.0;
    cfg.seed = seed;
    cfg.model = model.config();
    cfg.epochs = std::max<std::size_t>(epochs, 1);
    std::mt19937_64 rng(mix_seed(seed, 0x4ec));
    std::vector<std::size_t> order(data.items.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> curve;
    for (std::size_t e = 0; e < epochs; ++e)
        curve.push_back(run_epoch(model, data, cfg, e, order, rng, false));
    return {std::move(model), std::move(curve)};
}

} // namespace dar
