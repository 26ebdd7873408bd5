// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
//
//   acceptance --group fast            criteria 1-6
//   acceptance --group desk --cache D  criteria 7-10 (trains, caches checkpoints in D)

#include "dar/algo/max_flow.hpp"
#include "dar/error.hpp"
#include "dar/eval/metrics.hpp"
#include "dar/graph/dataset.hpp"
#include "dar/model/model.hpp"
#include "dar/postprocess/correction.hpp"
#include "dar/train/train.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace dar;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... xs) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, xs...);
    return buf;
}

std::vector<double> to_vec(ad::Var v) { return {v.value().begin(), v.value().end()}; }

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& check) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << title << ": " << o.detail
              << fmt(" (%.1f s)", seconds_since(t0)) << std::endl;
}

// ---------------------------------------------------------------- fast

Outcome classical_core() {
    const auto t0 = Clock::now();
    std::size_t agree = 0, duality = 0, total = 0;
    for (std::uint64_t k = 0; k < 200; ++k) {
        FlowNetwork net = k % 4 == 3 ? make_instance(Family::bipartite, 4 + 2 * (k % 2), k)
                                     : make_instance(Family::two_community, 4 + 2 * (k % 3), k,
                                                     CapacityScale::raw_integer);
        if (net.n > 8) throw ContractError("criterion 1 graph larger than 8 nodes");
        const auto ff = ford_fulkerson(net);
        agree += ff.value == brute_force_max_flow(net);
        duality += cut_capacity(net, min_cut_labels(net, ff.flow)) == ff.value;
        ++total;
    }
    const double secs = seconds_since(t0);
    return {agree == total && duality == total && secs < 10.0,
            fmt("max-flow == brute force on %zu/%zu, cut == flow on %zu/%zu, %.2f s < 10 s", agree, total,
                duality, total, secs)};
}

Outcome trajectory_validity() {
    std::size_t ok = 0, replay = 0;
    std::string first_error;
    for (std::uint64_t k = 0; k < 500; ++k) {
        const bool raw = k % 2 == 0;
        const Family fam = k % 4 < 2 ? Family::two_community : Family::bipartite;
        const auto net = make_instance(fam, fam == Family::bipartite ? 8 : 16, 1000 + k,
                                       raw ? CapacityScale::raw_integer : CapacityScale::normalized);
        const auto a = ford_fulkerson(net);
        // integer capacities conserve exactly; normalised ones carry float rounding
        const auto err = oracle::trajectory_violation(net, a.trajectory, 1e-12, raw ? 0.0 : 1e-12);
        if (err.empty()) ++ok;
        else if (first_error.empty()) first_error = fmt("graph %zu: ", static_cast<std::size_t>(k)) + err;
        replay += ford_fulkerson(net).trajectory == a.trajectory;
    }
    std::string d = fmt("%zu/500 trajectories valid (exact conservation on 250 integer-capacity graphs, "
                        "<= 1e-12 on 250 normalised), replay identical on %zu/500",
                        ok, replay);
    if (!first_error.empty()) d += "; " + first_error;
    return {ok == 500 && replay == 500, d};
}

Outcome rescale_feasibility() {
    double worst_cap = -1e300, worst_anti = 0.0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        const auto net = make_instance(k % 2 ? Family::bipartite : Family::two_community, 16, 2000 + k);
        const std::size_t n = net.n;
        std::mt19937_64 rng(k);
        std::normal_distribution<double> g(0.0, std::pow(10.0, static_cast<double>(k % 7) - 3.0));
        std::vector<double> raw(n * n);
        for (double& x : raw) x = g(rng);
        ad::Tape t;
        std::vector<std::vector<double>> outs{to_vec(DarModel::rescale_flow(t.constant(n, n, raw), net))};
        ModelConfig c;
        c.hidden_dim = 16;
        DarModel m(c, 3000 + k);
        for (const auto& s : m.run_episode(t, net, 3)) outs.push_back(to_vec(s.flow));
        for (const auto& f : outs) {
            worst_anti = std::max(worst_anti, oracle::max_antisymmetry(f, n));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double env = net.has_edge(i, j) ? net.cap(i, j) : net.cap(j, i);
                    worst_cap = std::max(worst_cap, f[i * n + j] - env);
                }
        }
    }
    return {worst_cap <= 1e-12 && worst_anti <= 1e-12,
            fmt("max F_ij - envelope_ij = %.3g, max |F + F^T| = %.3g over 100 settings (tol 1e-12)",
                worst_cap, worst_anti)};
}

struct CorrectionStats {
    double residual = 0.0, excess = 0.0, anti = 0.0, value_over = -1e300;
    std::size_t idempotent = 0, graphs = 0;
};

void correct_model_outputs(DarModel& m, const Dataset& ds, CorrectionStats& st) {
    for (const auto& item : ds.items) {
        ad::Tape t;
        auto steps = m.run_episode(t, item.net, item.trajectory.T());
        const auto res = correct_flow(item.net, to_vec(steps.back().flow));
        st.residual = std::max(st.residual, oracle::max_internal_residual(item.net, res.flow));
        st.excess = std::max(st.excess, oracle::max_capacity_excess(item.net, res.flow));
        st.anti = std::max(st.anti, oracle::max_antisymmetry(res.flow, item.net.n));
        st.value_over = std::max(st.value_over, flow_value(item.net, res.flow) - ford_fulkerson(item.net).value);
        st.idempotent += correct_flow(item.net, res.flow).flow == res.flow;
        ++st.graphs;
    }
}

Outcome flow_correction() {
    const auto ds = make_dataset(Split::valid, Family::two_community, 16, 50, 41);
    TrainConfig cfg = desk_profile(Variant::dual);
    cfg.model.hidden_dim = 16;
    DarModel untrained(cfg.model, 0);
    cfg.epochs = 20;
    DarModel trained(cfg.model, 0);
    fit(trained, make_dataset(Split::train, Family::two_community, 16, 50, 40), cfg);
    CorrectionStats st;
    correct_model_outputs(untrained, ds, st);
    correct_model_outputs(trained, ds, st);
    return {st.residual <= 1e-9 && st.excess <= 1e-9 && st.anti <= 1e-12 && st.idempotent == st.graphs &&
                st.value_over <= 1e-9,
            fmt("%zu outputs (untrained + trained): max internal residual %.3g, max capacity excess %.3g, "
                "idempotent %zu/%zu, max(value - optimum) %.3g",
                st.graphs, st.residual, st.excess, st.idempotent, st.graphs, st.value_over)};
}

Outcome autodiff_soundness() {
    double worst = 0.0;
    std::string worst_op;
    std::size_t ops = 0;
    bool seg_max = false, seg_mean = false, seg_sum = false;
    for (const auto& op : gradcheck::op_cases()) {
        ++ops;
        const std::string name = op.name;
        seg_max |= name.find("segment_max") != std::string::npos;
        seg_mean |= name.find("segment_mean") != std::string::npos;
        seg_sum |= name.find("segment_sum") != std::string::npos;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            std::mt19937_64 rng(mix_seed(seed, 0xfd));
            auto xs = gradcheck::random_inputs(op.shapes, rng);
            const double e = gradcheck::gradient_error(op.f, xs);
            if (e > worst) worst = e, worst_op = name;
        }
    }
    const bool covered = seg_max && seg_mean && seg_sum;
    return {worst <= 1e-4 && covered,
            fmt("%zu op cases x 100 seeds, worst relative error %.3g (%s), segment max/mean/sum %s", ops, worst,
                worst_op.c_str(), covered ? "covered" : "MISSING")};
}

Outcome masking_equivalence() {
    std::size_t identical = 0, compared = 0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        const auto net = make_instance(Family::two_community, 16, 4000 + k);
        ModelConfig c;
        c.hidden_dim = 16;
        c.variant = k % 2 ? Variant::dual : Variant::pipeline;
        DarModel m(c, k);
        ad::Tape a, b;
        EpisodeOptions dense;
        dense.dense_route = true;
        const std::size_t T = std::max<std::size_t>(1, ford_fulkerson(net).trajectory.T());
        auto sp = m.run_episode(a, net, T);
        auto sd = m.run_episode(b, net, T, dense);
        bool same = sp.size() == sd.size();
        for (std::size_t s = 0; same && s < sp.size(); ++s) {
            same = to_vec(sp[s].H) == to_vec(sd[s].H) && to_vec(sp[s].flow) == to_vec(sd[s].flow) &&
                   to_vec(sp[s].raw_flow) == to_vec(sd[s].raw_flow) &&
                   to_vec(sp[s].pointer_logits) == to_vec(sd[s].pointer_logits) &&
                   to_vec(sp[s].cut_logits) == to_vec(sd[s].cut_logits) && sp[s].pred == sd[s].pred;
        }
        identical += same;
        ++compared;
    }
    return {identical == compared,
            fmt("dense masked routing bit-identical to PGN on %zu/%zu graphs (every step output)", identical,
                compared)};
}

// ---------------------------------------------------------------- desk

constexpr std::size_t kDeskHidden = 16;
constexpr std::size_t kDeskEpochs = 2000;
constexpr std::size_t kValidEvery = 50;
constexpr double kRandomReference = 0.553;

struct DeskData {
    Dataset train = make_dataset(Split::train, Family::two_community, 16, 200, 100);
    Dataset valid = make_dataset(Split::valid, Family::two_community, 16, 128, 101);
    Dataset test = make_dataset(Split::test_ood, Family::two_community, 64, 128, 102);
};

struct Trained {
    DarModel model;
    double best_valid = 0.0;
    std::size_t best_epoch = 0;
};

class DeskRuns {
public:
    DeskRuns(const DeskData& data, fs::path cache) : data_(data), cache_(std::move(cache)) {
        fs::create_directories(cache_);
    }

    Trained& get(Variant v, std::uint64_t seed) {
        const std::string key = std::string(to_string(v)) + "_s" + std::to_string(seed);
        if (auto it = runs_.find(key); it != runs_.end()) return it->second;
        TrainConfig cfg = desk_profile(v);
        cfg.seed = seed;
        if (cfg.model.hidden_dim != kDeskHidden || cfg.epochs != kDeskEpochs || cfg.valid_every != kValidEvery)
            throw ContractError("desk profile does not match the acceptance protocol");
        const nlohmann::json protocol = {{"train", train_config_to_json(cfg)},
                                         {"data", {data_.train.seed, data_.train.items.size(),
                                                   data_.valid.seed, data_.valid.items.size()}}};
        const fs::path file = cache_ / (key + ".json");
        if (fs::exists(file)) {
            auto j = read_json_file(file);
            if (j.value("protocol", nlohmann::json()) == protocol) {
                std::cerr << "cached " << key << '\n';
                return runs_.emplace(key, Trained{checkpoint_from_json(j.at("checkpoint")), j.at("best_valid_F_mae"),
                                                  j.at("best_epoch")}).first->second;
            }
        }
        const auto t0 = Clock::now();
        auto res = train(data_.train, data_.valid, cfg);
        std::cerr << "trained " << key << fmt(" in %.0f s, best epoch %zu, valid F MAE %.4f\n", seconds_since(t0),
                                               res.best_epoch, res.best_valid_F_mae);
        std::ofstream(file) << nlohmann::json{{"protocol", protocol},
                                              {"checkpoint", checkpoint_to_json(res.model)},
                                              {"best_valid_F_mae", res.best_valid_F_mae},
                                              {"best_epoch", res.best_epoch}}
                                   .dump();
        return runs_.emplace(key, Trained{std::move(res.model), res.best_valid_F_mae, res.best_epoch})
            .first->second;
    }

private:
    const DeskData& data_;
    fs::path cache_;
    std::map<std::string, Trained> runs_;
};

constexpr std::uint64_t kSeeds[] = {0, 1, 2};

double mean(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string list(const std::vector<double>& xs) {
    std::string s = "[";
    for (std::size_t k = 0; k < xs.size(); ++k) s += fmt(k ? " %.4f" : "%.4f", xs[k]);
    return s + "]";
}

Outcome learning_trend(const DeskData& data, DeskRuns& runs) {
    const double bar = 0.7 * kRandomReference;
    std::vector<double> primal, dual, cut;
    std::size_t dual_wins = 0;
    for (auto s : kSeeds) {
        auto& p = runs.get(Variant::primal, s);
        auto& d = runs.get(Variant::dual, s);
        primal.push_back(p.best_valid);
        dual.push_back(d.best_valid);
        cut.push_back(evaluate(d.model, data.valid).cut_acc.value());
        dual_wins += d.best_valid <= p.best_valid;
    }
    const bool a = std::ranges::all_of(primal, [&](double x) { return x <= bar; }) &&
                   std::ranges::all_of(dual, [&](double x) { return x <= bar; });
    const bool b = dual_wins >= 2;
    const bool c = mean(cut) >= 0.9;
    const double measured_random = evaluate_random_baseline(data.valid, 7).F_mae;
    return {a && b && c,
            fmt("(a) %s valid F MAE primal %s dual %s vs bar %.4f (0.7 x 0.553; own random baseline %.4f); "
                "(b) %s dual <= primal on %zu/3 seeds; (c) %s dual valid cut acc %s mean %.4f >= 0.9",
                a ? "ok" : "NO", list(primal).c_str(), list(dual).c_str(), bar, measured_random, b ? "ok" : "NO",
                dual_wins, c ? "ok" : "NO", list(cut).c_str(), mean(cut))};
}

Outcome no_algo_gap(const DeskData& data, DeskRuns& runs) {
    std::vector<double> na, dual;
    for (auto s : kSeeds) {
        na.push_back(evaluate(runs.get(Variant::no_algo, s).model, data.test).F_mae);
        dual.push_back(evaluate(runs.get(Variant::dual, s).model, data.test).F_mae);
    }
    return {mean(na) > mean(dual), fmt("test F MAE (n=64) no_algo %s mean %.4f vs dual %s mean %.4f",
                                       list(na).c_str(), mean(na), list(dual).c_str(), mean(dual))};
}

Outcome probe_direction(const DeskData& data, DeskRuns& runs) {
    std::vector<double> primal, dual;
    for (auto s : kSeeds) {
        primal.push_back(r2_probe(runs.get(Variant::primal, s).model, data.test));
        dual.push_back(r2_probe(runs.get(Variant::dual, s).model, data.test));
    }
    // planted self-test: the optimal value as one embedding coordinate
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    for (const auto& item : data.test.items) {
        y.push_back(ford_fulkerson(item.net).value);
        std::vector<double> h(kDeskHidden);
        for (double& x : h) x = g(rng);
        h[5] = y.back();
        X.push_back(std::move(h));
    }
    const double planted = r2_score_linear(X, y);
    const bool direction = mean(dual) > mean(primal);
    const bool self = std::abs(planted - 1.0) <= 1e-12;
    return {direction && self, fmt("test R2 dual %s mean %.4f vs primal %s mean %.4f; planted probe R2 = %.15f",
                                   list(dual).c_str(), mean(dual), list(primal).c_str(), mean(primal), planted)};
}

Outcome encoder_reconstruction(const DeskData& data, DeskRuns& runs) {
    const auto& pre = runs.get(Variant::dual, kSeeds[0]).model;
    const auto res = retrain_encoders(pre, data.train, 30, desk_profile(Variant::dual).lr, 5);
    std::size_t frozen_same = 0, frozen = 0;
    for (const auto& [name, t] : pre.params()) {
        ++frozen;
        frozen_same += res.model.params().at(name) == t;
    }
    const auto& y = res.loss_curve;
    const double n = static_cast<double>(y.size()), mx = (n - 1.0) / 2.0, my = mean(y);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += (static_cast<double>(i) - mx) * (y[i] - my);
        den += (static_cast<double>(i) - mx) * (static_cast<double>(i) - mx);
    }
    const double slope = num / den;
    return {frozen_same == frozen && slope < 0.0,
            fmt("frozen weights bit-identical %zu/%zu; loss %.4f -> %.4f over %zu epochs, fitted slope %.3g < 0",
                frozen_same, frozen, y.front(), y.back(), y.size(), slope)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance gate"};
    std::string group = "all";
    std::string cache = "acceptance_cache";
    app.add_option("--group", group, "fast, desk or all")->check(CLI::IsMember({"fast", "desk", "all"}));
    app.add_option("--cache", cache, "Checkpoint cache directory for the desk runs");
    CLI11_PARSE(app, argc, argv);

    if (group != "desk") {
        report(1, "classical core exactness", classical_core);
        report(2, "trajectory validity", trajectory_validity);
        report(3, "rescaled flow feasibility", rescale_feasibility);
        report(4, "flow correction", flow_correction);
        report(5, "autodiff soundness", autodiff_soundness);
        report(6, "masking equivalence", masking_equivalence);
    }
    if (group != "fast") {
        DeskData data;
        DeskRuns runs(data, cache);
        report(7, "desk-scale learning trend", [&] { return learning_trend(data, runs); });
        report(8, "no-algo gap", [&] { return no_algo_gap(data, runs); });
        report(9, "R2 probe direction", [&] { return probe_direction(data, runs); });
        report(10, "encoder reconstruction", [&] { return encoder_reconstruction(data, runs); });
    }
    std::cout << (failures ? "acceptance: FAILED " : "acceptance: all passed ") << failures << " failing"
              << std::endl;
    return failures ? 1 : 0;
}
