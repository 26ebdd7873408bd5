// dar: command-line front end for dataset generation, training, evaluation
// and flow correction. Every subcommand writes JSON to stdout or --out.

#include "dar/algo/max_flow.hpp"
#include "dar/error.hpp"
#include "dar/eval/metrics.hpp"
#include "dar/graph/dataset.hpp"
#include "dar/postprocess/correction.hpp"
#include "dar/train/search.hpp"
#include "dar/train/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

void emit(const json& j, const std::string& out) {
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream f(out);
    if (!f) throw dar::DataError("cannot open '" + out + "' for writing");
    f << j.dump(2) << '\n';
    if (!f) throw dar::DataError("failed writing '" + out + "'");
}

void write_text(const std::string& text, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw dar::DataError("cannot open '" + path + "' for writing");
    f << text;
}

dar::CapacityScale scale_from_string(const std::string& s) {
    if (s == "normalized") return dar::CapacityScale::normalized;
    if (s == "raw_integer") return dar::CapacityScale::raw_integer;
    throw dar::ParseError("unknown capacity scale '" + s + "'");
}

dar::DarModel load_model(const std::string& path) {
    return dar::checkpoint_from_json(dar::read_json_file(path));
}

struct Common {
    std::uint64_t seed = 0;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    cmd->add_option("--out", c.out, "Output path (stdout when omitted)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned max-flow / min-cut: data, training, evaluation and flow repair"};
    app.require_subcommand(1);

    // gen
    Common gen_c;
    std::string family = "two_community", split = "train", scale = "normalized";
    std::size_t gen_n = 16, gen_count = 200;
    auto* gen = app.add_subcommand("gen", "Generate a dataset with Ford-Fulkerson trajectories");
    add_common(gen, gen_c);
    gen->add_option("--family", family, "two_community or bipartite")->capture_default_str();
    gen->add_option("--n", gen_n, "Nodes per graph")->capture_default_str();
    gen->add_option("--count", gen_count, "Number of graphs")->capture_default_str();
    gen->add_option("--split", split, "train, valid, test_ood or test_oof")->capture_default_str();
    gen->add_option("--scale", scale, "normalized or raw_integer")->capture_default_str();

    // train
    Common train_c;
    std::string train_cfg, train_data, train_valid, train_curve;
    bool train_seed_set = false;
    auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
    add_common(train, train_c);
    train->add_option("--config", train_cfg, "Training config JSON")->required();
    train->add_option("--data", train_data, "Training dataset JSON")->required();
    train->add_option("--valid", train_valid, "Validation dataset JSON (default: --data)");
    train->add_option("--curve", train_curve, "Write the loss curve CSV here");

    // eval
    Common eval_c;
    std::vector<std::string> eval_models;
    std::string eval_data, eval_csv, eval_label = "model";
    std::size_t eval_trials = 1;
    bool eval_random = false;
    auto* eval = app.add_subcommand("eval", "Evaluate checkpoints (one per trial) or the random baseline");
    add_common(eval, eval_c);
    eval->add_option("--model", eval_models, "Checkpoint JSON, repeat once per trial");
    eval->add_option("--data", eval_data, "Dataset JSON")->required();
    eval->add_flag("--random", eval_random, "Score the random-flow baseline instead of a model");
    eval->add_option("--trials", eval_trials, "Random baseline trials")->capture_default_str();
    eval->add_option("--csv", eval_csv, "Write a table row CSV here");
    eval->add_option("--label", eval_label, "Row label for --csv")->capture_default_str();

    // probe
    Common probe_c;
    std::string probe_model, probe_data;
    auto* probe = app.add_subcommand("probe", "Linear R^2 probe of the optimal flow value");
    add_common(probe, probe_c);
    probe->add_option("--model", probe_model, "Checkpoint JSON")->required();
    probe->add_option("--data", probe_data, "Dataset JSON")->required();

    // correct
    Common correct_c;
    std::string correct_flow_path, correct_graph;
    auto* correct = app.add_subcommand("correct", "Repair conservation and capacity violations");
    add_common(correct, correct_c);
    correct->add_option("--flow", correct_flow_path, "Flow matrix JSON")->required();
    correct->add_option("--graph", correct_graph, "Graph JSON")->required();

    // export
    Common export_c;
    std::string export_model, export_data;
    auto* exp = app.add_subcommand("export", "Export node and edge embeddings");
    add_common(exp, export_c);
    exp->add_option("--model", export_model, "Checkpoint JSON")->required();
    exp->add_option("--data", export_data, "Dataset JSON")->required();

    // search
    Common search_c;
    std::string search_cfg, search_data, search_valid;
    int search_level = 1;
    std::size_t search_budget = 0, search_epochs = 0;
    auto* search = app.add_subcommand("search", "Random hyper-parameter search");
    add_common(search, search_c);
    search->add_option("--config", search_cfg, "Base training config JSON");
    search->add_option("--data", search_data, "Training dataset JSON")->required();
    search->add_option("--valid", search_valid, "Validation dataset JSON")->required();
    search->add_option("--level", search_level, "Search level, 1 or 2")->capture_default_str();
    search->add_option("--budget", search_budget, "Trials (default: the level's sample count)");
    search->add_option("--epochs", search_epochs, "Epochs per trial (default: from config)");

    CLI11_PARSE(app, argc, argv);
    train_seed_set = train->count("--seed") > 0;

    try {
        if (*gen) {
            auto ds = dar::make_dataset(dar::split_from_string(split), dar::family_from_string(family),
                                        gen_n, gen_count, gen_c.seed, scale_from_string(scale));
            emit(dar::dataset_to_json(ds), gen_c.out);
        } else if (*train) {
            dar::TrainConfig cfg = dar::train_config_from_json(dar::read_json_file(train_cfg));
            if (train_seed_set) cfg.seed = train_c.seed;
            const auto data = dar::read_dataset(train_data);
            const auto valid = train_valid.empty() ? data : dar::read_dataset(train_valid);
            auto result = dar::train(data, valid, cfg, [](const dar::CurvePoint& p) {
                if (p.valid_F_mae)
                    std::cerr << "epoch " << p.epoch << " loss " << p.train_loss << " valid F MAE "
                              << *p.valid_F_mae << '\n';
            });
            if (!train_curve.empty()) write_text(dar::curve_csv(result.curve), train_curve);
            json j = dar::checkpoint_to_json(result.model);
            j["best_epoch"] = result.best_epoch;
            j["best_valid_F_mae"] = result.best_valid_F_mae;
            emit(j, train_c.out);
        } else if (*eval) {
            const auto data = dar::read_dataset(eval_data);
            std::vector<dar::MetricsReport> reports;
            if (eval_random) {
                for (std::size_t k = 0; k < eval_trials; ++k)
                    reports.push_back(dar::evaluate_random_baseline(data, dar::mix_seed(eval_c.seed, k)));
            } else {
                if (eval_models.empty()) throw dar::InvalidArgument("eval: pass --model or --random");
                for (const auto& path : eval_models) {
                    auto model = load_model(path);
                    reports.push_back(dar::evaluate(model, data));
                }
            }
            json trials = json::array();
            for (const auto& r : reports) trials.push_back(dar::report_to_json(r));
            if (!eval_csv.empty()) write_text(dar::table_csv({{eval_label, reports}}), eval_csv);
            emit({{"trials", trials}, {"summary", dar::summarize_reports(reports)}}, eval_c.out);
        } else if (*probe) {
            auto model = load_model(probe_model);
            const auto data = dar::read_dataset(probe_data);
            emit({{"r2", dar::r2_probe(model, data)}, {"graphs", data.items.size()}}, probe_c.out);
        } else if (*correct) {
            const auto net = dar::network_from_json(dar::read_json_file(correct_graph));
            json fj = dar::read_json_file(correct_flow_path);
            if (fj.is_object() && fj.contains("flow")) fj = fj.at("flow");
            const auto flow = dar::matrix_from_json(fj, net.n, "flow");
            const auto res = dar::correct_flow(net, flow);
            const auto oracle = dar::ford_fulkerson(net);
            emit({{"flow", dar::matrix_to_json(res.flow, net.n)},
                  {"value", dar::flow_value(net, res.flow)},
                  {"max_flow", oracle.value},
                  {"before", dar::report_to_json(res.before)},
                  {"after", dar::report_to_json(res.after)},
                  {"paths_cancelled", res.paths_cancelled},
                  {"capacity_clamps", res.capacity_clamps},
                  {"fallback_drains", res.fallback_drains}},
                 correct_c.out);
        } else if (*exp) {
            auto model = load_model(export_model);
            emit(dar::export_embeddings(model, dar::read_dataset(export_data)), export_c.out);
        } else if (*search) {
            dar::TrainConfig base = search_cfg.empty() ? dar::desk_profile(dar::Variant::dual)
                                                       : dar::train_config_from_json(dar::read_json_file(search_cfg));
            if (search_epochs > 0) base.epochs = search_epochs;
            const auto space = search_level == 2 ? dar::SearchSpace::level_two() : dar::SearchSpace::level_one();
            const auto data = dar::read_dataset(search_data);
            const auto valid = dar::read_dataset(search_valid);
            auto trials = dar::random_search(
                space, search_budget > 0 ? search_budget : space.samples, base,
                [&](const dar::TrainConfig& cfg) { return dar::train(data, valid, cfg).best_valid_F_mae; },
                search_c.seed);
            json arr = json::array();
            for (const auto& t : trials)
                arr.push_back({{"lr", t.lr},
                               {"weight_decay", t.weight_decay},
                               {"hidden_dim", t.hidden_dim},
                               {"valid_F_mae", t.valid_F_mae}});
            emit({{"level", space.level}, {"trials", arr}}, search_c.out);
        }
    } catch (const dar::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
