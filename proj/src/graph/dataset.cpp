#include "dar/graph/dataset.hpp"

#include "dar/algo/max_flow.hpp"
#include "dar/error.hpp"

#include <fstream>
#include <sstream>

namespace dar {

using nlohmann::json;

std::string_view to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test_ood: return "test_ood";
    case Split::test_oof: return "test_oof";
    }
    return "unknown";
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "valid") return Split::valid;
    if (s == "test_ood") return Split::test_ood;
    if (s == "test_oof") return Split::test_oof;
    throw InvalidArgument("unknown split '" + std::string(s) + "'");
}

Dataset make_dataset(Split split, Family family, std::size_t n, std::size_t count, std::uint64_t seed,
                     CapacityScale scale) {
    Dataset ds;
    ds.split = split;
    ds.seed = seed;
    ds.items.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        FlowNetwork net = make_instance(family, n, mix_seed(seed, k), scale);
        Trajectory tr = ford_fulkerson(net).trajectory;
        ds.items.push_back({std::move(net), std::move(tr)});
    }
    return ds;
}

namespace {

[[noreturn]] void field_error(const std::string& where, const std::string& what) {
    throw ParseError(where + ": " + what);
}

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object()) field_error(where, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) field_error(where, std::string("missing field '") + key + "'");
    return *it;
}

template <class T>
T get_as(const json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        field_error(where, e.what());
    }
}

std::uint32_t get_index(const json& j, std::size_t n, const std::string& where) {
    if (!j.is_number_integer()) field_error(where, "expected an integer");
    const auto v = j.get<std::int64_t>();
    if (v < 0 || static_cast<std::size_t>(v) >= n)
        field_error(where, "node index " + std::to_string(v) + " outside [0, " + std::to_string(n) + ")");
    return static_cast<std::uint32_t>(v);
}

} // namespace

json matrix_to_json(const std::vector<double>& m, std::size_t n) {
    json rows = json::array();
    for (std::size_t i = 0; i < n; ++i)
        rows.push_back(std::vector<double>(m.begin() + static_cast<std::ptrdiff_t>(i * n),
                                           m.begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
    return rows;
}

std::vector<double> matrix_from_json(const json& j, std::size_t n, const std::string& where) {
    if (!j.is_array() || j.size() != n) field_error(where, "expected " + std::to_string(n) + " rows");
    std::vector<double> m(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = j[i];
        const std::string rw = where + "[" + std::to_string(i) + "]";
        if (!row.is_array() || row.size() != n) field_error(rw, "expected " + std::to_string(n) + " columns");
        for (std::size_t c = 0; c < n; ++c) {
            if (!row[c].is_number()) field_error(rw + "[" + std::to_string(c) + "]", "expected a number");
            m[i * n + c] = row[c].get<double>();
        }
    }
    return m;
}

json network_to_json(const FlowNetwork& net) {
    json edges = json::array();
    for (const auto& e : net.edges)
        edges.push_back({e.from, e.to, net.cap(e.from, e.to), net.w(e.from, e.to)});
    return {{"n", net.n},
            {"family", std::string(to_string(net.family))},
            {"s", net.source},
            {"t", net.sink},
            {"edges", std::move(edges)}};
}

FlowNetwork network_from_json(const json& j, const std::string& where) {
    const auto& jn = require(j, "n", where);
    if (!jn.is_number_integer() || jn.get<std::int64_t>() < 2) field_error(where + ".n", "expected an integer >= 2");
    const auto n = jn.get<std::size_t>();
    Family family;
    try {
        family = family_from_string(get_as<std::string>(require(j, "family", where), where + ".family"));
    } catch (const InvalidArgument& e) {
        field_error(where + ".family", e.what());
    }
    FlowNetwork net = FlowNetwork::empty(n, family);
    net.source = get_index(require(j, "s", where), n, where + ".s");
    net.sink = get_index(require(j, "t", where), n, where + ".t");
    const auto& edges = require(j, "edges", where);
    if (!edges.is_array()) field_error(where + ".edges", "expected an array");
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const std::string ew = where + ".edges[" + std::to_string(k) + "]";
        const auto& e = edges[k];
        if (!e.is_array() || e.size() != 4) field_error(ew, "expected [i, j, cap, w]");
        const auto i = get_index(e[0], n, ew + "[0]");
        const auto jj = get_index(e[1], n, ew + "[1]");
        if (!e[2].is_number() || !e[3].is_number()) field_error(ew, "capacity and weight must be numbers");
        const double c = e[2].get<double>();
        if (!(c > 0.0)) field_error(ew, "edge capacity must be positive");
        net.set_edge(i, jj, c, e[3].get<double>());
    }
    net.rebuild_edge_list();
    if (net.edges.size() != edges.size()) field_error(where + ".edges", "duplicate edge");
    try {
        net.validate();
    } catch (const InvalidArgument& e) {
        field_error(where, e.what());
    }
    return net;
}

json trajectory_to_json(const Trajectory& tr, std::size_t n) {
    json steps = json::array();
    for (const auto& s : tr.steps) steps.push_back({{"pred", s.pred}, {"flow", matrix_to_json(s.flow, n)}});
    std::vector<int> cut(tr.cut.begin(), tr.cut.end());
    return {{"T", tr.T()},
            {"steps", std::move(steps)},
            {"final_flow", matrix_to_json(tr.final_flow, n)},
            {"cut", cut}};
}

Trajectory trajectory_from_json(const json& j, std::size_t n, const std::string& where) {
    Trajectory tr;
    const auto T = get_as<std::size_t>(require(j, "T", where), where + ".T");
    const auto& steps = require(j, "steps", where);
    if (!steps.is_array() || steps.size() != T)
        field_error(where + ".steps", "expected T=" + std::to_string(T) + " steps");
    for (std::size_t k = 0; k < T; ++k) {
        const std::string sw = where + ".steps[" + std::to_string(k) + "]";
        Trajectory::Step step;
        const auto& pred = require(steps[k], "pred", sw);
        if (!pred.is_array() || pred.size() != n) field_error(sw + ".pred", "expected n entries");
        for (std::size_t v = 0; v < n; ++v)
            step.pred.push_back(get_index(pred[v], n, sw + ".pred[" + std::to_string(v) + "]"));
        step.flow = matrix_from_json(require(steps[k], "flow", sw), n, sw + ".flow");
        tr.steps.push_back(std::move(step));
    }
    tr.final_flow = matrix_from_json(require(j, "final_flow", where), n, where + ".final_flow");
    const auto& cut = require(j, "cut", where);
    if (!cut.is_array() || cut.size() != n) field_error(where + ".cut", "expected n entries");
    for (std::size_t v = 0; v < n; ++v) {
        const auto c = get_as<int>(cut[v], where + ".cut[" + std::to_string(v) + "]");
        if (c != 0 && c != 1) field_error(where + ".cut[" + std::to_string(v) + "]", "label must be 0 or 1");
        tr.cut.push_back(static_cast<std::uint8_t>(c));
    }
    return tr;
}

json dataset_to_json(const Dataset& ds) {
    json items = json::array();
    for (const auto& it : ds.items) {
        json j = network_to_json(it.net);
        j["trajectory"] = trajectory_to_json(it.trajectory, it.net.n);
        items.push_back(std::move(j));
    }
    return {{"split", std::string(to_string(ds.split))}, {"seed", ds.seed}, {"items", std::move(items)}};
}

Dataset dataset_from_json(const json& j) {
    Dataset ds;
    try {
        ds.split = split_from_string(get_as<std::string>(require(j, "split", "dataset"), "dataset.split"));
    } catch (const InvalidArgument& e) {
        field_error("dataset.split", e.what());
    }
    ds.seed = get_as<std::uint64_t>(require(j, "seed", "dataset"), "dataset.seed");
    const auto& items = require(j, "items", "dataset");
    if (!items.is_array()) field_error("dataset.items", "expected an array");
    for (std::size_t k = 0; k < items.size(); ++k) {
        const std::string iw = "dataset.items[" + std::to_string(k) + "]";
        FlowNetwork net = network_from_json(items[k], iw);
        Trajectory tr = trajectory_from_json(require(items[k], "trajectory", iw), net.n, iw + ".trajectory");
        ds.items.push_back({std::move(net), std::move(tr)});
    }
    return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_dataset: cannot open " + path.string());
    out << dataset_to_json(ds).dump() << '\n';
    if (!out) throw std::runtime_error("write_dataset: write failed for " + path.string());
}

json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
            if (text[k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(what + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
    }
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path.string() + ": cannot open file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_json_text(buf.str(), path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
    return dataset_from_json(read_json_file(path));
}

} // namespace dar
