#pragma once

#include "dar/algo/trajectory.hpp"
#include "dar/graph/flow_network.hpp"
#include "dar/graph/generators.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dar {

enum class Split { train, valid, test_ood, test_oof };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct DatasetItem {
    FlowNetwork net;
    Trajectory trajectory;
    bool operator==(const DatasetItem&) const = default;
};

struct Dataset {
    Split split = Split::train;
    std::uint64_t seed = 0;
    std::vector<DatasetItem> items;
    bool operator==(const Dataset&) const = default;
};

/// `count` instances of the family at size n, each paired with its
/// Ford-Fulkerson trajectory. Item k uses seed mix_seed(seed, k).
Dataset make_dataset(Split split, Family family, std::size_t n, std::size_t count, std::uint64_t seed,
                     CapacityScale scale = CapacityScale::normalized);

nlohmann::json network_to_json(const FlowNetwork& net);
FlowNetwork network_from_json(const nlohmann::json& j, const std::string& where = "graph");

nlohmann::json trajectory_to_json(const Trajectory& tr, std::size_t n);
Trajectory trajectory_from_json(const nlohmann::json& j, std::size_t n,
                                const std::string& where = "trajectory");

/// n x n row-major matrix as nested arrays, and back.
nlohmann::json matrix_to_json(const std::vector<double>& m, std::size_t n);
std::vector<double> matrix_from_json(const nlohmann::json& j, std::size_t n, const std::string& where);

nlohmann::json dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& j);

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
/// Throws ParseError carrying the line/column of a syntax error or the JSON
/// path of a missing or ill-typed field.
Dataset read_dataset(const std::filesystem::path& path);

/// Parses text, turning nlohmann syntax errors into ParseError with a line
/// and column. `what` names the source in the message.
nlohmann::json parse_json_text(const std::string& text, const std::string& what);
/// Unreadable files raise DataError.
nlohmann::json read_json_file(const std::filesystem::path& path);

} // namespace dar
