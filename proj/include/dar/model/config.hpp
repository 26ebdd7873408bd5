#pragma once

#include "dar/autodiff/tape.hpp"

#include <json.hpp>

#include <cstddef>
#include <string_view>

namespace dar {

enum class Processor { mpnn_dense, pgn };
enum class Variant { primal, dual, pipeline, no_algo };
/// Which edge features sit beside the base (weight, flow, edge flag) block.
enum class EdgeInputs { capacity, surrogate };

std::string_view to_string(Processor p);
std::string_view to_string(Variant v);
std::string_view to_string(ad::Aggregation a);
std::string_view to_string(EdgeInputs e);
Processor processor_from_string(std::string_view s);
Variant variant_from_string(std::string_view s);
ad::Aggregation aggregation_from_string(std::string_view s);
EdgeInputs edge_inputs_from_string(std::string_view s);

struct ModelConfig {
    std::size_t hidden_dim = 65;
    Processor processor = Processor::pgn;
    ad::Aggregation aggregator = ad::Aggregation::max;
    Variant variant = Variant::dual;
    EdgeInputs edge_inputs = EdgeInputs::capacity;

    bool has_cut_head() const { return variant == Variant::dual || variant == Variant::pipeline; }
    bool has_pointer_head() const { return variant != Variant::no_algo; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

nlohmann::json config_to_json(const ModelConfig& c);
/// Missing keys keep their defaults; unknown enum names raise ParseError.
ModelConfig config_from_json(const nlohmann::json& j);

} // namespace dar
