#include "dar/model/config.hpp"

#include "dar/error.hpp"

#include <string>

namespace dar {

namespace {

template <typename E, std::size_t N>
E lookup(std::string_view s, const std::pair<std::string_view, E> (&table)[N], const char* what) {
    for (const auto& [name, value] : table)
        if (name == s) return value;
    throw ParseError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::pair<std::string_view, Processor> kProcessors[] = {
    {"mpnn_dense", Processor::mpnn_dense}, {"pgn", Processor::pgn}};
constexpr std::pair<std::string_view, Variant> kVariants[] = {{"primal", Variant::primal},
                                                              {"dual", Variant::dual},
                                                              {"pipeline", Variant::pipeline},
                                                              {"no_algo", Variant::no_algo}};
constexpr std::pair<std::string_view, ad::Aggregation> kAggregations[] = {
    {"max", ad::Aggregation::max}, {"mean", ad::Aggregation::mean}, {"sum", ad::Aggregation::sum}};
constexpr std::pair<std::string_view, EdgeInputs> kEdgeInputs[] = {
    {"capacity", EdgeInputs::capacity}, {"surrogate", EdgeInputs::surrogate}};

template <typename E, std::size_t N>
std::string_view name_of(E v, const std::pair<std::string_view, E> (&table)[N]) {
    for (const auto& [name, value] : table)
        if (value == v) return name;
    return "?";
}

} // namespace

std::string_view to_string(Processor p) { return name_of(p, kProcessors); }
std::string_view to_string(Variant v) { return name_of(v, kVariants); }
std::string_view to_string(ad::Aggregation a) { return name_of(a, kAggregations); }
std::string_view to_string(EdgeInputs e) { return name_of(e, kEdgeInputs); }
Processor processor_from_string(std::string_view s) { return lookup(s, kProcessors, "processor"); }
Variant variant_from_string(std::string_view s) { return lookup(s, kVariants, "variant"); }
ad::Aggregation aggregation_from_string(std::string_view s) {
    return lookup(s, kAggregations, "aggregator");
}
EdgeInputs edge_inputs_from_string(std::string_view s) {
    return lookup(s, kEdgeInputs, "edge_inputs");
}

void ModelConfig::validate() const {
    if (hidden_dim == 0) throw InvalidArgument("hidden_dim must be positive");
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"hidden_dim", c.hidden_dim},
            {"processor", to_string(c.processor)},
            {"aggregator", to_string(c.aggregator)},
            {"variant", to_string(c.variant)},
            {"edge_inputs", to_string(c.edge_inputs)}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("model config: expected an object");
    ModelConfig c;
    try {
        if (j.contains("hidden_dim")) c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        if (j.contains("processor"))
            c.processor = processor_from_string(j.at("processor").get<std::string>());
        if (j.contains("aggregator"))
            c.aggregator = aggregation_from_string(j.at("aggregator").get<std::string>());
        if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
        if (j.contains("edge_inputs"))
            c.edge_inputs = edge_inputs_from_string(j.at("edge_inputs").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

} // namespace dar
