#include "dar/autodiff/parameters.hpp"

#include "dar/error.hpp"
#include "dar/graph/generators.hpp"

#include <cmath>
#include <random>

namespace dar::ad {

std::uint64_t name_hash(const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

Tensor& ParameterStore::add(const std::string& name, std::size_t rows, std::size_t cols,
                            std::uint64_t seed) {
    Tensor t(rows, cols, true);
    const bool bias = rows == 1 && name.size() > 2 && name.ends_with("_b");
    if (!bias) {
        std::mt19937_64 rng(mix_seed(seed, name_hash(name)));
        const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& x : t.data()) x = u(rng);
    }
    return add(name, std::move(t));
}

Tensor& ParameterStore::add(const std::string& name, Tensor t) {
    auto [it, inserted] = tensors_.insert_or_assign(name, std::move(t));
    (void)inserted;
    return it->second;
}

Tensor& ParameterStore::at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
    return it->second;
}

const Tensor& ParameterStore::at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
    return it->second;
}

std::vector<Tensor*> ParameterStore::trainable() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : tensors_)
        if (t.requires_grad()) out.push_back(&t);
    return out;
}

std::vector<std::string> ParameterStore::names() const {
    std::vector<std::string> out;
    for (const auto& [name, t] : tensors_) out.push_back(name);
    return out;
}

std::size_t ParameterStore::parameter_count() const {
    std::size_t c = 0;
    for (const auto& [name, t] : tensors_) c += t.size();
    return c;
}

void ParameterStore::zero_grad() {
    for (auto& [name, t] : tensors_) t.zero_grad();
}

void ParameterStore::freeze_all() {
    for (auto& [name, t] : tensors_) t.set_requires_grad(false);
}

bool ParameterStore::same_values(const ParameterStore& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (const auto& [name, t] : tensors_) {
        auto it = other.tensors_.find(name);
        if (it == other.tensors_.end() || !(it->second == t)) return false;
    }
    return true;
}

nlohmann::json ParameterStore::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, t] : tensors_) {
        j[name] = {{"shape", {t.rows(), t.cols()}},
                   {"data", std::vector<double>(t.data().begin(), t.data().end())}};
    }
    return j;
}

ParameterStore ParameterStore::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("checkpoint tensors: expected an object");
    ParameterStore store;
    for (const auto& [name, entry] : j.items()) {
        try {
            auto shape = entry.at("shape").get<std::vector<std::size_t>>();
            auto data = entry.at("data").get<std::vector<double>>();
            if (shape.size() != 2) throw ParseError("shape must have two dimensions");
            store.add(name, Tensor(shape[0], shape[1], std::move(data), true));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("checkpoint tensor '" + name + "': " + e.what());
        } catch (const ShapeError& e) {
            throw ParseError("checkpoint tensor '" + name + "': " + e.what());
        }
    }
    return store;
}

} // namespace dar::ad
