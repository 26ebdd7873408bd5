#pragma once

#include "dar/autodiff/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dar::ad {

/// Named learnable tensors. Node-based storage keeps addresses stable, so a
/// Tape can key parameter leaves by pointer.
class ParameterStore {
public:
    /// Glorot-uniform weights seeded from (seed, name); rows == 1 tensors
    /// whose name ends in "_b" start at zero.
    Tensor& add(const std::string& name, std::size_t rows, std::size_t cols, std::uint64_t seed);
    Tensor& add(const std::string& name, Tensor t);

    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    std::vector<Tensor*> trainable();
    std::vector<std::string> names() const;
    std::size_t size() const { return tensors_.size(); }
    std::size_t parameter_count() const;

    void zero_grad();
    void freeze_all();

    auto begin() { return tensors_.begin(); }
    auto end() { return tensors_.end(); }
    auto begin() const { return tensors_.begin(); }
    auto end() const { return tensors_.end(); }

    /// Values only; equality ignores gradients and frozen flags.
    bool same_values(const ParameterStore& other) const;

    /// Checkpoint: {name: {"shape": [r, c], "data": [...]}}.
    nlohmann::json to_json() const;
    static ParameterStore from_json(const nlohmann::json& j);

private:
    std::map<std::string, Tensor> tensors_;
};

std::uint64_t name_hash(const std::string& name);

} // namespace dar::ad
