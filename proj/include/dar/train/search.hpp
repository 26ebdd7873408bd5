#pragma once

#include "dar/train/train.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace dar {

/// Random-search ranges: lr and weight decay log-uniform, hidden size
/// uniform over integers.
struct SearchSpace {
    int level = 1;
    std::pair<double, double> lr{1e-5, 1e-1};
    std::pair<double, double> weight_decay{1e-5, 1e-1};
    std::pair<std::size_t, std::size_t> hidden{16, 512};
    std::size_t samples = 50;

    static SearchSpace level_one();
    static SearchSpace level_two();
    bool contains(const SearchSpace& inner) const;
};

struct SearchTrial {
    double lr = 0.0;
    double weight_decay = 0.0;
    std::size_t hidden_dim = 0;
    double valid_F_mae = 0.0;
};

/// Returns the validation F MAE of one candidate configuration.
using TrialFn = std::function<double(const TrainConfig&)>;

/// Draws `budget` configurations from `space` on top of `base`, scores each
/// with `trial` and returns them sorted by validation F MAE (stable).
std::vector<SearchTrial> random_search(const SearchSpace& space, std::size_t budget,
                                       const TrainConfig& base, const TrialFn& trial,
                                       std::uint64_t seed);

/// Draws one configuration without training it.
TrainConfig sample_config(const SearchSpace& space, const TrainConfig& base, std::mt19937_64& rng);

} // namespace dar
