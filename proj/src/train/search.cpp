#include "dar/train/search.hpp"

#include "dar/error.hpp"
#include "dar/graph/generators.hpp"

#include <algorithm>
#include <cmath>

namespace dar {

SearchSpace SearchSpace::level_one() { return {}; }

SearchSpace SearchSpace::level_two() {
    SearchSpace s;
    s.level = 2;
    s.lr = {1e-3, 1e-2};
    s.weight_decay = {1e-3, 4e-3};
    s.hidden = {60, 100};
    return s;
}

bool SearchSpace::contains(const SearchSpace& in) const {
    return lr.first <= in.lr.first && in.lr.second <= lr.second &&
           weight_decay.first <= in.weight_decay.first &&
           in.weight_decay.second <= weight_decay.second && hidden.first <= in.hidden.first &&
           in.hidden.second <= hidden.second;
}

namespace {

double log_uniform(std::pair<double, double> r, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(std::log(r.first), std::log(r.second));
    return std::exp(u(rng));
}

} // namespace

TrainConfig sample_config(const SearchSpace& space, const TrainConfig& base, std::mt19937_64& rng) {
    if (!(space.lr.first > 0.0 && space.lr.first <= space.lr.second) ||
        !(space.weight_decay.first > 0.0 && space.weight_decay.first <= space.weight_decay.second) ||
        space.hidden.first < 1 || space.hidden.first > space.hidden.second)
        throw InvalidArgument("search space has an empty or non-positive range");
    TrainConfig c = base;
    c.lr = log_uniform(space.lr, rng);
    c.weight_decay = log_uniform(space.weight_decay, rng);
    std::uniform_int_distribution<std::size_t> h(space.hidden.first, space.hidden.second);
    c.model.hidden_dim = h(rng);
    return c;
}

std::vector<SearchTrial> random_search(const SearchSpace& space, std::size_t budget,
                                       const TrainConfig& base, const TrialFn& trial,
                                       std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0x5ea7c4));
    std::vector<SearchTrial> out;
    for (std::size_t k = 0; k < budget; ++k) {
        TrainConfig c = sample_config(space, base, rng);
        c.seed = mix_seed(seed, k);
        out.push_back({c.lr, c.weight_decay, c.model.hidden_dim, trial(c)});
    }
    std::stable_sort(out.begin(), out.end(), [](const SearchTrial& a, const SearchTrial& b) {
        return a.valid_F_mae < b.valid_F_mae;
    });
    return out;
}

} // namespace dar
