#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace crepe {

using Vec = Eigen::VectorXd;
using Tokens = std::vector<int>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class Direction { forward, backward };

// Sub-times are stored ascending whichever proposal produced the path:
// a forward path starts at states.front(), a backward path at states.back().
template <class State>
struct PathSegment {
    std::vector<double> times;
    std::vector<State> states;
    Direction direction = Direction::forward;

    std::size_t size() const { return states.size(); }
    const State& start() const { return direction == Direction::forward ? states.front() : states.back(); }
    const State& end() const { return direction == Direction::forward ? states.back() : states.front(); }
};

enum class ProcessTag { pretrained, proposal, reference };

struct LogRne {
    double value = 0.0;
    ProcessTag tag = ProcessTag::proposal;
    int model = -1;  // index of the pretrained model, -1 otherwise

    bool zero_probability() const { return value == kNegInf; }
    bool finite() const { return std::isfinite(value); }
};

template <class State>
struct ReplicaEnsemble {
    std::vector<State> states;       // states[m] lives at level time t_m
    std::vector<int> replica_ids;    // which replica occupies level m
    std::uint64_t iteration = 0;

    int num_levels() const { return static_cast<int>(states.size()); }
};

bool is_permutation_of_levels(const std::vector<int>& ids);

}  // namespace crepe
