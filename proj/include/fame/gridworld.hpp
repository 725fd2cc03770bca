#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fame/mdp.hpp"
#include "fame/rng.hpp"

namespace fame {

struct Cell {
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const Cell&) const = default;
};

/// Action order of every gridworld.
enum GridAction : std::size_t { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };
inline constexpr std::size_t kGridActions = 4;

/**
Parameters of a procedurally generated gridworld.

Every cell is a state, so tasks generated from the same width and height
share state and action spaces. Walls are absorbing states that cannot be
entered; the goal is terminal and pays `goal_reward` on entry, penalty
cells pay `penalty_reward` on entry and are not terminal. With probability
`slip` the move goes in a uniformly random direction instead.
*/
struct GridworldSpec {
    std::size_t width = 5;
    std::size_t height = 5;
    double wall_density = 0.0;
    double slip = 0.0;
    double gamma = 0.9;
    Cell start{0, 0};
    /// Goal cell; drawn from the seed when absent.
    std::optional<Cell> goal;
    /// Penalty cells; when empty, `n_penalties` are drawn from the seed.
    std::vector<Cell> penalties;
    std::size_t n_penalties = 0;
    double goal_reward = 1.0;
    double penalty_reward = -1.0;
    double step_reward = 0.0;
    /// Episode cap used by simulators built on this task.
    std::size_t max_episode_steps = 50;
    std::size_t retry_budget = 100;

    void validate() const {
        if (width == 0 || height == 0 || width > 12 || height > 12)
            throw std::invalid_argument("GridworldSpec: width and height must lie in [1, 12]");
        if (!(wall_density >= 0.0 && wall_density < 1.0))
            throw std::invalid_argument("GridworldSpec: wall_density must lie in [0, 1)");
        if (!(slip >= 0.0 && slip < 0.5)) throw std::invalid_argument("GridworldSpec: slip must lie in [0, 0.5)");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("GridworldSpec: gamma must lie in (0, 1)");
        if (start.row >= height || start.col >= width) throw std::invalid_argument("GridworldSpec: start outside grid");
        if (goal && (goal->row >= height || goal->col >= width))
            throw std::invalid_argument("GridworldSpec: goal outside grid");
        if (goal && *goal == start) throw std::invalid_argument("GridworldSpec: goal equals start");
        for (const Cell& c : penalties)
            if (c.row >= height || c.col >= width) throw std::invalid_argument("GridworldSpec: penalty outside grid");
        if (max_episode_steps == 0) throw std::invalid_argument("GridworldSpec: max_episode_steps must be positive");
    }
};

/// Generated layout plus the MDP built from it.
struct Gridworld {
    GridworldSpec spec;
    std::uint64_t seed = 0;
    std::vector<bool> walls;
    Cell goal;
    std::vector<Cell> penalties;
    TabularMdp mdp;

    std::size_t index(Cell c) const { return c.row * spec.width + c.col; }
    Cell cell(std::size_t s) const { return {s / spec.width, s % spec.width}; }
    std::size_t start_state() const { return index(spec.start); }
    std::size_t goal_state() const { return index(goal); }
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Cell grid_move(const GridworldSpec& spec, const std::vector<bool>& walls, Cell c, std::size_t action) {
    Cell next = c;
    switch (action) {
        case kUp: if (c.row > 0) --next.row; break;
        case kRight: if (c.col + 1 < spec.width) ++next.col; break;
        case kDown: if (c.row + 1 < spec.height) ++next.row; break;
        case kLeft: if (c.col > 0) --next.col; break;
        default: throw std::out_of_range("grid_move: bad action");
    }
    if (walls[next.row * spec.width + next.col]) return c;
    return next;
}

inline bool reachable(const GridworldSpec& spec, const std::vector<bool>& walls, Cell from, Cell to) {
    std::vector<bool> seen(spec.width * spec.height, false);
    std::queue<Cell> frontier;
    frontier.push(from);
    seen[from.row * spec.width + from.col] = true;
    while (!frontier.empty()) {
        const Cell c = frontier.front();
        frontier.pop();
        if (c == to) return true;
        for (std::size_t a = 0; a < kGridActions; ++a) {
            const Cell n = grid_move(spec, walls, c, a);
            const std::size_t idx = n.row * spec.width + n.col;
            if (!seen[idx]) {
                seen[idx] = true;
                frontier.push(n);
            }
        }
    }
    return false;
}

}  // namespace detail

/**
Builds a gridworld as a pure function of (spec, seed). Layouts whose goal is
unreachable from the start are redrawn up to `retry_budget` times before a
GenerationError is thrown.
*/
inline Gridworld generate_gridworld(const GridworldSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t n = spec.width * spec.height;
    Rng rng(derive_seed(seed, 0x67726964ULL));
    for (std::size_t attempt = 0; attempt < spec.retry_budget; ++attempt) {
        Gridworld world;
        world.spec = spec;
        world.seed = seed;
        if (spec.goal) {
            world.goal = *spec.goal;
        } else {
            do {
                world.goal = {rng.uniform_index(spec.height), rng.uniform_index(spec.width)};
            } while (world.goal == spec.start && n > 1);
        }
        if (world.goal == spec.start) throw GenerationError("generate_gridworld: grid too small for a goal");
        world.walls.assign(n, false);
        for (std::size_t s = 0; s < n; ++s) {
            const Cell c{s / spec.width, s % spec.width};
            const bool wall = rng.bernoulli(spec.wall_density);
            if (c == spec.start || c == world.goal) continue;
            world.walls[s] = wall;
        }
        world.penalties = spec.penalties;
        if (world.penalties.empty()) {
            for (std::size_t i = 0; i < spec.n_penalties; ++i) {
                const Cell c{rng.uniform_index(spec.height), rng.uniform_index(spec.width)};
                if (c == spec.start || c == world.goal || world.walls[world.index(c)]) continue;
                world.penalties.push_back(c);
            }
        }
        for (const Cell& c : world.penalties) world.walls[world.index(c)] = false;
        if (!detail::reachable(spec, world.walls, spec.start, world.goal)) continue;

        std::vector<double> entry_reward(n, spec.step_reward);
        for (const Cell& c : world.penalties) entry_reward[world.index(c)] = spec.penalty_reward;
        entry_reward[world.goal_state()] = spec.goal_reward;

        TabularMdp mdp(n, kGridActions, spec.gamma);
        for (std::size_t s = 0; s < n; ++s) {
            const Cell c = world.cell(s);
            for (std::size_t a = 0; a < kGridActions; ++a) {
                for (std::size_t dir = 0; dir < kGridActions; ++dir) {
                    double prob = spec.slip / static_cast<double>(kGridActions);
                    if (dir == a) prob += 1.0 - spec.slip;
                    if (prob == 0.0) continue;
                    const std::size_t next = world.index(detail::grid_move(spec, world.walls, c, dir));
                    mdp.p(s, a, next) += prob;
                }
                double expected = 0.0;
                for (std::size_t next = 0; next < n; ++next) expected += mdp.p(s, a, next) * entry_reward[next];
                mdp.r(s, a) = expected;
            }
        }
        for (std::size_t s = 0; s < n; ++s)
            if (world.walls[s]) mdp.make_terminal(s);
        mdp.make_terminal(world.goal_state());
        mdp.start_dist[world.start_state()] = 1.0;
        mdp.validate();
        world.mdp = std::move(mdp);
        return world;
    }
    throw GenerationError("generate_gridworld: no reachable layout within retry budget (seed " +
                          std::to_string(seed) + ")");
}

}  // namespace fame
