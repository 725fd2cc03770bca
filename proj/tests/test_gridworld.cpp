#include <gtest/gtest.h>

#include "fame/gridworld.hpp"
#include "fame/mdp.hpp"

using namespace fame;

namespace {

GridworldSpec open_grid() {
    GridworldSpec spec;
    spec.width = 4;
    spec.height = 3;
    spec.start = {0, 0};
    spec.goal = Cell{2, 3};
    return spec;
}

}  // namespace

TEST(Gridworld, GenerationIsAPureFunctionOfSeed) {
    GridworldSpec spec = open_grid();
    spec.goal.reset();
    spec.wall_density = 0.2;
    spec.n_penalties = 2;
    const auto a = generate_gridworld(spec, 99);
    const auto b = generate_gridworld(spec, 99);
    EXPECT_EQ(a.mdp, b.mdp);
    EXPECT_EQ(a.walls, b.walls);
    EXPECT_EQ(a.goal, b.goal);
}

TEST(Gridworld, DeterministicMovesAndBoundaries) {
    const auto world = generate_gridworld(open_grid(), 1);
    const auto& mdp = world.mdp;
    const std::size_t s = world.index({1, 1});
    EXPECT_EQ(mdp.p(s, kUp, world.index({0, 1})), 1.0);
    EXPECT_EQ(mdp.p(s, kRight, world.index({1, 2})), 1.0);
    EXPECT_EQ(mdp.p(s, kDown, world.index({2, 1})), 1.0);
    EXPECT_EQ(mdp.p(s, kLeft, world.index({1, 0})), 1.0);
    const std::size_t corner = world.index({0, 0});
    EXPECT_EQ(mdp.p(corner, kUp, corner), 1.0);
    EXPECT_EQ(mdp.p(corner, kLeft, corner), 1.0);
}

TEST(Gridworld, SlipSpreadsMassUniformly) {
    GridworldSpec spec = open_grid();
    spec.slip = 0.2;
    const auto world = generate_gridworld(spec, 1);
    const std::size_t s = world.index({1, 1});
    EXPECT_NEAR(world.mdp.p(s, kRight, world.index({1, 2})), 0.8 + 0.05, 1e-15);
    EXPECT_NEAR(world.mdp.p(s, kRight, world.index({0, 1})), 0.05, 1e-15);
}

TEST(Gridworld, GoalIsTerminalAndRewarded) {
    GridworldSpec spec = open_grid();
    spec.step_reward = -0.01;
    const auto world = generate_gridworld(spec, 1);
    const std::size_t g = world.goal_state();
    EXPECT_TRUE(world.mdp.terminal[g]);
    EXPECT_DOUBLE_EQ(world.mdp.r(world.index({2, 2}), kRight), 1.0);
    EXPECT_DOUBLE_EQ(world.mdp.r(world.index({0, 0}), kRight), -0.01);
}

TEST(Gridworld, OptimalValueFollowsShortestPath) {
    const auto world = generate_gridworld(open_grid(), 1);
    const QTable q = value_iteration(world.mdp, 1e-12);
    // Start (0,0) to goal (2,3) is 5 moves; the last one pays 1.
    const auto row = q.row(world.start_state());
    EXPECT_NEAR(*std::max_element(row.begin(), row.end()), std::pow(0.9, 4), 1e-10);
}

TEST(Gridworld, PenaltyCellsPayOnEntry) {
    GridworldSpec spec = open_grid();
    spec.penalties = {Cell{0, 1}};
    const auto world = generate_gridworld(spec, 1);
    EXPECT_DOUBLE_EQ(world.mdp.r(world.index({0, 0}), kRight), -1.0);
    EXPECT_FALSE(world.mdp.terminal[world.index({0, 1})]);
}

TEST(Gridworld, InvalidSpecsAreRejected) {
    GridworldSpec spec = open_grid();
    spec.width = 13;
    EXPECT_THROW(generate_gridworld(spec, 0), std::invalid_argument);
    spec = open_grid();
    spec.goal = spec.start;
    EXPECT_THROW(generate_gridworld(spec, 0), std::invalid_argument);
    spec = open_grid();
    spec.slip = 0.6;
    EXPECT_THROW(generate_gridworld(spec, 0), std::invalid_argument);
}

TEST(Gridworld, UnreachableLayoutsExhaustRetryBudget) {
    GridworldSpec spec;
    spec.width = 7;
    spec.height = 7;
    spec.goal = Cell{6, 6};
    spec.wall_density = 0.95;
    spec.retry_budget = 3;
    EXPECT_THROW(generate_gridworld(spec, 5), GenerationError);
}

TEST(Gridworld, WallsAreNeverEntered) {
    GridworldSpec spec;
    spec.width = 6;
    spec.height = 6;
    spec.goal = Cell{5, 5};
    spec.wall_density = 0.25;
    const auto world = generate_gridworld(spec, 3);
    for (std::size_t s = 0; s < world.mdp.n_states; ++s) {
        if (world.mdp.terminal[s]) continue;
        for (std::size_t a = 0; a < kGridActions; ++a)
            for (std::size_t n = 0; n < world.mdp.n_states; ++n)
                if (world.walls[n]) {
                    EXPECT_EQ(world.mdp.p(s, a, n), 0.0);
                }
    }
}
