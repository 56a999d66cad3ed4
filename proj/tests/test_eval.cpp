#include <gtest/gtest.h>

#include <random>

#include "clusinit/eval.hpp"
#include "oracles.hpp"

using namespace clusinit;

TEST(Euclidean, Basics) {
    EXPECT_DOUBLE_EQ(euclidean({0, 0}, {3, 4}), 5.0);
    EXPECT_EQ(euclidean({1.5, -2}, {1.5, -2}), 0.0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0, 10);
    for (int i = 0; i < 100; ++i) {
        const Point2 p{z(rng), z(rng)}, q{z(rng), z(rng)};
        EXPECT_EQ(euclidean(p, q), euclidean(q, p));
    }
}

TEST(MatchCentroids, IdenticalSetsHaveZeroDistance) {
    const std::vector<Point2> c{{0, 0}, {5, 1}, {-3, 2}};
    const auto m = match_centroids(c, c);
    EXPECT_EQ(m.pairs.size(), 3u);
    EXPECT_EQ(m.mean_distance, 0.0);
    EXPECT_EQ(m.max_distance, 0.0);
}

TEST(MatchCentroids, ObviousOptimum) {
    const std::vector<Point2> truth{{0, 0}, {10, 10}};
    const std::vector<Point2> detected{{10.1, 10.1}, {0.2, 0}};
    const auto m = match_centroids(truth, detected);
    ASSERT_EQ(m.pairs.size(), 2u);
    EXPECT_EQ(m.pairs[0], (std::pair<int, int>{0, 1}));
    EXPECT_EQ(m.pairs[1], (std::pair<int, int>{1, 0}));
    EXPECT_NEAR(m.distances[0], 0.2, 1e-12);
    EXPECT_NEAR(m.distances[1], std::sqrt(0.02), 1e-12);
    EXPECT_NEAR(m.max_distance, 0.2, 1e-12);
}

TEST(MatchCentroids, UnmatchedEntriesListed) {
    const std::vector<Point2> truth{{0, 0}, {10, 0}, {20, 0}};
    const std::vector<Point2> detected{{19, 0}};
    const auto m = match_centroids(truth, detected);
    EXPECT_EQ(m.pairs, (std::vector<std::pair<int, int>>{{2, 0}}));
    EXPECT_EQ(m.unmatched_true, (std::vector<int>{0, 1}));
    EXPECT_TRUE(m.unmatched_detected.empty());
    const auto flipped = match_centroids(detected, truth);
    EXPECT_EQ(flipped.unmatched_detected, (std::vector<int>{0, 1}));
}

TEST(MatchCentroids, EqualsExhaustiveSearch) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> kd(1, 6);
    std::uniform_real_distribution<double> u(0, 10);
    for (int t = 0; t < 100; ++t) {
        std::vector<Point2> a(static_cast<std::size_t>(kd(rng))), b(static_cast<std::size_t>(kd(rng)));
        for (auto& p : a) p = {u(rng), u(rng)};
        for (auto& p : b) p = {u(rng), u(rng)};
        const auto m = match_centroids(a, b);
        EXPECT_EQ(m.pairs.size(), std::min(a.size(), b.size()));
        EXPECT_NEAR(m.total_distance(), oracle::min_matching_cost(a, b), 1e-9);
    }
}

TEST(AccuracyRate, PerfectAndPermuted) {
    const std::vector<int> truth{0, 0, 1, 1, 2, 2, 2};
    EXPECT_DOUBLE_EQ(accuracy_rate(truth, truth), 1.0);
    const std::vector<int> permuted{2, 2, 0, 0, 1, 1, 1};
    EXPECT_DOUBLE_EQ(accuracy_rate(truth, permuted), 1.0);
}

TEST(AccuracyRate, EqualsExhaustiveSearch) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 100; ++t) {
        const int kt = std::uniform_int_distribution<int>(1, 5)(rng);
        const int kp = std::uniform_int_distribution<int>(1, 5)(rng);
        const int n = std::uniform_int_distribution<int>(std::max(kt, kp), 40)(rng);
        std::vector<int> truth(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            truth[static_cast<std::size_t>(i)] = i < kt ? i : std::uniform_int_distribution<int>(0, kt - 1)(rng);
            pred[static_cast<std::size_t>(i)] = i < kp ? i : std::uniform_int_distribution<int>(0, kp - 1)(rng);
        }
        std::shuffle(pred.begin(), pred.end(), rng);
        EXPECT_NEAR(accuracy_rate(truth, pred), oracle::accuracy(truth, pred), 1e-12);

        // Relabeling the prediction never changes the score.
        std::vector<int> relabel(static_cast<std::size_t>(kp));
        std::iota(relabel.begin(), relabel.end(), 0);
        std::shuffle(relabel.begin(), relabel.end(), rng);
        std::vector<int> renamed(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) renamed[i] = relabel[static_cast<std::size_t>(pred[i])];
        EXPECT_NEAR(accuracy_rate(truth, renamed), accuracy_rate(truth, pred), 1e-12);
    }
}

TEST(AccuracyRate, LengthMismatchThrows) {
    EXPECT_THROW(accuracy_rate(std::vector<int>{0, 1}, std::vector<int>{0}), Error);
}

TEST(Assignment, RectangularShapes) {
    CostMatrix tall(3, 1);
    tall(0, 0) = 5;
    tall(1, 0) = 1;
    tall(2, 0) = 3;
    EXPECT_EQ(solve_assignment(tall), (std::vector<int>{-1, 0, -1}));
    CostMatrix wide(1, 3);
    wide(0, 0) = 5;
    wide(0, 1) = 1;
    wide(0, 2) = 3;
    EXPECT_EQ(solve_assignment(wide), (std::vector<int>{1}));
}
