#include "vrsim/mobility.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace vrsim;

TEST(FovOf, OriginIsTileZero) {
  FovGrid g;
  EXPECT_EQ(fov_of(0.0, 0.0, g).value, 0);
}

TEST(FovOf, RowMajorIndexing) {
  FovGrid g;  // 4x2
  EXPECT_EQ(fov_of(1.5, 1.5, g).value, 5);  // col 1, row 1
  EXPECT_EQ(fov_of(3.5, 0.5, g).value, 3);
  EXPECT_EQ(fov_of(0.5, 1.5, g).value, 4);
}

TEST(FovOf, BoundaryBelongsToLowerTile) {
  FovGrid g;
  EXPECT_EQ(fov_of(1.0, 0.5, g).value, 0);  // x=1 boundary -> col 0
  EXPECT_EQ(fov_of(2.0, 1.0, g).value, 1);  // both boundaries -> col 1, row 0
  EXPECT_EQ(fov_of(4.0, 2.0, g).value, 7);  // outer corner -> last tile
}

TEST(FovOf, RejectsOutOfBounds) {
  FovGrid g;
  EXPECT_THROW(fov_of(-0.1, 0.5, g), std::out_of_range);
  EXPECT_THROW(fov_of(0.5, 2.1, g), std::out_of_range);
}

TEST(FovOf, SurjectiveOverGrid) {
  FovGrid g;
  std::set<int> seen;
  for (double x = 0.25; x < g.width(); x += 0.5)
    for (double y = 0.25; y < g.height(); y += 0.5) seen.insert(fov_of(x, y, g).value);
  EXPECT_EQ(static_cast<int>(seen.size()), g.n_fov());
  EXPECT_EQ(*seen.begin(), 0);
  EXPECT_EQ(*seen.rbegin(), g.n_fov() - 1);
}

TEST(StepEye, ZeroDiffusionStaysPut) {
  FovGrid g;
  EyeState s;
  s.x = 2.3;
  s.y = 0.7;
  s.diffusion = 0.0;
  s.current_fov = fov_of(s.x, s.y, g);
  Rng rng(1);
  const EyeState n = step_eye(s, g, rng);
  EXPECT_DOUBLE_EQ(n.x, s.x);
  EXPECT_DOUBLE_EQ(n.y, s.y);
  EXPECT_EQ(n.current_fov.value, s.current_fov.value);
}

TEST(StepEye, DisplacementVarianceIsTwoD) {
  Rng rng(2);
  const double d = 3.0;
  double sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double dx = sample_displacement(d, rng);
    sq += dx * dx;
  }
  EXPECT_NEAR(sq / n, 6.0, 0.05 * 6.0);
}

TEST(StepEye, NextFovIsAdjacent) {
  FovGrid g;
  Rng rng(3);
  EyeState s;
  s.x = 1.5;
  s.y = 0.5;
  s.diffusion = 3.0;
  s.current_fov = fov_of(s.x, s.y, g);
  for (int i = 0; i < 2000; ++i) {
    const EyeState n = step_eye(s, g, rng);
    const int c0 = s.current_fov.value % g.cols, r0 = s.current_fov.value / g.cols;
    const int c1 = n.current_fov.value % g.cols, r1 = n.current_fov.value / g.cols;
    ASSERT_LE(std::abs(c1 - c0), 1);
    ASSERT_LE(std::abs(r1 - r0), 1);
    ASSERT_EQ(fov_of(n.x, n.y, g).value, n.current_fov.value);
    s = n;
  }
}

TEST(StepEye, CornerTileNeighbors) {
  // from tile 0 of a 4x2 grid the next FoV is one of {0, 1, 4, 5}
  FovGrid g;
  Rng rng(4);
  std::set<int> seen;
  for (int i = 0; i < 5000; ++i) {
    EyeState s;
    s.x = 0.5;
    s.y = 0.5;
    s.diffusion = 3.0;
    s.current_fov = fov_of(s.x, s.y, g);
    seen.insert(step_eye(s, g, rng).current_fov.value);
  }
  for (int f : seen) EXPECT_TRUE(f == 0 || f == 1 || f == 4 || f == 5) << "fov " << f;
  EXPECT_EQ(seen.size(), 4u);
}

TEST(Trace, ZeroDiffusionConstant) {
  FovGrid g;
  std::vector<EyeState> users(2);
  users[0] = {0.5, 0.5, 0.0, {}};
  users[1] = {3.5, 1.5, 0.0, {}};
  Rng rng(5);
  const auto traces = generate_trace(users, g, 5, rng);
  ASSERT_EQ(traces.size(), 2u);
  for (int t = 0; t < 5; ++t) {
    EXPECT_EQ(traces[0][t], 0);
    EXPECT_EQ(traces[1][t], 7);
  }
}

TEST(Trace, Deterministic) {
  FovGrid g;
  std::vector<EyeState> users(3);
  for (int k = 0; k < 3; ++k) users[k] = {1.0 + k, 0.5, 3.0, {}};
  Rng a(6), b(6);
  EXPECT_EQ(generate_trace(users, g, 50, a), generate_trace(users, g, 50, b));
}

TEST(Trace, RejectsZeroSlots) {
  FovGrid g;
  std::vector<EyeState> users(1);
  Rng rng(1);
  EXPECT_THROW(generate_trace(users, g, 0, rng), std::invalid_argument);
}

TEST(Trace, CsvExport) {
  FovGrid g;
  std::vector<EyeState> users(1);
  users[0] = {0.5, 0.5, 0.0, {}};
  Rng rng(1);
  const auto traces = generate_trace(users, g, 3, rng);
  const std::string path = ::testing::TempDir() + "trace_test.csv";
  write_trace_csv(path, traces);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "slot,user_id,fov");
  std::getline(in, line);
  EXPECT_EQ(line, "0,0,0");
}
