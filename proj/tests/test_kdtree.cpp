#include <catch2/catch_amalgamated.hpp>

#include <limits>

#include "mvreg/kdtree.hpp"
#include "mvreg/rng.hpp"

using namespace mvreg;

namespace {

PointCloud random_cloud(Rng& rng, std::size_t n, double half_width = 1.0) {
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points.push_back(rng.vector_in_box(half_width));
  }
  return cloud;
}

// Reference answer: lexicographic minimum over (squared distance, index).
Neighbor brute_force(const PointCloud& cloud, const Eigen::Vector3d& q,
                     std::size_t excluded) {
  double best_d2 = std::numeric_limits<double>::infinity();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (i == excluded) continue;
    const double d2 = (cloud.points[i] - q).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
      best_d2 = d2;
      best = i;
    }
  }
  return Neighbor{best, std::sqrt(best_d2)};
}

}  // namespace

TEST_CASE("singleton cloud") {
  PointCloud cloud;
  cloud.points.push_back({1, 2, 3});
  NeighborIndex index(cloud);
  const Neighbor nb = index.nearest({1, 2, 3});
  CHECK(nb.index == 0);
  CHECK(nb.distance == 0.0);
}

TEST_CASE("unit cube corners") {
  PointCloud cloud;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) cloud.points.push_back({double(x), double(y), double(z)});
  NeighborIndex index(cloud);
  const Neighbor nb = index.nearest({0.1, 0, 0});
  CHECK(cloud.points[nb.index] == Eigen::Vector3d(0, 0, 0));
  CHECK(nb.distance == Catch::Approx(0.1));
}

TEST_CASE("equidistant tie resolves to the smallest index") {
  PointCloud cloud;
  for (int i = 0; i < 10; ++i) cloud.points.push_back({100.0 + i, 100.0, 100.0});
  cloud.points[3] = {1, 0, 0};
  cloud.points[7] = {0, 1, 0};
  NeighborIndex index(cloud);
  const Neighbor nb = index.nearest({0, 0, 0});
  CHECK(nb.index == 3);
  CHECK(nb.distance == 1.0);
}

TEST_CASE("queries match brute force exactly") {
  Rng rng(21);
  const PointCloud cloud = random_cloud(rng, 1000);
  NeighborIndex index(cloud);

  for (int k = 0; k < 300; ++k) {
    const Eigen::Vector3d q = rng.vector_in_box(1.2);
    const Neighbor got = index.nearest(q);
    const Neighbor want = brute_force(cloud, q, SIZE_MAX);
    CHECK(got.index == want.index);
    CHECK(got.distance == want.distance);
  }
  // Self-excluded queries on the indexed points themselves.
  for (std::size_t i = 0; i < cloud.points.size(); i += 7) {
    const Neighbor got = index.nearest_excluding(cloud.points[i], i);
    const Neighbor want = brute_force(cloud, cloud.points[i], i);
    CHECK(got.index == want.index);
    CHECK(got.distance == want.distance);
  }
}

TEST_CASE("exactness holds on clustered duplicate-heavy data") {
  Rng rng(22);
  PointCloud cloud;
  for (int k = 0; k < 500; ++k) {
    Eigen::Vector3d p = rng.vector_in_box(0.05);
    cloud.points.push_back(p);
    if (k % 3 == 0) cloud.points.push_back(p);  // exact duplicates
  }
  NeighborIndex index(cloud);
  for (std::size_t i = 0; i < cloud.points.size(); i += 5) {
    const Neighbor got = index.nearest_excluding(cloud.points[i], i);
    const Neighbor want = brute_force(cloud, cloud.points[i], i);
    CHECK(got.index == want.index);
    CHECK(got.distance == want.distance);
  }
}

TEST_CASE("rebuild determinism") {
  Rng rng(23);
  const PointCloud cloud = random_cloud(rng, 512);
  NeighborIndex a(cloud);
  NeighborIndex b(cloud);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector3d q = rng.vector_in_box(1.0);
    const Neighbor na = a.nearest(q);
    const Neighbor nb = b.nearest(q);
    CHECK(na.index == nb.index);
    CHECK(na.distance == nb.distance);
  }
}

TEST_CASE("self_resolution on regular grids and pairs") {
  PointCloud grid;
  const double h = 0.25;
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y)
      for (int z = 0; z < 4; ++z) grid.points.push_back({h * x, h * y, h * z});
  CHECK(self_resolution(NeighborIndex(grid)) == Catch::Approx(h * h).epsilon(1e-12));

  PointCloud pair;
  pair.points.push_back({0, 0, 0});
  pair.points.push_back({0, 0, 0.7});
  CHECK(self_resolution(NeighborIndex(pair)) == Catch::Approx(0.49).epsilon(1e-12));
}

TEST_CASE("self_resolution matches brute force on random clouds") {
  Rng rng(24);
  const PointCloud cloud = random_cloud(rng, 400);
  double sum = 0.0;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Neighbor nb = brute_force(cloud, cloud.points[i], i);
    sum += nb.distance * nb.distance;
  }
  CHECK(self_resolution(NeighborIndex(cloud)) ==
        Catch::Approx(sum / double(cloud.points.size())).epsilon(1e-14));
}

TEST_CASE("error cases") {
  PointCloud empty;
  CHECK_THROWS_AS(NeighborIndex(empty), Error);

  PointCloud one;
  one.points.push_back({0, 0, 0});
  CHECK_THROWS_AS(self_resolution(NeighborIndex(one)), Error);
}
