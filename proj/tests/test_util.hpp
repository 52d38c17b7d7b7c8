#pragma once

#include <cstdint>
#include <random>

#include "chns/grid.hpp"

namespace chns::fixtures {

inline void fill_random(Array2D& a, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (double& v : a.flat()) v = d(rng);
}

inline StaggeredVecField random_velocity(const GridSpec& g, std::uint32_t seed) {
  StaggeredVecField u(g);
  fill_random(u.ux, seed);
  fill_random(u.uy, seed + 1);
  apply_no_slip(u, g);
  sync_periodic(u, g);
  return u;
}

inline CellField random_cell(const GridSpec& g, std::uint32_t seed) {
  CellField f(g);
  fill_random(f, seed);
  return f;
}

}  // namespace chns::fixtures
