#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "affistack/ingest.hpp"
#include "affistack/pose_rmsd.hpp"
#include "affistack/random.hpp"

namespace affistack::testing {

/// Plain double-loop nearest-same-element RMSD, written independently of the
/// library template.
inline double oracle_directed_rmsd(const Molecule& a, const Molecule& b) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& x : a.atoms()) {
    if (x.element.is_hydrogen()) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& y : b.atoms()) {
      if (y.element != x.element) continue;
      const double dx = x.position[0] - y.position[0];
      const double dy = x.position[1] - y.position[1];
      const double dz = x.position[2] - y.position[2];
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    total += best;
    ++count;
  }
  return std::sqrt(total / static_cast<double>(count));
}

inline double oracle_symmetric_rmsd(const Molecule& a, const Molecule& b) {
  return std::max(oracle_directed_rmsd(a, b), oracle_directed_rmsd(b, a));
}

/// Every (i, j) pair, kept if below the cutoff, ordered lexicographically by
/// (rank sum, rmsd, smina rank); the first survivor wins.
inline ConsensusChoice oracle_consensus(const Eigen::MatrixXd& m, double cutoff = 3.0) {
  std::vector<std::tuple<int, double, int, int>> pairs;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (m(i, j) < cutoff) pairs.emplace_back(i + j, m(i, j), i, j);
  if (pairs.empty()) return ConsensusChoice{0, 0, 100.0};
  std::sort(pairs.begin(), pairs.end());
  const auto& [sum, rmsd, i, j] = pairs.front();
  return ConsensusChoice{i, j, rmsd};
}

/// Random molecule with both heavy atoms and hydrogens; every element that
/// appears in `pool` is guaranteed at least once when atoms >= pool size.
inline Molecule random_molecule(Rng& rng, int heavy_atoms, const std::vector<std::string>& pool,
                                double spread = 3.0) {
  std::vector<Atom> atoms;
  for (int i = 0; i < heavy_atoms; ++i) {
    const auto& sym = pool[static_cast<std::size_t>(i) < pool.size() ? static_cast<std::size_t>(i)
                                                                      : rng.uniform_index(pool.size())];
    atoms.push_back(Atom{Element::from_symbol(sym),
                         Eigen::Vector3d(spread * rng.normal(), spread * rng.normal(), spread * rng.normal())});
  }
  atoms.push_back(Atom{Element::from_symbol("H"), Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal())});
  return Molecule("rand", std::move(atoms));
}

}  // namespace affistack::testing
