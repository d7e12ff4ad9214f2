// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace nqs {

using Spin = std::int8_t;

/// A basis label sigma: one +1/-1 entry per spin.
class SpinConfiguration {
 public:
  SpinConfiguration() = default;
  explicit SpinConfiguration(std::size_t n, Spin value = 1);
  /// Throws ContractViolation if any entry is not +1 or -1.
  explicit SpinConfiguration(std::vector<Spin> values);

  /// Basis state from an integer label: bit i set means sigma_i = -1.
  static SpinConfiguration from_index(std::uint64_t index, std::size_t n);
  std::uint64_t to_index() const;

  std::size_t size() const { return values_.size(); }
  Spin operator[](std::size_t i) const { return values_[i]; }
  std::span<const Spin> values() const { return values_; }

  /// Negates the listed sites in place. Indices must be in range.
  void flip_in_place(std::span<const std::size_t> sites);

  /// Sum of all spins.
  long total() const;

  friend bool operator==(const SpinConfiguration&, const SpinConfiguration&) = default;

 private:
  std::vector<Spin> values_;
};

/// Small fixed-capacity set of distinct sites to flip; every move and
/// off-diagonal Hamiltonian term in this library touches at most four spins.
class FlipSet {
 public:
  static constexpr std::size_t kCapacity = 4;

  FlipSet() = default;
  FlipSet(std::initializer_list<std::size_t> sites);
  template <std::size_t K>
  explicit FlipSet(const std::array<std::size_t, K>& sites) {
    for (std::size_t s : sites) push(s);
  }

  void push(std::size_t site);
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::span<const std::size_t> sites() const { return {sites_.data(), count_}; }
  operator std::span<const std::size_t>() const { return sites(); }  // NOLINT(google-explicit-constructor)

  friend bool operator==(const FlipSet& a, const FlipSet& b) {
    return a.count_ == b.count_ && std::equal(a.sites_.begin(), a.sites_.begin() + a.count_, b.sites_.begin());
  }

 private:
  std::array<std::size_t, kCapacity> sites_{};
  std::size_t count_ = 0;
};

/// Returns a copy of sigma with exactly the listed sites negated.
SpinConfiguration flip(const SpinConfiguration& sigma, std::span<const std::size_t> sites);

enum class Boundary { open, periodic };

using Bond = std::pair<std::size_t, std::size_t>;

/// L x L square lattice for the transverse-field Ising model. Sites are
/// indexed row-major: site(r, c) = r * L + c.
class SquareLattice {
 public:
  explicit SquareLattice(std::size_t side, Boundary boundary = Boundary::open);

  std::size_t side() const { return side_; }
  Boundary boundary() const { return boundary_; }
  std::size_t size() const { return side_ * side_; }
  std::size_t site(std::size_t row, std::size_t col) const { return row * side_ + col; }

  /// Nearest-neighbour bonds, row-major, the horizontal bond of a site before
  /// its vertical bond. Count is 2L(L-1) when open and 2L^2 when periodic
  /// (for L = 2 periodic, the wrap-around bonds repeat the interior pairs).
  const std::vector<Bond>& bonds() const { return bonds_; }

  std::string descriptor() const;

  friend bool operator==(const SquareLattice& a, const SquareLattice& b) {
    return a.side_ == b.side_ && a.boundary_ == b.boundary_;
  }

 private:
  std::size_t side_;
  Boundary boundary_;
  std::vector<Bond> bonds_;
};

std::vector<Bond> bonds(const SquareLattice& lattice);

using Cell = std::array<std::size_t, 4>;

/// Periodic L x L lattice with spins on the 2L^2 edges.
///
/// Edge layout: horizontal edge h(r, c) joins vertex (r, c) to (r, c+1) and has
/// index r*L + c; vertical edge v(r, c) joins vertex (r, c) to (r+1, c) and has
/// index L^2 + r*L + c. Plaquette (r, c) is bounded by
/// {h(r,c), v(r,c+1), h(r+1,c), v(r,c)}; the star of vertex (r, c) is
/// {h(r,c), v(r,c), h(r,c-1), v(r-1,c)}. All coordinates wrap modulo L.
class ToricLattice {
 public:
  explicit ToricLattice(std::size_t side);

  std::size_t side() const { return side_; }
  std::size_t size() const { return 2 * side_ * side_; }
  std::size_t horizontal_edge(std::size_t row, std::size_t col) const;
  std::size_t vertical_edge(std::size_t row, std::size_t col) const;

  const std::vector<Cell>& plaquettes() const { return plaquettes_; }
  const std::vector<Cell>& vertices() const { return vertices_; }

  std::string descriptor() const;

  friend bool operator==(const ToricLattice& a, const ToricLattice& b) { return a.side_ == b.side_; }

 private:
  std::size_t side_;
  std::vector<Cell> plaquettes_;
  std::vector<Cell> vertices_;
};

struct ToricCells {
  std::vector<Cell> plaquettes;
  std::vector<Cell> vertices;
};

ToricCells toric_cells(const ToricLattice& lattice);

/// Product of the four spins on a cell (the B_p eigenvalue for plaquettes).
int cell_parity(const SpinConfiguration& sigma, const Cell& cell);

using Lattice = std::variant<SquareLattice, ToricLattice>;

std::size_t site_count(const Lattice& lattice);
std::string describe(const Lattice& lattice);
/// Inverse of describe(); throws ConfigError on malformed input.
Lattice parse_lattice_descriptor(const std::string& text);

}  // namespace nqs
