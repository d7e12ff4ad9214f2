// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/lattice.hpp"

#include <numeric>
#include <sstream>

#include "nqs/error.hpp"

namespace nqs {

SpinConfiguration::SpinConfiguration(std::size_t n, Spin value) : values_(n, value) {
  NQS_EXPECT(value == 1 || value == -1, "spin value must be +1 or -1");
}

SpinConfiguration::SpinConfiguration(std::vector<Spin> values) : values_(std::move(values)) {
  for (Spin s : values_) NQS_EXPECT(s == 1 || s == -1, "spin value must be +1 or -1");
}

SpinConfiguration SpinConfiguration::from_index(std::uint64_t index, std::size_t n) {
  NQS_EXPECT(n <= 64, "index labels support at most 64 spins");
  SpinConfiguration sigma(n);
  for (std::size_t i = 0; i < n; ++i)
    if ((index >> i) & 1U) sigma.values_[i] = -1;
  return sigma;
}

std::uint64_t SpinConfiguration::to_index() const {
  NQS_EXPECT(values_.size() <= 64, "index labels support at most 64 spins");
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (values_[i] < 0) index |= std::uint64_t{1} << i;
  return index;
}

void SpinConfiguration::flip_in_place(std::span<const std::size_t> sites) {
  for (std::size_t s : sites) {
    NQS_EXPECT(s < values_.size(), "site index " + std::to_string(s) + " out of range");
    values_[s] = static_cast<Spin>(-values_[s]);
  }
}

long SpinConfiguration::total() const { return std::accumulate(values_.begin(), values_.end(), 0L); }

SpinConfiguration flip(const SpinConfiguration& sigma, std::span<const std::size_t> sites) {
  SpinConfiguration out = sigma;
  out.flip_in_place(sites);
  return out;
}

SquareLattice::SquareLattice(std::size_t side, Boundary boundary) : side_(side), boundary_(boundary) {
  NQS_EXPECT(side >= 1, "lattice side must be positive");
  const bool periodic = boundary == Boundary::periodic;
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      if (c + 1 < side) {
        bonds_.emplace_back(site(r, c), site(r, c + 1));
      } else if (periodic && side > 1) {
        bonds_.emplace_back(site(r, c), site(r, 0));
      }
      if (r + 1 < side) {
        bonds_.emplace_back(site(r, c), site(r + 1, c));
      } else if (periodic && side > 1) {
        bonds_.emplace_back(site(r, c), site(0, c));
      }
    }
  }
}

std::string SquareLattice::descriptor() const {
  return "square:L=" + std::to_string(side_) + (boundary_ == Boundary::open ? ":open" : ":periodic");
}

std::vector<Bond> bonds(const SquareLattice& lattice) { return lattice.bonds(); }

ToricLattice::ToricLattice(std::size_t side) : side_(side) {
  NQS_EXPECT(side >= 2, "toric lattice side must be at least 2");
  const std::size_t L = side;
  for (std::size_t r = 0; r < L; ++r) {
    for (std::size_t c = 0; c < L; ++c) {
      plaquettes_.push_back(
          {horizontal_edge(r, c), vertical_edge(r, (c + 1) % L), horizontal_edge((r + 1) % L, c), vertical_edge(r, c)});
    }
  }
  for (std::size_t r = 0; r < L; ++r) {
    for (std::size_t c = 0; c < L; ++c) {
      vertices_.push_back(
          {horizontal_edge(r, c), vertical_edge(r, c), horizontal_edge(r, (c + L - 1) % L), vertical_edge((r + L - 1) % L, c)});
    }
  }
}

std::size_t ToricLattice::horizontal_edge(std::size_t row, std::size_t col) const { return row * side_ + col; }

std::size_t ToricLattice::vertical_edge(std::size_t row, std::size_t col) const {
  return side_ * side_ + row * side_ + col;
}

std::string ToricLattice::descriptor() const { return "toric:L=" + std::to_string(side_); }

ToricCells toric_cells(const ToricLattice& lattice) { return {lattice.plaquettes(), lattice.vertices()}; }

int cell_parity(const SpinConfiguration& sigma, const Cell& cell) {
  int p = 1;
  for (std::size_t e : cell) p *= sigma[e];
  return p;
}

std::size_t site_count(const Lattice& lattice) {
  return std::visit([](const auto& l) { return l.size(); }, lattice);
}

std::string describe(const Lattice& lattice) {
  return std::visit([](const auto& l) { return l.descriptor(); }, lattice);
}

Lattice parse_lattice_descriptor(const std::string& text) {
  std::istringstream in(text);
  std::string kind, side_field, boundary;
  std::getline(in, kind, ':');
  std::getline(in, side_field, ':');
  std::getline(in, boundary, ':');
  if (side_field.rfind("L=", 0) != 0) throw ConfigError("malformed lattice descriptor '" + text + "'");
  std::size_t side = 0;
  try {
    side = std::stoul(side_field.substr(2));
  } catch (const std::exception&) {
    throw ConfigError("malformed lattice side in '" + text + "'");
  }
  if (kind == "square") {
    if (boundary == "open") return SquareLattice(side, Boundary::open);
    if (boundary == "periodic") return SquareLattice(side, Boundary::periodic);
    throw ConfigError("unknown boundary in '" + text + "'");
  }
  if (kind == "toric") return ToricLattice(side);
  throw ConfigError("unknown lattice kind in '" + text + "'");
}

}  // namespace nqs

namespace nqs {

FlipSet::FlipSet(std::initializer_list<std::size_t> sites) {
  for (std::size_t s : sites) push(s);
}

void FlipSet::push(std::size_t site) {
  NQS_EXPECT(count_ < kCapacity, "flip set capacity exceeded");
  for (std::size_t i = 0; i < count_; ++i) NQS_EXPECT(sites_[i] != site, "duplicate site in flip set");
  sites_[count_++] = site;
}

}  // namespace nqs
