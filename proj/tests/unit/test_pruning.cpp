// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "nqs/error.hpp"
#include "nqs/pruning.hpp"

namespace nqs {
namespace {

TEST(PruneCount, RoundsHalfUpWithFloorOfOne) {
  EXPECT_EQ(prune_count(100, 0.12), 12u);
  EXPECT_EQ(prune_count(25, 0.1), 3u);
  EXPECT_EQ(prune_count(24, 0.1), 2u);
  EXPECT_EQ(prune_count(4, 0.12), 1u);
  EXPECT_EQ(prune_count(2048, 0.12), 246u);
  EXPECT_EQ(prune_count(36, 0.05), 2u);
}

TEST(Schedule, DefaultsAndValidation) {
  EXPECT_EQ(PruneSchedule::default_ratio(ArchitectureSpec::feed_forward(SquareLattice(4), 1.0)), 0.12);
  EXPECT_EQ(PruneSchedule::default_ratio(ArchitectureSpec::shallow_cnn(SquareLattice(4), 1)), 0.05);
  PruneSchedule s;
  s.ratio = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s.ratio = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Select, MagnitudeTakesSmallestWithLowIndexTies) {
  const std::vector<double> theta{0.5, -0.1, 0.3, 0.1, -2.0, 0.0, 0.1, 0.7};
  std::vector<std::uint8_t> bits(8, 1);
  bits[5] = 0;
  RngStream rng(1);
  // 0.3 * 7 = 2.1 -> 2; |0.1| ties at indices 1, 3, 6.
  const auto set = select_prune_set(theta, Mask(bits), 0.3, PruneStrategy::magnitude, rng);
  ASSERT_TRUE(set.has_value());
  EXPECT_EQ(*set, (std::vector<std::size_t>{1, 3}));
}

TEST(Select, RandomIsUniformOverUnmasked) {
  std::vector<std::uint8_t> bits(20, 1);
  for (std::size_t i = 0; i < 20; i += 2) bits[i] = 0;
  const Mask mask(bits);
  const std::vector<double> theta(20, 1.0);
  std::vector<int> hits(20, 0);
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    RngStream rng(seed);
    const auto set = select_prune_set(theta, mask, 0.2, PruneStrategy::random, rng);
    ASSERT_TRUE(set.has_value());
    ASSERT_EQ(set->size(), 2u);
    EXPECT_TRUE(std::is_sorted(set->begin(), set->end()));
    EXPECT_NE((*set)[0], (*set)[1]);
    for (std::size_t i : *set) {
      EXPECT_TRUE(mask.test(i));
      ++hits[i];
    }
  }
  for (std::size_t i = 1; i < 20; i += 2) EXPECT_NEAR(hits[i] / 2000.0, 0.2, 0.04);
  RngStream a(9), b(9);
  EXPECT_EQ(select_prune_set(theta, mask, 0.5, PruneStrategy::random, a),
            select_prune_set(theta, mask, 0.5, PruneStrategy::random, b));
}

TEST(Select, ExhaustionReturnsNothing) {
  const std::vector<double> theta{1.0, 2.0};
  std::vector<std::uint8_t> bits{0, 1};
  RngStream rng(1);
  EXPECT_FALSE(select_prune_set(theta, Mask(bits), 0.1, PruneStrategy::magnitude, rng).has_value());
}

struct Small {
  ArchitectureSpec arch = ArchitectureSpec::feed_forward(SquareLattice(2), 2.0);
  HamiltonianSpec spec = HamiltonianSpec::tfim(SquareLattice(2), 1.0);
  SamplerConfig sampler;
  SRConfig sr;
  PruneSchedule schedule;
  PruningOptions options;

  Small() {
    sampler.n_samples = 64;
    sampler.n_chains = 4;
    sr.eta = 0.02;
    schedule.ratio = 0.2;
    schedule.iterations = 6;
    schedule.pretrain_steps = 20;
    schedule.train_steps = 5;
    options.tail_steps = 3;
    options.measure_samples = 64;
    options.reference_energy = -5.0;
  }
};

TEST(IterativePruning, NestedMasksAndScheduledDensity) {
  for (auto strategy : {PruneStrategy::magnitude, PruneStrategy::random}) {
    for (auto reset : {ResetMode::rewind, ResetMode::continue_training}) {
      Small s;
      s.schedule.strategy = strategy;
      s.schedule.reset = reset;
      const auto traj = run_iterative_pruning(s.arch, s.spec, s.schedule, s.sampler, s.sr, 7, s.options);
      ASSERT_EQ(traj.iterations.size(), 6u);
      EXPECT_FALSE(traj.exhausted);
      EXPECT_EQ(traj.pretrained.n, 32u);
      EXPECT_EQ(traj.pretrained.iteration, 0u);
      Mask previous = Mask::full(32);
      for (std::size_t i = 0; i < traj.iterations.size(); ++i) {
        const auto& it = traj.iterations[i];
        EXPECT_TRUE(it.mask.is_subset_of(previous));
        EXPECT_EQ(it.mask.ones(), previous.ones() - prune_count(previous.ones(), 0.2));
        EXPECT_EQ(it.metrics.iteration, i + 1);
        EXPECT_EQ(it.metrics.n, it.mask.ones());
        EXPECT_DOUBLE_EQ(it.metrics.rho, it.mask.ones() / 4.0);
        EXPECT_TRUE(it.metrics.fidelity.has_value());
        EXPECT_TRUE(std::isfinite(it.metrics.rel_err));
        for (std::size_t k = 0; k < 32; ++k)
          if (!it.mask.test(k)) EXPECT_EQ(it.theta[k], 0.0);
        previous = it.mask;
      }
    }
  }
}

TEST(IterativePruning, RewindRestartsFromPretrainedWeights) {
  // With a zero learning rate, training is the identity and each iteration's
  // parameters expose the reset rule directly.
  Small s;
  s.sr.eta = 0.0;
  s.schedule.iterations = 3;
  s.schedule.reset = ResetMode::rewind;
  const auto traj = run_iterative_pruning(s.arch, s.spec, s.schedule, s.sampler, s.sr, 3, s.options);
  EXPECT_EQ(traj.theta_rewind, traj.theta_init);
  for (const auto& it : traj.iterations)
    for (std::size_t k = 0; k < 32; ++k) EXPECT_EQ(it.theta[k], it.mask.test(k) ? traj.theta_rewind[k] : 0.0);
}

TEST(IterativePruning, ExhaustsGracefully) {
  Small s;
  s.schedule.ratio = 0.5;
  s.schedule.iterations = 40;
  s.schedule.pretrain_steps = 2;
  s.schedule.train_steps = 2;
  const auto traj = run_iterative_pruning(s.arch, s.spec, s.schedule, s.sampler, s.sr, 3, s.options);
  EXPECT_TRUE(traj.exhausted);
  ASSERT_FALSE(traj.iterations.empty());
  EXPECT_LT(traj.iterations.size(), 40u);
  EXPECT_GE(traj.iterations.back().mask.ones(), 1u);
}

TEST(IterativePruning, DeterministicAndResumable) {
  Small s;
  const auto full = run_iterative_pruning(s.arch, s.spec, s.schedule, s.sampler, s.sr, 11, s.options);
  auto partial = full;
  partial.iterations.resize(2);
  const auto resumed = resume_iterative_pruning(partial, s.arch, s.spec, s.schedule, s.sampler, s.sr, 11, s.options);
  ASSERT_EQ(resumed.iterations.size(), full.iterations.size());
  for (std::size_t i = 0; i < full.iterations.size(); ++i) {
    EXPECT_EQ(resumed.iterations[i].mask, full.iterations[i].mask);
    EXPECT_EQ(resumed.iterations[i].theta, full.iterations[i].theta);
    EXPECT_EQ(resumed.iterations[i].metrics.energy, full.iterations[i].metrics.energy);
  }
  const auto other = run_iterative_pruning(s.arch, s.spec, s.schedule, s.sampler, s.sr, 12, s.options);
  EXPECT_NE(other.theta_init, full.theta_init);
}

TEST(Tickets, Variants) {
  Small s;
  const auto traj = run_iterative_pruning(s.arch, s.spec, s.schedule, s.sampler, s.sr, 5, s.options);
  const auto& it = traj.iterations[3];
  const auto imp = make_ticket(TicketVariant::theta_init_m_imp, s.arch, traj, 4, 1);
  EXPECT_EQ(imp.mask(), it.mask);
  for (std::size_t k = 0; k < 32; ++k) EXPECT_EQ(imp.parameters()[k], it.mask.test(k) ? traj.theta_init[k] : 0.0);

  const auto rewound = make_ticket(TicketVariant::theta_init_m_imp, s.arch, traj, 4, 1, true);
  for (std::size_t k = 0; k < 32; ++k)
    EXPECT_EQ(rewound.parameters()[k], it.mask.test(k) ? traj.theta_rewind[k] : 0.0);

  const auto rand_theta = make_ticket(TicketVariant::theta_rand_m_imp, s.arch, traj, 4, 1);
  EXPECT_EQ(rand_theta.mask(), it.mask);
  EXPECT_FALSE(std::equal(rand_theta.parameters().begin(), rand_theta.parameters().end(), imp.parameters().begin()));

  const auto rand_mask = make_ticket(TicketVariant::theta_init_m_rand, s.arch, traj, 4, 1);
  EXPECT_EQ(rand_mask.mask().ones(), it.mask.ones());
  EXPECT_NE(rand_mask.mask(), it.mask);
  EXPECT_EQ(make_ticket(TicketVariant::theta_init_m_rand, s.arch, traj, 4, 1).mask(), rand_mask.mask());

  EXPECT_THROW(make_ticket(TicketVariant::theta_init_m_imp, s.arch, traj, 0, 1), ContractViolation);
  EXPECT_THROW(make_ticket(TicketVariant::theta_init_m_imp, s.arch, traj, 7, 1), ContractViolation);

  const TicketResult trained = train_ticket(rand_mask, s.spec, s.sampler, s.sr, 10, s.options);
  EXPECT_EQ(trained.ansatz.mask(), rand_mask.mask());
  EXPECT_EQ(trained.trace.size(), 10u);
  EXPECT_EQ(trained.metrics.n, rand_mask.mask().ones());
}

TEST(Tickets, VariantNames) {
  for (auto v : {TicketVariant::theta_init_m_imp, TicketVariant::theta_rand_m_imp, TicketVariant::theta_init_m_rand})
    EXPECT_EQ(parse_ticket_variant(to_string(v)), v);
  EXPECT_EQ(parse_ticket_variant("theta-rand-m-imp"), TicketVariant::theta_rand_m_imp);
  EXPECT_THROW(parse_ticket_variant("winning"), ConfigError);
}

}  // namespace
}  // namespace nqs
