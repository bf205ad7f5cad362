// Copyright 2026 The necro Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <limits>
#include <set>

#include "necro/survival.hpp"
#include "necro/synth_lab.hpp"
#include "support.hpp"

namespace necro {
namespace {

using Obs = SurvivalObservation;

std::vector<Obs> obs(std::initializer_list<std::pair<double, bool>> items) {
  std::vector<Obs> out;
  int i = 0;
  for (auto [t, e] : items) out.push_back({"s" + std::to_string(i++), t, e});
  return out;
}

// O(n^2) log-rank: scans every subject at every distinct event time.
struct OracleLogRank {
  double statistic;
  double p;
};

OracleLogRank oracle_logrank(const std::vector<Obs>& a, const std::vector<Obs>& b) {
  std::set<double> times;
  for (const auto& o : a) if (o.event) times.insert(o.time);
  for (const auto& o : b) if (o.event) times.insert(o.time);
  long double num = 0, var = 0;
  for (double t : times) {
    long double na = 0, nb = 0, da = 0, db = 0;
    for (const auto& o : a) {
      if (o.time >= t) ++na;
      if (o.time == t && o.event) ++da;
    }
    for (const auto& o : b) {
      if (o.time >= t) ++nb;
      if (o.time == t && o.event) ++db;
    }
    const long double n = na + nb, d = da + db;
    num += da - d * na / n;
    if (n > 1) var += d * (na / n) * (1 - na / n) * (n - d) / (n - 1);
  }
  const double stat = static_cast<double>(num * num / var);
  return {stat, std::erfc(std::sqrt(stat / 2))};
}

// Upper tail of chi-square(1) by integrating its density numerically.
double numeric_chi2_upper(double x) {
  // P(X > x) = 1 - P(|Z| <= sqrt(x)) = 1 - 2 * int_0^sqrt(x) phi(z) dz
  const double s = std::sqrt(x);
  const int n = 200000;
  const double h = s / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    const double z = i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * std::exp(-z * z / 2);
  }
  const double integral = acc * h / 3 / std::sqrt(2 * M_PI);
  return 1 - 2 * integral;
}

std::vector<Obs> random_arm(Rng& rng, int n, bool integer_times) {
  std::vector<Obs> out;
  for (int i = 0; i < n; ++i) {
    const double t = integer_times ? static_cast<double>(rng.between(1, 8)) : rng.uniform(0.1, 50.0);
    out.push_back({"r" + std::to_string(i), t, rng.uniform() < 0.7});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kaplan-Meier
// ---------------------------------------------------------------------------

TEST(KaplanMeier, HandFixtures) {
  auto c = km_estimate(obs({{1, true}, {2, false}, {3, true}}));
  EXPECT_NEAR(c.survival_at(1), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(c.survival_at(2.5), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(c.survival_at(3), 0.0, 1e-12);
  EXPECT_EQ(c.survival_at(0.5), 1.0);

  c = km_estimate(obs({{5, true}}));
  EXPECT_EQ(c.survival_at(5), 0.0);

  // Ties: a subject censored at an event time is still at risk for it.
  c = km_estimate(obs({{2, true}, {2, true}, {2, false}, {4, true}, {6, false}}));
  ASSERT_EQ(c.steps.size(), 2u);
  EXPECT_EQ(c.steps[0].at_risk, 5);
  EXPECT_EQ(c.steps[0].events, 2);
  EXPECT_NEAR(c.steps[0].survival, 3.0 / 5.0, 1e-12);
  EXPECT_EQ(c.steps[1].at_risk, 2);
  EXPECT_NEAR(c.steps[1].survival, 3.0 / 10.0, 1e-12);
  EXPECT_NEAR(c.survival_at(100), 3.0 / 10.0, 1e-12);
  EXPECT_EQ(c.censor_times, (std::vector<double>{2, 6}));

  c = km_estimate(obs({{1, false}, {2, true}, {2, true}, {3, true}}));
  EXPECT_NEAR(c.survival_at(2), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(c.survival_at(3), 0.0, 1e-12);

  c = km_estimate(obs({{3, false}, {1, false}, {4, false}}));
  EXPECT_TRUE(c.steps.empty());
  EXPECT_EQ(c.survival_at(10), 1.0);
}

TEST(KaplanMeier, Errors) {
  EXPECT_THROW(km_estimate({}), ValidationError);
  EXPECT_THROW(km_estimate(obs({{0, true}})), ValidationError);
  EXPECT_THROW(km_estimate(obs({{-1, false}})), ValidationError);
  EXPECT_THROW(km_estimate(obs({{std::numeric_limits<double>::infinity(), false}})), ValidationError);
}

TEST(KaplanMeier, NonIncreasingOnRandomCohorts) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    auto arm = random_arm(rng, rng.between(1, 40), trial % 2 == 0);
    auto c = km_estimate(arm);
    double prev = 1.0;
    int deaths = 0;
    for (const auto& s : c.steps) {
      EXPECT_LE(s.survival, prev);
      EXPECT_GE(s.survival, 0.0);
      prev = s.survival;
      deaths += s.events;
    }
    int expected_deaths = 0;
    for (const auto& o : arm) expected_deaths += o.event;
    EXPECT_EQ(deaths, expected_deaths);
  }
}

TEST(KaplanMeier, NoCensoringEndsAtSurvivorFraction) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto arm = random_arm(rng, rng.between(1, 30), true);
    for (auto& o : arm) o.event = true;
    auto c = km_estimate(arm);
    EXPECT_NEAR(c.steps.back().survival, 0.0, 1e-12);
  }
}

TEST(KaplanMeier, ScalingTimesKeepsSteps) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto arm = random_arm(rng, 20, true);
    auto scaled = arm;
    const double k = rng.uniform(0.1, 10);
    for (auto& o : scaled) o.time *= k;
    auto a = km_estimate(arm), b = km_estimate(scaled);
    ASSERT_EQ(a.steps.size(), b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].survival, b.steps[i].survival);
  }
}

// ---------------------------------------------------------------------------
// Log-rank
// ---------------------------------------------------------------------------

TEST(LogRank, ChiSquareTail) {
  EXPECT_NEAR(chi_square1_upper(3.841), 0.05, 1e-3);
  EXPECT_NEAR(chi_square1_upper(6.635), 0.01, 1e-4);
  EXPECT_EQ(chi_square1_upper(0.0), 1.0);
  for (double x : {0.1, 1.0, 2.5, 3.841, 7.0, 12.0}) EXPECT_NEAR(chi_square1_upper(x), numeric_chi2_upper(x), 1e-9);
}

TEST(LogRank, SmallExampleMatchesOracle) {
  auto a = obs({{1, true}, {2, true}});
  auto b = obs({{3, true}, {4, true}});
  auto r = logrank(a, b);
  auto o = oracle_logrank(a, b);
  EXPECT_NEAR(r.statistic, o.statistic, 1e-9);
  EXPECT_NEAR(r.p, o.p, 1e-9);
  // By hand: O_a = 2, E_a = 1/2 + 1/3, V = 1/4 + 2/9.
  EXPECT_NEAR(r.statistic, (7.0 / 6) * (7.0 / 6) / (1.0 / 4 + 2.0 / 9), 1e-12);
}

TEST(LogRank, MatchesOracleOnRandomCohorts) {
  Rng rng(4);
  int tested = 0;
  for (int trial = 0; tested < 300; ++trial) {
    auto a = random_arm(rng, rng.between(1, 10), trial % 2 == 0);
    auto b = random_arm(rng, rng.between(1, 10), trial % 2 == 0);
    try {
      auto r = logrank(a, b);
      auto o = oracle_logrank(a, b);
      ASSERT_NEAR(r.statistic, o.statistic, 1e-9);
      ASSERT_NEAR(r.p, o.p, 1e-9);
      ASSERT_GT(r.p, 0.0);
      ASSERT_LE(r.p, 1.0);
      ++tested;
    } catch (const UntestableError&) {
    }
  }
}

TEST(LogRank, IdenticalArmsGivePOne) {
  Rng rng(5);
  int tested = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_arm(rng, rng.between(2, 10), true);
    a[0].event = true;
    LogRankResult r;
    try {
      r = logrank(a, a);
    } catch (const UntestableError&) {
      continue;  // every subject at risk died at the same time
    }
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_EQ(r.p, 1.0);
    ++tested;
  }
  EXPECT_GT(tested, 25);
}

TEST(LogRank, SymmetricScaleInvariantAndIgnoresEarlyCensoring) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = random_arm(rng, rng.between(2, 10), trial % 2 == 0);
    auto b = random_arm(rng, rng.between(2, 10), trial % 2 == 0);
    LogRankResult r;
    try {
      r = logrank(a, b);
    } catch (const UntestableError&) {
      continue;
    }
    const auto swapped = logrank(b, a);
    EXPECT_NEAR(swapped.statistic, r.statistic, 1e-9);
    EXPECT_NEAR(swapped.p, r.p, 1e-9);

    auto as = a, bs = b;
    for (auto& o : as) o.time *= 3.5;
    for (auto& o : bs) o.time *= 3.5;
    EXPECT_NEAR(logrank(as, bs).statistic, r.statistic, 1e-9);

    // Censored before the first event: never in a risk set.
    double first = std::numeric_limits<double>::infinity();
    for (const auto& o : a) first = std::min(first, o.time);
    for (const auto& o : b) first = std::min(first, o.time);
    auto a2 = a;
    a2.push_back({"early", first / 2, false});
    EXPECT_NEAR(logrank(a2, b).statistic, r.statistic, 1e-9);
    auto b2 = b;
    b2.push_back({"early", first / 2, false});
    EXPECT_NEAR(logrank(a, b2).statistic, r.statistic, 1e-9);
  }
}

TEST(LogRank, DegenerateInputs) {
  EXPECT_THROW(logrank({}, obs({{1, true}})), ValidationError);
  EXPECT_THROW(logrank(obs({{1, false}}), obs({{2, false}})), UntestableError);
  // One subject per arm dying at the same time: n - d = 0, zero variance.
  EXPECT_THROW(logrank(obs({{1, true}}), obs({{1, true}})), UntestableError);
}

// ---------------------------------------------------------------------------
// Stratification and sweep
// ---------------------------------------------------------------------------

CohortEntry entry(const std::string& id, double r, double os, bool os_event, std::optional<bool> metastatic = false) {
  CohortEntry e;
  e.record.id = id;
  e.record.slide_ids = {id};
  e.record.r_pr = r;
  e.record.os_months = os;
  e.record.os_event = os_event;
  e.record.pfs_months = os / 2;
  e.record.pfs_event = true;
  e.record.metastasis_at_diagnosis = metastatic;
  e.r_dl = Ratio{static_cast<std::uint64_t>(std::lround(r * 1000)), 1000};
  return e;
}

std::vector<CohortEntry> toy_cohort() {
  return {entry("a", 0.95, 60, false), entry("b", 0.92, 50, true), entry("c", 0.85, 40, true, std::nullopt),
          entry("d", 0.60, 10, true, true), entry("e", 0.40, 8, true), entry("f", 0.30, 5, true),
          entry("g", 0.75, 30, false)};
}

TEST(Stratify, ArmsPartitionTheEvaluableCohort) {
  auto cohort = toy_cohort();
  auto s = stratify(cohort, Endpoint::kOverallSurvival, 0.9);
  EXPECT_EQ(s.responders.size(), 2u);
  EXPECT_EQ(s.non_responders.size(), 5u);
  ASSERT_TRUE(s.evaluable());
  EXPECT_GT(s.test->p, 0.0);
  EXPECT_LE(s.test->p, 1.0);
  // PFS drops the metastatic and unknown-status cases.
  auto p = stratify(cohort, Endpoint::kProgressionFree, 0.9);
  EXPECT_EQ(p.responders.size() + p.non_responders.size(), 5u);
}

TEST(Stratify, CutoffIsInclusive) {
  auto cohort = toy_cohort();
  auto s = stratify(cohort, Endpoint::kOverallSurvival, 0.92);
  EXPECT_EQ(s.responders.size(), 2u);
}

TEST(Stratify, EmptyArmIsUnevaluable) {
  auto s = stratify(toy_cohort(), Endpoint::kOverallSurvival, 0.0);
  EXPECT_FALSE(s.evaluable());
  EXPECT_TRUE(s.non_responders.empty());
  EXPECT_FALSE(s.unevaluable_reason.empty());
}

TEST(Stratify, ExcludesNoTumorAndMissingData) {
  auto cohort = toy_cohort();
  cohort[0].r_dl.reset();
  cohort[1].record.os_months.reset();
  cohort[2].record.split = Split::kTrain;
  auto s = stratify(cohort, Endpoint::kOverallSurvival, 0.5);
  EXPECT_EQ(s.responders.size() + s.non_responders.size(), 4u);
}

TEST(Stratify, ByReportedRatio) {
  auto cohort = toy_cohort();
  cohort[4].record.r_pr = 0.99;
  auto s = stratify(cohort, Endpoint::kOverallSurvival, 0.9, RatioSource::kReport);
  EXPECT_EQ(s.responders.size(), 3u);
}

TEST(Stratify, ArmsOnlyChangeWhenARatioLiesBetweenCutoffs) {
  Rng rng(9);
  std::vector<CohortEntry> cohort;
  for (int i = 0; i < 40; ++i) cohort.push_back(entry("x" + std::to_string(i), rng.uniform(), rng.uniform(1, 50), true));
  for (int trial = 0; trial < 200; ++trial) {
    const double c1 = rng.uniform(), c2 = rng.uniform();
    bool between = false;
    for (const auto& e : cohort) {
      const double r = e.r_dl->value();
      between |= r >= std::min(c1, c2) && r < std::max(c1, c2);
    }
    if (between) continue;
    auto a = stratify(cohort, Endpoint::kOverallSurvival, c1);
    auto b = stratify(cohort, Endpoint::kOverallSurvival, c2);
    ASSERT_EQ(a.responders.size(), b.responders.size());
    for (std::size_t i = 0; i < a.responders.size(); ++i) EXPECT_EQ(a.responders[i].case_id, b.responders[i].case_id);
  }
}

TEST(Sweep, SingleEvaluableThresholdIsArgmin) {
  auto sw = sweep(toy_cohort(), Endpoint::kOverallSurvival, {0.0, 0.9, 0.99});
  EXPECT_EQ(sw.argmin, 0.9);
  EXPECT_FALSE(sw.rows[0].test.has_value());
  EXPECT_TRUE(sw.rows[1].test.has_value());
}

TEST(Sweep, TiesGoToTheHigherCutoff) {
  // No ratio lies in [0.61, 0.7), so both cutoffs give identical arms.
  auto sw = sweep(toy_cohort(), Endpoint::kOverallSurvival, {0.61, 0.7});
  EXPECT_EQ(sw.rows[0].test->p, sw.rows[1].test->p);
  EXPECT_EQ(sw.argmin, 0.7);
}

TEST(Sweep, AllUnevaluableIsAnError) {
  EXPECT_THROW(sweep(toy_cohort(), Endpoint::kOverallSurvival, {0.0, 0.99}), UntestableError);
  EXPECT_THROW(sweep(toy_cohort(), Endpoint::kOverallSurvival, {}), ValidationError);
}

TEST(Sweep, RecoversPlantedCutoffOnStrongSeparation) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CohortSpec spec;
    spec.seed = seed;
    spec.cases = 120;
    spec.width = spec.height = 16;
    spec.granularity = 8;
    spec.ratio_min = 0.45;
    spec.ratio_max = 0.95;
    spec.responder_hazard = 0.002;
    spec.nonresponder_hazard = 0.08;
    auto c = generate_cohort(spec);
    std::vector<CohortEntry> cohort;
    for (const auto& rec : c.dataset.cases) cohort.push_back({rec, c.true_ratio.at(rec.id)});
    auto sw = sweep(cohort, Endpoint::kOverallSurvival, default_thresholds());
    EXPECT_EQ(sw.argmin, 0.8) << "seed " << seed;
  }
}

}  // namespace
}  // namespace necro
