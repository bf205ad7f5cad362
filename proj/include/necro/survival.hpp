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

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "necro/error.hpp"
#include "necro/quantify.hpp"
#include "necro/slide_store.hpp"

namespace necro {

struct SurvivalObservation {
  std::string case_id;
  double time = 0.0;  // months, > 0
  bool event = false;  // true = death / progression, false = censored
};

inline void validate_observations(const std::vector<SurvivalObservation>& obs) {
  for (const auto& o : obs) {
    if (!(o.time > 0.0) || !std::isfinite(o.time)) {
      throw ValidationError("survival time must be positive and finite (case '" + o.case_id + "')");
    }
  }
}

struct KMStep {
  double time = 0.0;
  int at_risk = 0;
  int events = 0;
  double survival = 1.0;
};

/// Product-limit estimate. Steps are at event times only.
struct KMCurve {
  int subjects = 0;
  std::vector<KMStep> steps;
  std::vector<double> censor_times;  // one entry per censored subject, ascending

  /// S(t) = prod over event times t_j <= t of (1 - d_j / n_j).
  double survival_at(double t) const {
    double s = 1.0;
    for (const auto& st : steps) {
      if (st.time > t) break;
      s = st.survival;
    }
    return s;
  }
};

/// Deaths tied at a time are processed together; subjects censored at an
/// event time are still at risk for that event.
inline KMCurve km_estimate(std::vector<SurvivalObservation> obs) {
  if (obs.empty()) throw ValidationError("km_estimate: no observations");
  validate_observations(obs);
  std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  KMCurve curve;
  curve.subjects = static_cast<int>(obs.size());
  int at_risk = curve.subjects;
  double s = 1.0;
  for (std::size_t i = 0; i < obs.size();) {
    const double t = obs[i].time;
    int d = 0;
    int c = 0;
    for (; i < obs.size() && obs[i].time == t; ++i) {
      if (obs[i].event) {
        ++d;
      } else {
        ++c;
        curve.censor_times.push_back(t);
      }
    }
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / at_risk;
      curve.steps.push_back({t, at_risk, d, s});
    }
    at_risk -= d + c;
  }
  return curve;
}

/// Upper tail of the chi-square distribution with one degree of freedom.
inline double chi_square1_upper(double statistic) { return std::erfc(std::sqrt(statistic / 2.0)); }

struct LogRankResult {
  double statistic = 0.0;
  double p = 1.0;
  double observed_a = 0.0;
  double expected_a = 0.0;
  double variance = 0.0;
};

/// Two-group log-rank test (hypergeometric variance).
inline LogRankResult logrank(std::vector<SurvivalObservation> a, std::vector<SurvivalObservation> b) {
  if (a.empty() || b.empty()) throw ValidationError("logrank: empty arm");
  validate_observations(a);
  validate_observations(b);
  auto by_time = [](const auto& x, const auto& y) { return x.time < y.time; };
  std::sort(a.begin(), a.end(), by_time);
  std::sort(b.begin(), b.end(), by_time);

  std::vector<double> event_times;
  for (const auto* arm : {&a, &b}) {
    for (const auto& o : *arm) {
      if (o.event) event_times.push_back(o.time);
    }
  }
  if (event_times.empty()) throw UntestableError("logrank: no events in either arm");
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

  LogRankResult r;
  std::size_t ia = 0, ib = 0;  // first index with time >= current event time
  for (double t : event_times) {
    while (ia < a.size() && a[ia].time < t) ++ia;
    while (ib < b.size() && b[ib].time < t) ++ib;
    const double na = static_cast<double>(a.size() - ia);
    const double nb = static_cast<double>(b.size() - ib);
    double da = 0, db = 0;
    for (std::size_t k = ia; k < a.size() && a[k].time == t; ++k) da += a[k].event ? 1 : 0;
    for (std::size_t k = ib; k < b.size() && b[k].time == t; ++k) db += b[k].event ? 1 : 0;
    const double n = na + nb;
    const double d = da + db;
    const double frac = na / n;
    r.observed_a += da;
    r.expected_a += d * frac;
    if (n > 1.0) r.variance += d * frac * (1.0 - frac) * (n - d) / (n - 1.0);
  }
  if (!(r.variance > 0.0)) throw UntestableError("logrank: zero variance");
  const double diff = r.observed_a - r.expected_a;
  r.statistic = diff * diff / r.variance;
  r.p = chi_square1_upper(r.statistic);
  return r;
}

// ---------------------------------------------------------------------------
// Stratification
// ---------------------------------------------------------------------------

enum class Endpoint { kOverallSurvival, kProgressionFree };
enum class RatioSource { kModel, kReport };

inline Endpoint endpoint_from_name(std::string_view s) {
  if (s == "os") return Endpoint::kOverallSurvival;
  if (s == "pfs") return Endpoint::kProgressionFree;
  throw ValidationError("unknown endpoint '" + std::string(s) + "' (expected os or pfs)");
}

constexpr std::string_view endpoint_name(Endpoint e) { return e == Endpoint::kOverallSurvival ? "os" : "pfs"; }

/// A case with its model-derived ratio (absent when flagged as no-tumor).
struct CohortEntry {
  CaseRecord record;
  std::optional<Ratio> r_dl;
};

struct StratificationResult {
  Endpoint endpoint = Endpoint::kOverallSurvival;
  RatioSource source = RatioSource::kModel;
  double cutoff = 0.0;
  std::vector<SurvivalObservation> responders;      // ratio >= cutoff
  std::vector<SurvivalObservation> non_responders;  // ratio < cutoff
  std::optional<KMCurve> km_responders;
  std::optional<KMCurve> km_non_responders;
  std::optional<LogRankResult> test;  // absent when unevaluable
  std::string unevaluable_reason;

  bool evaluable() const { return test.has_value(); }
};

/// Cases admitted for `endpoint` with the ratio used for arm assignment.
inline std::vector<std::pair<double, SurvivalObservation>> evaluable_cohort(const std::vector<CohortEntry>& cohort,
                                                                            Endpoint endpoint, RatioSource source) {
  const Stage stage = endpoint == Endpoint::kOverallSurvival ? Stage::kOverallSurvival : Stage::kProgressionFree;
  std::vector<std::pair<double, SurvivalObservation>> out;
  for (const auto& e : cohort) {
    if (!admitted(e.record, stage)) continue;
    if (!e.r_dl) continue;  // no-tumor cases are excluded from every analysis
    const double ratio = source == RatioSource::kModel ? e.r_dl->value() : *e.record.r_pr;
    SurvivalObservation o{e.record.id, 0.0, false};
    if (endpoint == Endpoint::kOverallSurvival) {
      o.time = *e.record.os_months;
      o.event = e.record.os_event;
    } else {
      o.time = *e.record.pfs_months;
      o.event = e.record.pfs_event;
    }
    if (!(o.time > 0.0)) continue;
    out.emplace_back(ratio, std::move(o));
  }
  return out;
}

inline StratificationResult stratify(const std::vector<CohortEntry>& cohort, Endpoint endpoint, double cutoff,
                                     RatioSource source = RatioSource::kModel) {
  StratificationResult res;
  res.endpoint = endpoint;
  res.source = source;
  res.cutoff = cutoff;
  for (auto& [ratio, obs] : evaluable_cohort(cohort, endpoint, source)) {
    (ratio >= cutoff ? res.responders : res.non_responders).push_back(std::move(obs));
  }
  if (!res.responders.empty()) res.km_responders = km_estimate(res.responders);
  if (!res.non_responders.empty()) res.km_non_responders = km_estimate(res.non_responders);
  if (res.responders.empty() || res.non_responders.empty()) {
    res.unevaluable_reason = "empty arm";
    return res;
  }
  try {
    res.test = logrank(res.responders, res.non_responders);
  } catch (const UntestableError& e) {
    res.unevaluable_reason = e.what();
  }
  return res;
}

inline const std::vector<double>& default_thresholds() {
  static const std::vector<double> t = {0.5, 0.6, 0.7, 0.8, 0.9};
  return t;
}

struct SweepRow {
  double cutoff = 0.0;
  std::size_t responders = 0;
  std::size_t non_responders = 0;
  std::optional<LogRankResult> test;
};

struct SweepResult {
  Endpoint endpoint = Endpoint::kOverallSurvival;
  std::vector<SweepRow> rows;  // in the order thresholds were given
  double argmin = 0.0;         // cutoff with the smallest p; ties go to the higher cutoff
};

inline SweepResult sweep(const std::vector<CohortEntry>& cohort, Endpoint endpoint, const std::vector<double>& thresholds,
                         RatioSource source = RatioSource::kModel) {
  if (thresholds.empty()) throw ValidationError("sweep: no thresholds");
  SweepResult out;
  out.endpoint = endpoint;
  std::optional<std::pair<double, double>> best;  // (p, cutoff)
  for (double c : thresholds) {
    StratificationResult s = stratify(cohort, endpoint, c, source);
    out.rows.push_back({c, s.responders.size(), s.non_responders.size(), s.test});
    if (!s.test) continue;
    if (!best || s.test->p < best->first || (s.test->p == best->first && c > best->second)) {
      best = std::make_pair(s.test->p, c);
    }
  }
  if (!best) throw UntestableError("sweep: every threshold is unevaluable");
  out.argmin = best->second;
  return out;
}

}  // namespace necro
