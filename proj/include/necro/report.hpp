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

/// @file report.hpp
/// @brief File outputs: per-case CSV, grade tables, scatter and Kaplan-Meier
/// plots (SVG), sweep tables. Ratios are printed with 4 decimals and p-values
/// in scientific notation with 2 significant digits.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "necro/error.hpp"
#include "necro/quantify.hpp"
#include "necro/survival.hpp"

namespace necro {

inline std::string format_fixed(double v, int decimals) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string format_ratio(double r) { return format_fixed(r, 4); }

inline std::string format_p(double p) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1e", p);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

inline std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Quantification
// ---------------------------------------------------------------------------

inline void write_cases_csv(const fs::path& path, const std::vector<CaseQuantification>& cases) {
  auto out = detail::open_out(path);
  out << "case_id,p_VT,p_NT,r_DL,grade,r_PR,abs_diff,flags\n";
  for (const auto& q : cases) {
    out << q.case_id << ',' << q.counts.viable() << ',' << q.counts.necrotic() << ','
        << (q.r_dl ? format_ratio(q.r_dl->value()) : "") << ',' << (q.grade ? grade_name(*q.grade) : "") << ','
        << (q.r_pr ? format_ratio(*q.r_pr) : "") << ',' << (q.abs_diff ? format_ratio(*q.abs_diff) : "") << ','
        << detail::join(q.flags, ';') << '\n';
  }
}

inline void write_report_csv(const fs::path& path, const ComparisonReport& rep) {
  auto out = detail::open_out(path);
  out << "grade,range,mean,median,std,count\n";
  for (const auto& r : rep.rows) {
    out << r.label << ',' << r.range << ',' << format_fixed(r.mean, 1) << ',' << format_fixed(r.median, 1) << ','
        << format_fixed(r.stddev, 1) << ',' << r.count << '\n';
  }
}

inline nlohmann::json report_json(const ComparisonReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"grade", r.label},
                    {"range", r.range},
                    {"mean", detail::number_or_null(r.mean)},
                    {"median", detail::number_or_null(r.median)},
                    {"std", detail::number_or_null(r.stddev)},
                    {"count", r.count}});
  }
  return {{"metric", "absolute difference |r_PR - r_DL|"},
          {"units", "percentage points"},
          {"std_kind", "population"},
          {"grouping", "grade of r_PR"},
          {"rows", rows}};
}

inline void write_report_json(const fs::path& path, const ComparisonReport& rep) {
  detail::open_out(path) << report_json(rep).dump(2) << '\n';
}

inline void write_scatter_csv(const fs::path& path, const ComparisonReport& rep) {
  auto out = detail::open_out(path);
  out << "case_id,r_PR,r_DL,grade\n";
  for (const auto& p : rep.scatter) {
    out << p.case_id << ',' << format_ratio(p.r_pr) << ',' << format_ratio(p.r_dl) << ',' << grade_name(p.grade) << '\n';
  }
}

// Grade IV red, III green, II orange, I blue.
inline const char* grade_color(NecrosisGrade g) {
  switch (g) {
    case NecrosisGrade::kIV: return "#e41a1c";
    case NecrosisGrade::kIII: return "#2ca02c";
    case NecrosisGrade::kII: return "#ff7f0e";
    case NecrosisGrade::kI: return "#1f77b4";
  }
  return "#000000";
}

inline void write_scatter_svg(const fs::path& path, const ComparisonReport& rep) {
  constexpr double kSize = 400, kPad = 50;
  auto out = detail::open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + 2 * kPad << "\" height=\"" << kSize + 2 * kPad
      << "\">\n";
  out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kPad << "\" y1=\"" << kPad + kSize << "\" x2=\"" << kPad + kSize << "\" y2=\"" << kPad
      << "\" stroke=\"#999\" stroke-dasharray=\"4\"/>\n";
  for (int i = 0; i <= 10; i += 2) {
    const double v = i / 10.0;
    out << "<text x=\"" << kPad + v * kSize << "\" y=\"" << kPad + kSize + 16 << "\" font-size=\"10\" text-anchor=\"middle\">"
        << i * 10 << "%</text>\n";
    out << "<text x=\"" << kPad - 6 << "\" y=\"" << kPad + (1 - v) * kSize + 3
        << "\" font-size=\"10\" text-anchor=\"end\">" << i * 10 << "%</text>\n";
  }
  out << "<text x=\"" << kPad + kSize / 2 << "\" y=\"" << kPad + kSize + 36
      << "\" font-size=\"12\" text-anchor=\"middle\">r_PR (pathology report)</text>\n";
  out << "<text x=\"14\" y=\"" << kPad + kSize / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << kPad + kSize / 2 << ")\">r_DL (model)</text>\n";
  for (const auto& p : rep.scatter) {
    out << "<circle cx=\"" << format_fixed(kPad + p.r_pr * kSize, 2) << "\" cy=\""
        << format_fixed(kPad + (1 - p.r_dl) * kSize, 2) << "\" r=\"4\" fill=\"" << grade_color(p.grade)
        << "\"><title>" << p.case_id << "</title></circle>\n";
  }
  out << "</svg>\n";
}

inline void write_miou_csv(const fs::path& path, const std::vector<std::pair<std::string, double>>& rows) {
  auto out = detail::open_out(path);
  out << "slide_id,mean_iou\n";
  for (const auto& [id, v] : rows) out << id << ',' << format_ratio(v) << '\n';
}

// ---------------------------------------------------------------------------
// Survival
// ---------------------------------------------------------------------------

inline void write_km_csv(const fs::path& path, const StratificationResult& s) {
  auto out = detail::open_out(path);
  out << "arm,time,n_risk,d,S\n";
  auto dump = [&](const char* arm, const std::optional<KMCurve>& km) {
    if (!km) return;
    for (const auto& st : km->steps) {
      out << arm << ',' << format_fixed(st.time, 4) << ',' << st.at_risk << ',' << st.events << ','
          << format_fixed(st.survival, 6) << '\n';
    }
  };
  dump("responder", s.km_responders);
  dump("non_responder", s.km_non_responders);
}

inline nlohmann::json stratification_json(const StratificationResult& s) {
  nlohmann::json j = {{"endpoint", endpoint_name(s.endpoint)},
                      {"ratio_source", s.source == RatioSource::kModel ? "r_DL" : "r_PR"},
                      {"cutoff", s.cutoff},
                      {"responders", s.responders.size()},
                      {"non_responders", s.non_responders.size()},
                      {"evaluable", s.evaluable()}};
  if (s.test) {
    j["statistic"] = s.test->statistic;
    j["p"] = s.test->p;
    j["p_display"] = format_p(s.test->p);
  } else {
    j["reason"] = s.unevaluable_reason;
  }
  return j;
}

inline void write_km_svg(const fs::path& path, const StratificationResult& s) {
  constexpr double kW = 500, kH = 320, kPad = 50;
  double tmax = 1.0;
  for (const auto* km : {&s.km_responders, &s.km_non_responders}) {
    if (!*km) continue;
    for (const auto& st : (*km)->steps) tmax = std::max(tmax, st.time);
    for (double t : (*km)->censor_times) tmax = std::max(tmax, t);
  }
  auto X = [&](double t) { return kPad + t / tmax * kW; };
  auto Y = [&](double v) { return kPad + (1.0 - v) * kH; };
  auto out = detail::open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW + 2 * kPad << "\" height=\"" << kH + 2 * kPad << "\">\n";
  out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW << "\" height=\"" << kH
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  auto curve = [&](const std::optional<KMCurve>& km, const char* color, const char* label, int row) {
    if (!km) return;
    std::ostringstream d;
    d << "M " << X(0) << ' ' << Y(1.0);
    for (const auto& st : km->steps) {
      d << " H " << format_fixed(X(st.time), 2) << " V " << format_fixed(Y(st.survival), 2);
    }
    double last = km->censor_times.empty() ? 0.0 : km->censor_times.back();
    if (!km->steps.empty()) last = std::max(last, km->steps.back().time);
    d << " H " << format_fixed(X(last), 2);
    out << "<path d=\"" << d.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    for (double t : km->censor_times) {
      const double y = Y(km->survival_at(t));
      out << "<line x1=\"" << format_fixed(X(t), 2) << "\" y1=\"" << format_fixed(y - 5, 2) << "\" x2=\""
          << format_fixed(X(t), 2) << "\" y2=\"" << format_fixed(y + 5, 2) << "\" stroke=\"" << color << "\"/>\n";
    }
    out << "<text x=\"" << kPad + 10 << "\" y=\"" << kPad + kH - 10 - 16 * row << "\" font-size=\"12\" fill=\"" << color
        << "\">" << label << " (n=" << km->subjects << ")</text>\n";
  };
  curve(s.km_responders, "#1f77b4", "ratio >= cutoff", 1);
  curve(s.km_non_responders, "#d62728", "ratio < cutoff", 0);
  out << "<text x=\"" << kPad + kW / 2 << "\" y=\"" << kPad - 15 << "\" font-size=\"13\" text-anchor=\"middle\">"
      << (s.endpoint == Endpoint::kOverallSurvival ? "Overall survival" : "Progression-free survival") << ", cutoff "
      << format_fixed(100 * s.cutoff, 0) << "%"
      << (s.test ? ", log-rank p = " + format_p(s.test->p) : std::string(", unevaluable")) << "</text>\n";
  out << "<text x=\"" << kPad + kW / 2 << "\" y=\"" << kPad + kH + 35
      << "\" font-size=\"12\" text-anchor=\"middle\">months</text>\n";
  out << "</svg>\n";
}

/// Rows are cutoffs (descending), columns endpoints.
inline void write_sweep_csv(const fs::path& path, const std::vector<SweepResult>& sweeps) {
  std::map<double, std::vector<const SweepRow*>, std::greater<>> rows;
  for (std::size_t e = 0; e < sweeps.size(); ++e) {
    for (const auto& r : sweeps[e].rows) {
      auto& v = rows[r.cutoff];
      v.resize(sweeps.size(), nullptr);
      v[e] = &r;
    }
  }
  auto out = detail::open_out(path);
  out << "cutoff";
  for (const auto& s : sweeps) {
    const auto n = endpoint_name(s.endpoint);
    out << ',' << n << "_statistic," << n << "_p," << n << "_argmin";
  }
  out << '\n';
  for (const auto& [cutoff, cells] : rows) {
    out << format_fixed(cutoff, 2);
    for (std::size_t e = 0; e < sweeps.size(); ++e) {
      const SweepRow* r = cells[e];
      if (r == nullptr || !r->test) {
        out << ",NA,NA,";
      } else {
        out << ',' << format_fixed(r->test->statistic, 4) << ',' << format_p(r->test->p) << ',';
      }
      out << (r != nullptr && sweeps[e].argmin == cutoff ? "*" : "");
    }
    out << '\n';
  }
}

inline nlohmann::json sweep_json(const std::vector<SweepResult>& sweeps) {
  nlohmann::json endpoints = nlohmann::json::object();
  for (const auto& s : sweeps) {
    nlohmann::json rows = nlohmann::json::array();
    std::vector<const SweepRow*> sorted;
    for (const auto& r : s.rows) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->cutoff > b->cutoff; });
    for (const SweepRow* r : sorted) {
      nlohmann::json row = {{"cutoff", r->cutoff},
                            {"responders", r->responders},
                            {"non_responders", r->non_responders},
                            {"evaluable", r->test.has_value()}};
      if (r->test) {
        row["statistic"] = r->test->statistic;
        row["p"] = r->test->p;
        row["p_display"] = format_p(r->test->p);
      }
      rows.push_back(row);
    }
    endpoints[std::string(endpoint_name(s.endpoint))] = {{"rows", rows}, {"argmin", s.argmin}};
  }
  return {{"endpoints", endpoints},
          {"test", "log-rank, chi-square 1 df"},
          {"exploratory", true},
          {"multiple_testing_correction", "none"}};
}

inline void write_sweep_json(const fs::path& path, const std::vector<SweepResult>& sweeps) {
  detail::open_out(path) << sweep_json(sweeps).dump(2) << '\n';
}

}  // namespace necro
