/*
 * Copyright 2026 The weaklab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "weaklab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace fs = std::filesystem;

namespace weaklab::harness {
namespace {

std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * x);
  return buf;
}

std::string cell_name(Method m, SegDur tr, SegDur te) {
  return std::string(to_string(m)) + " " + std::string(to_string(tr)) + "/" + std::string(to_string(te));
}

double seed_value(const ResultGrid& g, Method m, SegDur tr, SegDur te, std::uint64_t seed) {
  for (const auto& r : g.runs(m, tr, te)) {
    if (r.seed == seed) return r.macro_f;
  }
  throw Error("missing seed " + std::to_string(seed) + " for " + cell_name(m, tr, te));
}

template <typename F>
TrendCheck guarded(std::string name, F&& f) {
  TrendCheck c;
  c.name = std::move(name);
  try {
    f(c);
  } catch (const Error& e) {
    c.pass = false;
    c.detail = std::string("cannot evaluate: ") + e.what();
  }
  return c;
}

}  // namespace

bool grids_identical(const ResultGrid& a, const ResultGrid& b) {
  if (a.cells.size() != b.cells.size()) return false;
  for (const auto& [key, runs] : a.cells) {
    const auto it = b.cells.find(key);
    if (it == b.cells.end() || it->second.size() != runs.size()) return false;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (runs[i].macro_f != it->second[i].macro_f || runs[i].per_class_f != it->second[i].per_class_f) return false;
    }
  }
  return true;
}

std::vector<TrendCheck> trend_checks(const ResultGrid& v200, const ResultGrid& waa, const TrendThresholds& th) {
  using enum SegDur;
  std::vector<TrendCheck> out;
  const bool same = grids_identical(v200, waa);
  const std::string same_note = "the two variant grids are identical; variant contrast is meaningless";

  out.push_back(guarded("weak-label collapse (200ms variant, trained on 10s)", [&](TrendCheck& c) {
    std::ostringstream d;
    const auto& cls = v200.runs(Method::classifier, s10, s10);
    int seeds_ok = 0;
    for (const auto& run : cls) {
      bool ok = true;
      d << "seed " << run.seed << ":";
      for (SegDur te : kAllSegDurs) {
        const double c0 = seed_value(v200, Method::classifier, s10, te, run.seed);
        for (Method m : {Method::triplet, Method::prototypical}) {
          const double v = seed_value(v200, m, s10, te, run.seed);
          ok = ok && c0 - v >= th.collapse_gap;
          d << " " << to_string(te) << " cls " << pct(c0) << " vs " << to_string(m) << " " << pct(v) << ";";
        }
      }
      d << (ok ? " ok\n" : " short of the gap\n");
      seeds_ok += ok ? 1 : 0;
    }
    const int need = static_cast<int>(std::ceil(th.collapse_seed_fraction * static_cast<double>(cls.size()) - 1e-9));
    c.pass = seeds_ok >= need && !same;
    d << seeds_ok << " of " << cls.size() << " seeds keep a gap >= " << pct(th.collapse_gap) << " points (need " << need << ")";
    if (same) d << "; " << same_note;
    c.detail = d.str();
  }));

  out.push_back(guarded("classifier robustness (WAA, 10s/10s)", [&](TrendCheck& c) {
    const auto cls = waa.stats(Method::classifier, s10, s10);
    const auto tri = waa.stats(Method::triplet, s10, s10);
    c.pass = cls.mean - tri.mean >= th.robustness_gap && !same;
    c.detail = "classifier " + pct(cls.mean) + "+-" + pct(cls.std) + " vs triplet " + pct(tri.mean) + "+-" + pct(tri.std) +
               ", gap " + pct(cls.mean - tri.mean) + " (need >= " + pct(th.robustness_gap) + ")" + (same ? "; " + same_note : "");
  }));

  out.push_back(guarded("duration-mismatch degradation (200ms variant, trained on 200ms)", [&](TrendCheck& c) {
    std::ostringstream d;
    bool ok = true;
    for (Method m : v200.methods()) {
      const auto base = v200.stats(m, ms200, ms200);
      const auto far = v200.stats(m, ms200, s10);
      const bool m_ok = base.mean > 0.0 && far.mean <= (1.0 - th.mismatch_drop) * base.mean;
      ok = ok && m_ok;
      d << to_string(m) << ": 200ms->200ms " << pct(base.mean) << ", 200ms->10s " << pct(far.mean);
      if (base.mean > 0.0) d << " (drop " << pct(1.0 - far.mean / base.mean) << "%)";
      d << (m_ok ? " ok\n" : " insufficient drop\n");
    }
    c.pass = ok && v200.methods().size() == kAllMethods.size() && !same;
    if (same) d << same_note;
    c.detail = d.str();
  }));

  out.push_back(guarded("diagonal advantage (WAA classifier, 1s/1s best)", [&](TrendCheck& c) {
    std::ostringstream d;
    const auto diag = waa.stats(Method::classifier, s1, s1);
    bool ok = true;
    int cells = 0;
    for (SegDur tr : kAllSegDurs) {
      for (SegDur te : kAllSegDurs) {
        const auto s = waa.stats(Method::classifier, tr, te);
        ++cells;
        if (tr == s1 && te == s1) continue;
        // A cell above the diagonal by less than one standard deviation is a tie.
        const double tol = std::max(diag.std, s.std);
        const bool cell_ok = s.mean <= diag.mean + tol;
        ok = ok && cell_ok;
        d << to_string(tr) << "/" << to_string(te) << " " << pct(s.mean) << "+-" << pct(s.std) << (cell_ok ? "" : " (exceeds)")
          << "; ";
      }
    }
    c.pass = ok && cells == 9 && !same;
    c.detail = "1s/1s " + pct(diag.mean) + "+-" + pct(diag.std) + " vs " + d.str() + (same ? same_note : "");
  }));

  out.push_back(guarded("centroid metric validity (200ms variant, embeddings trained on 200ms)", [&](TrendCheck& c) {
    std::ostringstream d;
    const double need = th.centroid_chance_factor / kNumClasses;
    bool ok = true;
    int runs = 0;
    for (Method m : {Method::triplet, Method::prototypical}) {
      for (const auto& r : v200.runs(m, ms200, ms200)) {
        ++runs;
        ok = ok && r.centroid_accuracy >= need;
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s seed %llu: %.3f; ", std::string(to_string(m)).c_str(),
                      static_cast<unsigned long long>(r.seed), r.centroid_accuracy);
        d << buf;
      }
    }
    c.pass = ok && runs > 0;
    c.detail = d.str() + "need >= " + std::to_string(need).substr(0, 4);
  }));
  return out;
}

std::string format_report(const ResultGrid& ms200, const ResultGrid& waa, const std::vector<TrendCheck>& checks) {
  std::ostringstream os;
  os << format_table(ms200) << "\n" << format_table(waa) << "\n";
  os << "binarization threshold " << (ms200.cells.empty() ? 0.5 : ms200.cells.begin()->second.front().threshold)
     << ", macro-averaged F over 10 classes\n\n";
  for (const auto& c : checks) {
    os << (c.pass ? "PASS  " : "FAIL  ") << c.name << "\n";
    std::istringstream lines(c.detail);
    for (std::string line; std::getline(lines, line);) os << "      " << line << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Plot

std::string duration_density_svg(std::span<const synth::SceneSpec> specs) {
  constexpr int kW = 640, kH = 360, kL = 60, kR = 20, kT = 30, kB = 50;
  constexpr double kLo = -2.0, kHi = 1.2;  // log10 seconds
  constexpr int kPoints = 200;
  const auto& classes = synth::event_classes();
  std::array<std::vector<double>, 2> logs;
  for (const auto& s : specs) {
    const int fam = classes[static_cast<std::size_t>(s.class_id)].family == synth::Family::short_event ? 0 : 1;
    logs[fam].push_back(std::log10(std::max(s.event_duration_s, 1e-3)));
  }
  std::array<std::vector<double>, 2> dens;
  double peak = 1e-12;
  for (int f = 0; f < 2; ++f) {
    const auto& xs = logs[f];
    // Gaussian kernel density estimate with Silverman's bandwidth.
    double mean = 0.0, var = 0.0;
    for (double x : xs) mean += x;
    mean /= std::max<std::size_t>(1, xs.size());
    for (double x : xs) var += (x - mean) * (x - mean);
    const double sd = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1)) : 0.1;
    const double h = std::max(1e-3, 1.06 * sd * std::pow(static_cast<double>(std::max<std::size_t>(1, xs.size())), -0.2));
    for (int i = 0; i < kPoints; ++i) {
      const double u = kLo + (kHi - kLo) * i / (kPoints - 1);
      double d = 0.0;
      for (double x : xs) d += std::exp(-0.5 * (u - x) * (u - x) / (h * h));
      d = xs.empty() ? 0.0 : d / (xs.size() * h * std::sqrt(2.0 * std::numbers::pi));
      dens[f].push_back(d);
      peak = std::max(peak, d);
    }
  }
  auto px = [&](double u) { return kL + (u - kLo) / (kHi - kLo) * (kW - kL - kR); };
  auto py = [&](double d) { return kH - kB - d / peak * (kH - kT - kB); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  for (double t : {0.01, 0.1, 0.2, 1.0, 10.0}) {
    const double x = px(std::log10(t));
    os << "<line x1=\"" << x << "\" y1=\"" << kH - kB << "\" x2=\"" << x << "\" y2=\"" << kH - kB + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << kH - kB + 18 << "\" text-anchor=\"middle\">" << t << "</text>\n";
  }
  os << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">event duration (s, log scale)</text>\n";
  os << "<text x=\"15\" y=\"" << (kT + kH - kB) / 2 << "\" transform=\"rotate(-90 15 " << (kT + kH - kB) / 2
     << ")\" text-anchor=\"middle\">density</text>\n";
  const char* colors[2] = {"#d62728", "#1f77b4"};
  const char* names[2] = {"short-event classes", "long-event classes"};
  for (int f = 0; f < 2; ++f) {
    os << "<polyline fill=\"none\" stroke=\"" << colors[f] << "\" stroke-width=\"2\" points=\"";
    for (int i = 0; i < kPoints; ++i) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(kLo + (kHi - kLo) * i / (kPoints - 1)), py(dens[f][i]));
      os << buf;
    }
    os << "\"/>\n";
    os << "<text x=\"" << kW - kR - 150 << "\" y=\"" << kT + 15 + 18 * f << "\" fill=\"" << colors[f] << "\">" << names[f] << " (n="
       << logs[f].size() << ")</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_duration_density_svg(const fs::path& path, std::span<const synth::SceneSpec> specs) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << duration_density_svg(specs);
}

}  // namespace weaklab::harness
