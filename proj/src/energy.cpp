// Copyright 2026 The plantmon Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "plantmon/energy.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>

#include "plantmon/svg.hpp"

namespace plantmon::energy {

using nlohmann::json;

std::string_view to_string(Phase p) {
  return p == Phase::training ? "training" : "inference";
}

double RunMeasurement::effective_sigma_p() const {
  return power_floor_w ? apply_power_floor(sigma_p, *power_floor_w) : sigma_p;
}

void validate(const RunMeasurement& m) {
  const std::string who = "measurement '" + m.label + "': ";
  if (!(m.mu_p > 0) || !std::isfinite(m.mu_p)) throw ConfigError(who + "mu_p must be > 0");
  if (!(m.mu_t > 0) || !std::isfinite(m.mu_t)) throw ConfigError(who + "mu_t must be > 0");
  if (!(m.sigma_p >= 0) || !(m.sigma_t >= 0)) throw ConfigError(who + "sigmas must be >= 0");
  if (m.power_floor_w && !(*m.power_floor_w >= 0)) {
    throw ConfigError(who + "power floor must be >= 0");
  }
}

double apply_power_floor(double measured_sd, double floor) {
  if (!(measured_sd >= 0)) throw ConfigError("measured power sd must be >= 0");
  return std::max(measured_sd, floor);
}

EnergyEstimate energy(const RunMeasurement& m) {
  validate(m);
  const double sp = m.effective_sigma_p();
  const double a = m.mu_t * sp;
  const double b = m.mu_p * m.sigma_t;
  const double c = sp * m.sigma_t;
  return {m.mu_p * m.mu_t, std::sqrt(a * a + b * b + c * c)};
}

EnergyEstimate scale_inference(const ScalingScenario& s, std::string_view label) {
  if (s.n_heads < 1 || s.days < 1) throw ConfigError("scenario needs n_heads, days >= 1");
  auto it = s.per_sample.find(std::string(label));
  if (it == s.per_sample.end()) {
    throw ConfigError("no per-sample inference energy for '" + std::string(label) + "'");
  }
  const double k = static_cast<double>(s.n_heads) * static_cast<double>(s.days);
  return {it->second.mu_wh * k, it->second.sigma_wh * k};
}

void validate(const EmbodiedNParams& p) {
  if (!(p.tissue_n_g_mu >= 0) || !(p.tissue_n_g_sigma >= 0)) {
    throw ConfigError("tissue N must be >= 0");
  }
  if (!(p.nue > 0 && p.nue <= 1)) throw ConfigError("NUE must be in (0, 1]");
  if (!(p.kwh_per_kg_low >= 0 && p.kwh_per_kg_low <= p.kwh_per_kg_avg &&
        p.kwh_per_kg_avg <= p.kwh_per_kg_high)) {
    throw ConfigError("embodied energy per kg N needs 0 <= low <= avg <= high");
  }
}

EmbodiedWaste embodied_waste(const EmbodiedNParams& p, std::size_t n_heads) {
  validate(p);
  const double heads = static_cast<double>(n_heads);
  EmbodiedWaste w;
  w.bioaccumulated_kg = p.tissue_n_g_mu * heads / 1000.0;
  w.bioaccumulated_sigma_kg = p.tissue_n_g_sigma * heads / 1000.0;
  w.applied_kg = w.bioaccumulated_kg / p.nue;
  w.applied_sigma_kg = w.bioaccumulated_sigma_kg / p.nue;
  w.wasted_kg = w.applied_kg - w.bioaccumulated_kg;
  w.wasted_sigma_kg = w.applied_sigma_kg - w.bioaccumulated_sigma_kg;
  w.embodied_wh_low = w.wasted_kg * p.kwh_per_kg_low * kWhPerKWh;
  w.embodied_wh_avg = w.wasted_kg * p.kwh_per_kg_avg * kWhPerKWh;
  w.embodied_wh_high = w.wasted_kg * p.kwh_per_kg_high * kWhPerKWh;
  return w;
}

Comparison compare(double compute_wh, const EmbodiedWaste& waste) {
  if (!(compute_wh > 0)) throw ConfigError("compute energy must be > 0");
  Comparison c;
  c.ratio_low = waste.embodied_wh_low / compute_wh;
  c.ratio_avg = waste.embodied_wh_avg / compute_wh;
  c.ratio_high = waste.embodied_wh_high / compute_wh;
  c.offset_fraction = waste.embodied_wh_avg > 0
                          ? compute_wh / waste.embodied_wh_avg
                          : std::numeric_limits<double>::infinity();
  return c;
}

RatioEnvelope ratio_envelope(const EnergyEstimate& compute, const EmbodiedWaste& waste,
                             const EmbodiedNParams& p) {
  const double wasted_lo = std::max(0.0, waste.wasted_kg - waste.wasted_sigma_kg);
  const double wasted_hi = waste.wasted_kg + waste.wasted_sigma_kg;
  const double compute_lo = compute.mu_wh - compute.sigma_wh;
  const double compute_hi = compute.mu_wh + compute.sigma_wh;
  RatioEnvelope e;
  e.min = wasted_lo * p.kwh_per_kg_low * kWhPerKWh / compute_hi;
  e.max = compute_lo > 0 ? wasted_hi * p.kwh_per_kg_high * kWhPerKWh / compute_lo
                         : std::numeric_limits<double>::infinity();
  return e;
}

std::map<std::string, double> relative_intensity(
    const std::map<std::string, double>& per_sample_wh, std::string_view baseline) {
  auto it = per_sample_wh.find(std::string(baseline));
  if (it == per_sample_wh.end()) {
    throw ConfigError("baseline '" + std::string(baseline) + "' is not listed");
  }
  if (!(it->second > 0)) throw ConfigError("baseline energy must be > 0");
  std::map<std::string, double> out;
  for (const auto& [label, wh] : per_sample_wh) out[label] = wh / it->second;
  return out;
}

// --- ledger file ---

namespace {

Phase parse_phase(const std::string& s) {
  if (s == "training") return Phase::training;
  if (s == "inference") return Phase::inference;
  throw ConfigError("unknown phase '" + s + "'");
}

}  // namespace

LedgerInput parse_ledger(const json& doc) {
  try {
    LedgerInput in;
    if (!doc.is_object()) throw ConfigError("energy ledger must be a JSON object");
    for (const auto& m : doc.value("measurements", json::array())) {
      RunMeasurement r;
      r.label = m.at("label").get<std::string>();
      r.phase = parse_phase(m.at("phase").get<std::string>());
      r.mu_p = m.at("mu_p").get<double>();
      r.sigma_p = m.at("sigma_p").get<double>();
      r.mu_t = m.at("mu_t").get<double>();
      r.sigma_t = m.at("sigma_t").get<double>();
      if (m.contains("power_floor_w")) r.power_floor_w = m["power_floor_w"].get<double>();
      validate(r);
      in.measurements.push_back(std::move(r));
    }
    for (const auto& e : doc.value("per_sample_inference", json::array())) {
      PerSampleEntry p;
      p.label = e.at("label").get<std::string>();
      if (e.contains("measurement")) {
        p.measurement = e["measurement"].get<std::string>();
      } else {
        p.estimate.mu_wh = e.at("mu_wh").get<double>();
        p.estimate.sigma_wh = e.value("sigma_wh", 0.0);
        if (!(p.estimate.mu_wh > 0) || !(p.estimate.sigma_wh >= 0)) {
          throw ConfigError("per-sample entry '" + p.label + "' needs mu_wh > 0, sigma_wh >= 0");
        }
      }
      in.per_sample_inference.push_back(std::move(p));
    }
    if (in.per_sample_inference.empty()) {
      throw ConfigError("energy ledger lists no per-sample inference energy");
    }
    for (const auto& c : doc.value("combined", json::array())) {
      in.combined.push_back(
          {c.at("label").get<std::string>(), c.at("parts").get<std::vector<std::string>>()});
    }
    const auto& sc = doc.at("scenario");
    in.n_heads = sc.at("n_heads").get<std::size_t>();
    in.days = sc.at("days").get<std::size_t>();
    in.baseline = doc.at("baseline").get<std::string>();
    in.compare_to = doc.at("compare_to").get<std::string>();
    const auto& en = doc.at("embodied_n");
    in.embodied.tissue_n_g_mu = en.at("tissue_n_g_mu").get<double>();
    in.embodied.tissue_n_g_sigma = en.at("tissue_n_g_sigma").get<double>();
    in.embodied.nue = en.at("nue").get<double>();
    const auto& k = en.at("kwh_per_kg_n");
    in.embodied.kwh_per_kg_low = k.at("low").get<double>();
    in.embodied.kwh_per_kg_avg = k.at("avg").get<double>();
    in.embodied.kwh_per_kg_high = k.at("high").get<double>();
    validate(in.embodied);
    in.claimed_ratio_bounds =
        doc.value("claimed_ratio_bounds", std::vector<double>{});
    return in;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed energy ledger: ") + e.what());
  }
}

LedgerInput read_ledger(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_ledger(doc);
}

LedgerReport build_report(const LedgerInput& input) {
  LedgerReport rep;
  rep.input = input;
  std::map<std::string, EnergyEstimate> by_measurement;
  for (const auto& m : input.measurements) {
    const auto e = energy(m);
    rep.measured.emplace_back(m.label, e);
    if (!by_measurement.emplace(m.label, e).second) {
      throw ConfigError("measurement '" + m.label + "' listed twice");
    }
  }
  for (const auto& p : input.per_sample_inference) {
    EnergyEstimate e = p.estimate;
    if (p.measurement) {
      auto it = by_measurement.find(*p.measurement);
      if (it == by_measurement.end()) {
        throw ConfigError("per-sample entry '" + p.label + "' references unknown measurement '" +
                          *p.measurement + "'");
      }
      e = it->second;
    }
    if (!rep.per_sample.emplace(p.label, e).second) {
      throw ConfigError("per-sample entry '" + p.label + "' listed twice");
    }
  }
  std::map<std::string, double> mu;
  for (const auto& [label, e] : rep.per_sample) mu[label] = e.mu_wh;
  rep.relative = relative_intensity(mu, input.baseline);

  ScalingScenario scenario{input.n_heads, input.days, rep.per_sample};
  std::map<std::string, EnergyEstimate> totals;
  for (const auto& p : input.per_sample_inference) {
    const auto t = scale_inference(scenario, p.label);
    totals[p.label] = t;
    rep.totals.push_back({p.label, t, {}});
  }
  for (const auto& c : input.combined) {
    if (c.parts.empty()) throw ConfigError("combined entry '" + c.label + "' has no parts");
    EnergyEstimate sum;
    double var = 0.0;
    for (const auto& part : c.parts) {
      auto it = totals.find(part);
      if (it == totals.end()) {
        throw ConfigError("combined entry '" + c.label + "' references unknown '" + part + "'");
      }
      sum.mu_wh += it->second.mu_wh;
      var += it->second.sigma_wh * it->second.sigma_wh;
    }
    sum.sigma_wh = std::sqrt(var);
    rep.totals.push_back({c.label, sum, c.parts});
  }

  auto target = totals.find(input.compare_to);
  if (target == totals.end()) {
    throw ConfigError("compare_to '" + input.compare_to + "' is not a per-sample entry");
  }
  rep.waste = embodied_waste(input.embodied, input.n_heads);
  rep.comparison = compare(target->second.mu_wh, rep.waste);
  rep.envelope = ratio_envelope(target->second, rep.waste, input.embodied);
  for (double claimed : input.claimed_ratio_bounds) {
    rep.claims.push_back(
        {claimed, claimed >= rep.envelope.min && claimed <= rep.envelope.max});
  }
  return rep;
}

json to_json(const LedgerReport& r) {
  json doc;
  doc["unit"] = "Wh";
  json measured = json::array();
  for (std::size_t i = 0; i < r.measured.size(); ++i) {
    const auto& m = r.input.measurements[i];
    measured.push_back({{"label", m.label},
                        {"phase", to_string(m.phase)},
                        {"mu_p_w", m.mu_p},
                        {"sigma_p_w", m.effective_sigma_p()},
                        {"power_floor_applied", m.power_floor_w.has_value()},
                        {"mu_t_h", m.mu_t},
                        {"sigma_t_h", m.sigma_t},
                        {"mu_e_wh", r.measured[i].second.mu_wh},
                        {"sigma_e_wh", r.measured[i].second.sigma_wh}});
  }
  doc["measurements"] = measured;
  json per_sample = json::array();
  for (const auto& p : r.input.per_sample_inference) {
    const auto& e = r.per_sample.at(p.label);
    per_sample.push_back({{"label", p.label},
                          {"mu_wh", e.mu_wh},
                          {"sigma_wh", e.sigma_wh},
                          {"relative_intensity", r.relative.at(p.label)}});
  }
  doc["per_sample_inference"] = per_sample;
  doc["baseline"] = r.input.baseline;
  json totals = json::array();
  for (const auto& t : r.totals) {
    json j = {{"label", t.label}, {"mu_wh", t.total.mu_wh}, {"sigma_wh", t.total.sigma_wh}};
    if (!t.parts.empty()) j["parts"] = t.parts;
    totals.push_back(j);
  }
  doc["scenario"] = {{"n_heads", r.input.n_heads}, {"days", r.input.days}, {"totals", totals}};
  const auto& w = r.waste;
  const auto& p = r.input.embodied;
  doc["embodied_n"] = {
      {"tissue_n_g_mu", p.tissue_n_g_mu},
      {"tissue_n_g_sigma", p.tissue_n_g_sigma},
      {"nue", p.nue},
      {"kwh_per_kg_n", {{"low", p.kwh_per_kg_low}, {"avg", p.kwh_per_kg_avg}, {"high", p.kwh_per_kg_high}}},
      {"bioaccumulated_kg", w.bioaccumulated_kg},
      {"bioaccumulated_sigma_kg", w.bioaccumulated_sigma_kg},
      {"applied_kg", w.applied_kg},
      {"applied_sigma_kg", w.applied_sigma_kg},
      {"wasted_kg", w.wasted_kg},
      {"wasted_sigma_kg", w.wasted_sigma_kg},
      {"embodied_wh", {{"low", w.embodied_wh_low}, {"avg", w.embodied_wh_avg}, {"high", w.embodied_wh_high}}}};
  json claims = json::array();
  for (const auto& c : r.claims) {
    claims.push_back({{"claimed", c.claimed},
                      {"derivable", c.derivable},
                      {"flag", c.derivable ? "" : "not derivable from the stated constants"}});
  }
  doc["comparison"] = {{"compare_to", r.input.compare_to},
                       {"ratio_low", r.comparison.ratio_low},
                       {"ratio_avg", r.comparison.ratio_avg},
                       {"ratio_high", r.comparison.ratio_high},
                       {"offset_fraction", r.comparison.offset_fraction},
                       {"envelope_1sigma", {{"min", r.envelope.min}, {"max", r.envelope.max}}},
                       {"claimed_bounds", claims}};
  return doc;
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_markdown(const LedgerReport& r, std::ostream& out) {
  out << "## Measured energy\n\n";
  out << "| Run | Phase | P (W) | sd P (W) | t (h) | sd t (h) | E (Wh) | sd E (Wh) |\n";
  out << "|---|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < r.measured.size(); ++i) {
    const auto& m = r.input.measurements[i];
    const auto& e = r.measured[i].second;
    out << "| " << m.label << " | " << to_string(m.phase) << " | " << fixed(m.mu_p, 2)
        << " | " << fixed(m.effective_sigma_p(), 2) << " | " << sci(m.mu_t) << " | "
        << sci(m.sigma_t) << " | " << sci(e.mu_wh) << " | " << sci(e.sigma_wh) << " |\n";
  }
  out << "\n## Per-sample inference energy\n\n";
  out << "| Module | E (Wh/sample) | sd (Wh/sample) | Relative intensity |\n";
  out << "|---|---|---|---|\n";
  for (const auto& p : r.input.per_sample_inference) {
    const auto& e = r.per_sample.at(p.label);
    out << "| " << p.label << " | " << sci(e.mu_wh) << " | " << sci(e.sigma_wh) << " | "
        << fixed(r.relative.at(p.label), 2) << "x |\n";
  }
  out << "\n## Scenario: " << r.input.n_heads << " heads x " << r.input.days << " days\n\n";
  out << "| Module | Total (Wh) | sd (Wh) |\n|---|---|---|\n";
  for (const auto& t : r.totals) {
    out << "| " << t.label << " | " << fixed(t.total.mu_wh, 3) << " | "
        << fixed(t.total.sigma_wh, 3) << " |\n";
  }
  const auto& w = r.waste;
  out << "\n## Embodied nitrogen waste\n\n";
  out << "| Quantity | Value |\n|---|---|\n";
  out << "| Applied N (kg) | " << fixed(w.applied_kg, 3) << " +- " << fixed(w.applied_sigma_kg, 3)
      << " |\n";
  out << "| Wasted N (kg) | " << fixed(w.wasted_kg, 3) << " +- " << fixed(w.wasted_sigma_kg, 3)
      << " |\n";
  out << "| Embodied energy low / avg / high (kWh) | " << fixed(w.embodied_wh_low / kWhPerKWh, 2)
      << " / " << fixed(w.embodied_wh_avg / kWhPerKWh, 2) << " / "
      << fixed(w.embodied_wh_high / kWhPerKWh, 2) << " |\n";
  const auto& c = r.comparison;
  out << "\n## Waste vs " << r.input.compare_to << " compute\n\n";
  out << "| Quantity | Value |\n|---|---|\n";
  out << "| Ratio low / avg / high | " << fixed(c.ratio_low, 1) << " / " << fixed(c.ratio_avg, 1)
      << " / " << fixed(c.ratio_high, 1) << " |\n";
  out << "| Ratio range with 1 sd excursions | " << fixed(r.envelope.min, 1) << " .. "
      << fixed(r.envelope.max, 1) << " |\n";
  out << "| Offset fraction of wasted N | " << fixed(100.0 * c.offset_fraction, 2) << "% |\n";
  for (const auto& claim : r.claims) {
    out << "| Claimed ratio " << fixed(claim.claimed, 1) << " | "
        << (claim.derivable ? "within derivable range" : "NOT DERIVABLE from the stated constants")
        << " |\n";
  }
}

std::string render_svg(const LedgerReport& r, bool timestamp) {
  std::vector<svg::Bar> bars;
  for (const auto& t : r.totals) {
    svg::Bar b;
    b.label = t.label;
    b.value = t.total.mu_wh;
    if (t.total.sigma_wh > 0) {
      b.low = std::max(t.total.mu_wh - t.total.sigma_wh, t.total.mu_wh * 1e-3);
      b.high = t.total.mu_wh + t.total.sigma_wh;
    }
    bars.push_back(b);
  }
  if (r.waste.embodied_wh_avg > 0) {
    bars.push_back({"Wasted N", r.waste.embodied_wh_avg, r.waste.embodied_wh_low,
                    r.waste.embodied_wh_high});
  }
  std::optional<std::string> comment;
  if (timestamp) {
    char buf[64];
    const std::time_t now = std::time(nullptr);
    std::strftime(buf, sizeof buf, "generated %Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    comment = buf;
  }
  return svg::log_bar_chart(
      bars,
      "Inference energy, " + std::to_string(r.input.n_heads) + " heads x " +
          std::to_string(r.input.days) + " days, vs embodied energy of wasted N",
      "Energy (Wh, log scale)", comment);
}

}  // namespace plantmon::energy
