#include "tta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tta/errors.hpp"
#include "tta/format.hpp"
#include "tta/numeric.hpp"

namespace tta::metrics {

namespace {

double mean_of(std::span<const double> x) {
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / static_cast<double>(x.size());
}

double max_of(std::span<const double> x) { return *std::max_element(x.begin(), x.end()); }

void check_pairs(std::span<const Series> targets, std::span<const Series> predictions) {
  if (targets.empty()) throw InvalidArgument("metric over an empty dataset");
  if (targets.size() != predictions.size()) {
    throw InvalidArgument("targets and predictions differ in sample count");
  }
  for (std::size_t m = 0; m < targets.size(); ++m) {
    if (targets[m].empty() || targets[m].size() != predictions[m].size()) {
      throw InvalidArgument("sample " + std::to_string(m) +
                            ": target and prediction must be non-empty and of equal length");
    }
  }
}

double target_max(const Series& target, std::size_t m) {
  const double mx = max_of(target);
  if (!(mx > 0.0)) {
    throw ZeroTargetMax("sample " + std::to_string(m) + ": target von Mises path is identically zero");
  }
  return mx;
}

}  // namespace

double mere(std::span<const Series> targets, std::span<const Series> predictions, MereNormalization norm) {
  check_pairs(targets, predictions);
  CompensatedSum total;
  for (std::size_t m = 0; m < targets.size(); ++m) {
    const Series& tg = targets[m];
    const Series& pr = predictions[m];
    const double mx = target_max(tg, m);
    CompensatedSum sq;
    for (std::size_t t = 0; t < tg.size(); ++t) {
      const double d = tg[t] - pr[t];
      sq.add(d * d);
    }
    const double steps = static_cast<double>(tg.size());
    const double term = norm == MereNormalization::paper ? std::sqrt(sq.value()) / (mx * steps)
                                                         : std::sqrt(sq.value() / steps) / mx;
    total.add(term);
  }
  return total.value() / static_cast<double>(targets.size());
}

double mare(std::span<const Series> targets, std::span<const Series> predictions, bool abs_diff) {
  check_pairs(targets, predictions);
  CompensatedSum total;
  for (std::size_t m = 0; m < targets.size(); ++m) {
    const Series& tg = targets[m];
    const Series& pr = predictions[m];
    const double mx = target_max(tg, m);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < tg.size(); ++t) {
      const double d = tg[t] - pr[t];
      worst = std::max(worst, abs_diff ? std::abs(d) : d);
    }
    total.add(worst / mx);
  }
  return total.value() / static_cast<double>(targets.size());
}

double mere_av(std::span<const double> mere_values) {
  if (mere_values.empty()) throw InvalidArgument("MeRE average of no values");
  return mean_of(mere_values);
}

double sd_mere(std::span<const double> mere_values, double mere_average) {
  if (mere_values.size() < 2) throw InvalidArgument("MeRE spread needs N >= 1 rotations");
  CompensatedSum s;
  for (std::size_t i = 1; i < mere_values.size(); ++i) {
    const double d = mere_values[i] - mere_average;
    s.add(d * d);
  }
  return std::sqrt(s.value() / static_cast<double>(mere_values.size() - 1));
}

double Histogram::area() const {
  CompensatedSum s;
  for (double d : density) s.add(d * bin_width);
  return s.value();
}

double Histogram::normal_pdf(double x) const {
  if (!(fit_sd > 0.0)) return 0.0;
  const double z = (x - fit_mean) / fit_sd;
  return std::exp(-0.5 * z * z) / (fit_sd * std::sqrt(2.0 * std::numbers::pi));
}

Histogram mere_histogram(std::span<const double> values, double bin_width) {
  if (values.size() < 2) throw InvalidArgument("histogram needs at least two values");
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw InvalidArgument("bin width must be positive");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  Histogram h;
  h.bin_width = bin_width;
  h.origin = std::floor(*lo / bin_width) * bin_width;
  const double span_bins = std::floor((*hi - h.origin) / bin_width) + 1.0;
  if (span_bins > 1e7) throw InvalidArgument("bin width too small for the value range");
  const auto bins = static_cast<std::size_t>(span_bins);
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto k = static_cast<std::ptrdiff_t>(std::floor((v - h.origin) / bin_width));
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(k)];
  }
  const double n = static_cast<double>(values.size());
  h.density.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) h.density[k] = static_cast<double>(h.counts[k]) / (n * bin_width);

  h.fit_mean = mean_of(values);
  CompensatedSum sq;
  for (double v : values) sq.add((v - h.fit_mean) * (v - h.fit_mean));
  h.fit_sd = std::sqrt(sq.value() / n);
  return h;
}

double percentile_of(double value, std::span<const double> population) {
  if (population.empty()) throw InvalidArgument("percentile of an empty population");
  const auto below = std::count_if(population.begin(), population.end(), [&](double x) { return x < value; });
  return 100.0 * static_cast<double>(below) / static_cast<double>(population.size());
}

Series first_differences(std::span<const double> x) {
  if (x.size() < 2) throw InvalidArgument("first differences need at least two values");
  Series d(x.size() - 1);
  for (std::size_t t = 0; t + 1 < x.size(); ++t) d[t] = x[t + 1] - x[t];
  return d;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgument("pearson_r needs two sequences of equal length >= 2");
  }
  const double mx = mean_of(x);
  const double my = mean_of(y);
  CompensatedSum sxy, sxx, syy;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double dx = x[t] - mx;
    const double dy = y[t] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  if (!(sxx.value() > 0.0) || !(syy.value() > 0.0)) {
    throw DegenerateSequence("correlation of a constant sequence is undefined");
  }
  const double r = sxy.value() / (std::sqrt(sxx.value()) * std::sqrt(syy.value()));
  return std::clamp(r, -1.0, 1.0);
}

ShapeRatio shape_ratio(std::span<const double> target, std::span<const double> i0,
                       std::span<const double> tta) {
  if (target.size() < 3 || i0.size() != target.size() || tta.size() != target.size()) {
    throw InvalidArgument("shape ratio needs three sequences of equal length >= 3");
  }
  const Series dt = first_differences(target);
  ShapeRatio s;
  s.r_i0 = pearson_r(first_differences(i0), dt);
  s.r_tta = pearson_r(first_differences(tta), dt);
  const double denom = 1.0 - s.r_tta;
  if (denom < 1e-12) {
    s.perfect_tta_shape = true;
    s.value = std::numeric_limits<double>::infinity();
  } else {
    s.value = (1.0 - s.r_i0) / denom;
  }
  return s;
}

UncertaintyCurves uncertainty_curves(std::span<const TTAResult> results, std::span<const TensorPath> targets,
                                     double eps_div) {
  if (results.empty() || results.size() != targets.size()) {
    throw InvalidArgument("uncertainty curves need one target per TTA result");
  }
  const std::size_t steps = results.front().steps();
  for (std::size_t m = 0; m < results.size(); ++m) {
    if (results[m].steps() != steps || targets[m].size() != steps) {
      throw InvalidArgument("uncertainty curves need all samples to share T");
    }
  }
  const double count = static_cast<double>(results.size());

  std::vector<Series> target_vm;
  target_vm.reserve(targets.size());
  for (const auto& tg : targets) target_vm.push_back(von_mises_path(tg));

  UncertaintyCurves c;
  c.sd_mean.resize(steps);
  c.eabs_mean.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    CompensatedSum sd, ea;
    bool relative_ok = true;
    for (std::size_t m = 0; m < results.size(); ++m) {
      sd.add(results[m].vm_sd[t]);
      ea.add(std::abs(target_vm[m][t] - results[m].vm_aggregated[t]));
      if (!(results[m].vm_aggregated[t] > eps_div)) relative_ok = false;
    }
    c.sd_mean[t] = sd.value() / count;
    c.eabs_mean[t] = ea.value() / count;
    if (!relative_ok) {
      ++c.excluded_steps;
      continue;
    }
    CompensatedSum er, sdr;
    for (std::size_t m = 0; m < results.size(); ++m) {
      const double vm = results[m].vm_aggregated[t];
      er.add(std::abs(target_vm[m][t] - vm) / vm);
      sdr.add(results[m].vm_sd[t] / vm);
    }
    c.relative_steps.push_back(t);
    c.er_mean.push_back(er.value() / count);
    c.sdr_mean.push_back(sdr.value() / count);
  }
  if (c.relative_steps.empty()) {
    throw AllStepsExcluded("every step has an aggregated von Mises stress below the division guard");
  }

  auto try_r = [](std::span<const double> x, std::span<const double> y) -> std::optional<double> {
    try {
      return pearson_r(x, y);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  c.r_abs = try_r(c.sd_mean, c.eabs_mean);
  c.r_rel = try_r(c.sdr_mean, c.er_mean);

  Series pooled_sd, pooled_err;
  for (std::size_t m = 0; m < results.size(); ++m) {
    for (std::size_t k = 0; k < kVoigtSize; ++k) {
      for (std::size_t t = 0; t < steps; ++t) {
        pooled_sd.push_back(results[m].sd[t][k]);
        pooled_err.push_back(std::abs(targets[m][t][k] - results[m].aggregated[t][k]));
      }
    }
  }
  c.r_component = try_r(pooled_sd, pooled_err);
  return c;
}

namespace {

ShapeSummary shape_summary(std::span<const TTAResult> results, std::span<const TensorPath> targets) {
  ShapeSummary s;
  CompensatedSum total;
  for (std::size_t m = 0; m < results.size(); ++m) {
    const TTAResult& r = results[m];
    for (std::size_t ch = 0; ch < kShapeChannels.size(); ++ch) {
      Series tg, i0, agg;
      if (ch == 0) {
        tg = von_mises_path(targets[m]);
        i0 = r.vm_individual.front();
        agg = r.vm_aggregated;
      } else {
        tg = targets[m].component(ch - 1);
        i0 = r.predictions.front().component(ch - 1);
        agg = r.aggregated.component(ch - 1);
      }
      ShapeEntry e{m, ch, std::nullopt, {}};
      try {
        e.ratio = shape_ratio(tg, i0, agg);
      } catch (const DegenerateSequence& ex) {
        e.note = ex.what();
        ++s.degenerate;
      }
      if (e.ratio) {
        if (e.ratio->perfect_tta_shape) {
          ++s.perfect;
        } else {
          ++s.finite;
          total.add(e.ratio->value);
          if (e.ratio->value < 1.0) ++s.below_one;
        }
      }
      s.entries.push_back(std::move(e));
    }
  }
  s.mean_ratio = s.finite ? total.value() / static_cast<double>(s.finite) : 0.0;
  return s;
}

}  // namespace

MetricsReport evaluate(std::span<const TTAResult> results, std::span<const TensorPath> targets,
                       const ReportOptions& options) {
  if (results.empty() || results.size() != targets.size()) {
    throw InvalidArgument("metrics need one target per TTA result");
  }
  const std::size_t n_pred = results.front().predictions.size();
  for (const auto& r : results) {
    if (r.predictions.size() != n_pred) throw InvalidArgument("TTA results differ in rotation count");
  }

  MetricsReport rep;
  rep.samples = results.size();
  rep.rotations = n_pred - 1;
  rep.steps = results.front().steps();

  std::vector<Series> target_vm;
  for (const auto& tg : targets) target_vm.push_back(von_mises_path(tg));

  std::vector<Series> column(results.size());
  for (std::size_t i = 0; i < n_pred; ++i) {
    for (std::size_t m = 0; m < results.size(); ++m) column[m] = results[m].vm_individual[i];
    rep.mere_per_rotation.push_back(mere(target_vm, column, options.errors.mere_norm));
    rep.mare_per_rotation.push_back(mare(target_vm, column, options.errors.mare_abs));
  }
  rep.mere_i0 = rep.mere_per_rotation.front();
  rep.mare_i0 = rep.mare_per_rotation.front();
  rep.mere_av = mere_av(rep.mere_per_rotation);

  for (std::size_t m = 0; m < results.size(); ++m) column[m] = results[m].vm_aggregated;
  rep.mere_tta = mere(target_vm, column, options.errors.mere_norm);
  rep.mare_tta = mare(target_vm, column, options.errors.mare_abs);

  if (n_pred >= 2) {
    rep.sd_mere = sd_mere(rep.mere_per_rotation, rep.mere_av);
    const std::span<const double> rotated(rep.mere_per_rotation.data() + 1, n_pred - 1);
    rep.mere_i0_percentile = percentile_of(rep.mere_i0, rotated);
    try {
      rep.histogram = mere_histogram(rep.mere_per_rotation, options.bin_width);
    } catch (const InvalidArgument& e) {
      rep.notes.push_back(std::string("histogram skipped: ") + e.what());
    }
  } else {
    rep.notes.push_back("N = 0: no spread, percentile or histogram");
  }

  if (rep.steps >= 3) {
    rep.shape = shape_summary(results, targets);
  } else {
    rep.notes.push_back("T < 3: shape analysis skipped");
  }

  try {
    rep.uncertainty = uncertainty_curves(results, targets, options.eps_div);
  } catch (const AllStepsExcluded& e) {
    rep.notes.push_back(std::string("uncertainty curves skipped: ") + e.what());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using ojson = nlohmann::ordered_json;

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

}  // namespace

std::string to_json(const MetricsReport& rep, std::uint64_t seed) {
  ojson j;
  j["seed"] = seed;
  j["samples"] = rep.samples;
  j["rotations"] = rep.rotations;
  j["steps"] = rep.steps;
  j["mere_i0"] = rep.mere_i0;
  j["mare_i0"] = rep.mare_i0;
  j["mere_av"] = rep.mere_av;
  j["sd_mere"] = optional_number(rep.sd_mere);
  j["mere_tta"] = rep.mere_tta;
  j["mare_tta"] = rep.mare_tta;
  j["mere_i0_percentile"] = optional_number(rep.mere_i0_percentile);
  j["mere_per_rotation"] = rep.mere_per_rotation;
  j["mare_per_rotation"] = rep.mare_per_rotation;
  if (rep.histogram) {
    j["histogram"] = {{"bin_width", rep.histogram->bin_width},
                      {"origin", rep.histogram->origin},
                      {"fit_mean", rep.histogram->fit_mean},
                      {"fit_sd", rep.histogram->fit_sd},
                      {"bins", rep.histogram->counts.size()}};
  }
  if (rep.shape) {
    const ShapeSummary& s = *rep.shape;
    ojson entries = ojson::array();
    for (const auto& e : s.entries) {
      ojson row = {{"sample", e.sample}, {"channel", kShapeChannels[e.channel]}};
      if (e.ratio) {
        row["c_ratio"] = e.ratio->perfect_tta_shape ? ojson(nullptr) : ojson(e.ratio->value);
        row["r_i0"] = e.ratio->r_i0;
        row["r_tta"] = e.ratio->r_tta;
        row["perfect_tta_shape"] = e.ratio->perfect_tta_shape;
      } else {
        row["c_ratio"] = nullptr;
        row["degenerate"] = e.note;
      }
      entries.push_back(std::move(row));
    }
    j["shape"] = {{"mean_c_ratio", s.mean_ratio}, {"finite", s.finite},   {"perfect", s.perfect},
                  {"degenerate", s.degenerate},   {"below_one", s.below_one}, {"entries", std::move(entries)}};
  }
  if (rep.uncertainty) {
    const UncertaintyCurves& u = *rep.uncertainty;
    j["uncertainty"] = {{"r_abs", optional_number(u.r_abs)},
                        {"r_rel", optional_number(u.r_rel)},
                        {"r_component", optional_number(u.r_component)},
                        {"excluded_steps", u.excluded_steps}};
  }
  j["notes"] = rep.notes;
  return j.dump(2) + "\n";
}

std::string to_text(const MetricsReport& rep) {
  std::ostringstream os;
  os << std::setprecision(6);
  auto row = [&](const char* name, const std::string& value) {
    os << std::left << std::setw(22) << name << value << "\n";
  };
  auto num = [](double x) {
    std::ostringstream s;
    s << std::setprecision(6) << x;
    return s.str();
  };
  auto opt = [&](const std::optional<double>& x) { return x ? num(*x) : std::string("-"); };
  row("samples (M)", std::to_string(rep.samples));
  row("rotations (N)", std::to_string(rep.rotations));
  row("steps (T)", std::to_string(rep.steps));
  row("MeRE_i=0", num(rep.mere_i0));
  row("MaRE_i=0", num(rep.mare_i0));
  row("MeRE_av", num(rep.mere_av));
  row("SD_MeRE", opt(rep.sd_mere));
  row("MeRE_TTA", num(rep.mere_tta));
  row("MaRE_TTA", num(rep.mare_tta));
  row("MeRE_i=0 percentile", opt(rep.mere_i0_percentile));
  if (rep.shape) {
    row("mean C_ratio", num(rep.shape->mean_ratio));
    row("C_ratio < 1", std::to_string(rep.shape->below_one) + " of " + std::to_string(rep.shape->finite));
  }
  if (rep.uncertainty) {
    row("r(<SD>, <E_abs>)", opt(rep.uncertainty->r_abs));
    row("r(<SD_r>, <E_r>)", opt(rep.uncertainty->r_rel));
    row("r per component", opt(rep.uncertainty->r_component));
    row("excluded steps", std::to_string(rep.uncertainty->excluded_steps));
  }
  for (const auto& n : rep.notes) os << "note: " << n << "\n";
  return os.str();
}

std::string curve_csv(const Series& values, std::span<const std::size_t> steps) {
  std::string out = "t,value\n";
  for (std::size_t k = 0; k < values.size(); ++k) {
    const std::size_t t = steps.empty() ? k : steps[k];
    out += std::to_string(t + 1) + "," + format_double(values[k]) + "\n";
  }
  return out;
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_left,bin_right,count,density,normal_pdf\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const double left = h.bin_left(k);
    const double right = left + h.bin_width;
    out += format_double(left) + "," + format_double(right) + "," + std::to_string(h.counts[k]) + "," +
           format_double(h.density[k]) + "," + format_double(h.normal_pdf(0.5 * (left + right))) + "\n";
  }
  return out;
}

}  // namespace tta::metrics
