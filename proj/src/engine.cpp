#include "tta/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tta/errors.hpp"
#include "tta/numeric.hpp"

namespace tta {

void TTAConfig::validate() const {
  if (n_rotations == 0 && !include_identity) {
    throw InvalidArgument("TTA with zero rotations must include the identity prediction");
  }
  if (n_rotations == 0 && divisor == DivisorMode::paper_verbatim) {
    throw InvalidArgument("paper_verbatim divisor is undefined for zero rotations");
  }
}

ModelInput rotate_input(const ModelInput& input, const Rotation3& r) {
  return ModelInput{rotate_sym(input.a, r), input.vf, rotate_path(input.strain, r)};
}

std::vector<Rotation3> rotations_for(const TTAConfig& cfg) {
  RotationStream stream(cfg.seed);
  auto list = rotation_list(stream, cfg.n_rotations);
  if (!cfg.include_identity) list.erase(list.begin());
  return list;
}

std::vector<TensorPath> back_rotated_predictions(const Model& model, const ModelInput& input,
                                                 std::span<const Rotation3> rotations) {
  std::vector<TensorPath> out(rotations.size());
  parallel_for(
      rotations.size(),
      [&](std::size_t i) {
        try {
          const TensorPath rotated = predict(model, rotate_input(input, rotations[i]));
          out[i] = inverse_rotate_path(rotated, rotations[i]);
        } catch (const ExternalModelError& e) {
          throw ExternalModelError(e.kind(), "rotation " + std::to_string(i) + ": " + e.what());
        }
      },
      model.concurrent());
  return out;
}

namespace {

void check_lengths(std::span<const TensorPath> predictions) {
  if (predictions.empty()) throw InvalidArgument("no predictions to aggregate");
  const std::size_t steps = predictions.front().size();
  for (const auto& p : predictions) {
    if (p.size() != steps) throw InvalidArgument("predictions have different lengths");
  }
}

// First index entering the spread sums, and the spread divisor.
std::pair<std::size_t, std::size_t> spread_range(std::size_t count, const AggregationOptions& options) {
  const std::size_t first = (options.leading_identity && !options.sd_include_identity) ? 1 : 0;
  if (count < 2) throw InvalidArgument("standard deviation needs at least two predictions");
  return {first, count - first};
}

}  // namespace

TensorPath aggregate_mean(std::span<const TensorPath> predictions, DivisorMode mode,
                          bool leading_identity) {
  check_lengths(predictions);
  std::size_t divisor = predictions.size();
  if (mode == DivisorMode::paper_verbatim) {
    divisor = leading_identity ? predictions.size() - 1 : predictions.size();
    if (divisor == 0) throw InvalidArgument("paper_verbatim divisor is undefined for N = 0");
  }
  const std::size_t steps = predictions.front().size();
  std::vector<SymTensor3> out(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t k = 0; k < kVoigtSize; ++k) {
      CompensatedSum sum;
      for (const auto& p : predictions) sum.add(p[t][k]);
      out[t][k] = sum.value() / static_cast<double>(divisor);
    }
  }
  return TensorPath(std::move(out));
}

std::vector<Voigt6> pointwise_sd(std::span<const TensorPath> predictions, const TensorPath& aggregated,
                                 const AggregationOptions& options) {
  check_lengths(predictions);
  const auto [first, n] = spread_range(predictions.size(), options);
  if (aggregated.size() != predictions.front().size()) {
    throw InvalidArgument("aggregated path length differs from predictions");
  }
  std::vector<Voigt6> out(aggregated.size());
  for (std::size_t t = 0; t < aggregated.size(); ++t) {
    for (std::size_t k = 0; k < kVoigtSize; ++k) {
      CompensatedSum sum;
      for (std::size_t i = first; i < predictions.size(); ++i) {
        const double d = predictions[i][t][k] - aggregated[t][k];
        sum.add(d * d);
      }
      out[t][k] = std::sqrt(sum.value() / static_cast<double>(n));
    }
  }
  return out;
}

Series von_mises_sd(std::span<const Series> vm_individual, const Series& vm_aggregated,
                    const AggregationOptions& options) {
  const auto [first, n] = spread_range(vm_individual.size(), options);
  for (const auto& s : vm_individual) {
    if (s.size() != vm_aggregated.size()) throw InvalidArgument("von Mises sequences differ in length");
  }
  Series out(vm_aggregated.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    CompensatedSum sum;
    for (std::size_t i = first; i < vm_individual.size(); ++i) {
      const double d = vm_individual[i][t] - vm_aggregated[t];
      sum.add(d * d);
    }
    out[t] = std::sqrt(sum.value() / static_cast<double>(n));
  }
  return out;
}

TTAResult summarize(std::vector<TensorPath> predictions, const AggregationOptions& options) {
  TTAResult r;
  r.predictions = std::move(predictions);
  r.aggregated = aggregate_mean(r.predictions, options.divisor, options.leading_identity);
  r.vm_individual.reserve(r.predictions.size());
  for (const auto& p : r.predictions) r.vm_individual.push_back(von_mises_path(p));
  r.vm_aggregated = von_mises_path(r.aggregated);
  if (r.predictions.size() >= 2) {
    r.sd = pointwise_sd(r.predictions, r.aggregated, options);
    r.vm_sd = von_mises_sd(r.vm_individual, r.vm_aggregated, options);
  } else {
    // A single prediction has no spread.
    r.sd.assign(r.aggregated.size(), Voigt6{});
    r.vm_sd.assign(r.aggregated.size(), 0.0);
  }
  return r;
}

TTAResult run_tta(const Model& model, const ModelInput& input, std::span<const Rotation3> rotations,
                  const AggregationOptions& options) {
  input.validate();
  return summarize(back_rotated_predictions(model, input, rotations), options);
}

TTAResult run_tta(const Model& model, const ModelInput& input, const TTAConfig& cfg) {
  cfg.validate();
  const auto rotations = rotations_for(cfg);
  return run_tta(model, input, rotations,
                 AggregationOptions{cfg.divisor, cfg.sd_include_identity, cfg.include_identity});
}

namespace {

double round_trip_error(const SymTensor3& x, const Rotation3& r) {
  return max_abs_diff(x, inverse_rotate_sym(rotate_sym(x, r), r));
}

double round_trip_error(const TensorPath& p, const Rotation3& r) {
  double err = 0.0;
  for (const auto& x : p) err = std::max(err, round_trip_error(x, r));
  return err;
}

}  // namespace

AuditReport numerics_audit(std::span<const Sample> dataset, const Model& model, RotationStream& stream,
                           bool identity_only) {
  if (dataset.empty()) throw InvalidArgument("numerics audit needs at least one sample");
  std::vector<Rotation3> rotations;
  rotations.reserve(dataset.size());
  for (std::size_t m = 0; m < dataset.size(); ++m) {
    rotations.push_back(identity_only ? identity_rotation() : sample_rotation(stream));
  }

  std::vector<double> input_err(dataset.size()), target_err(dataset.size()), output_err(dataset.size());
  parallel_for(
      dataset.size(),
      [&](std::size_t m) {
        const Sample& s = dataset[m];
        const Rotation3& r = rotations[m];
        input_err[m] = std::max(round_trip_error(s.input.a, r), round_trip_error(s.input.strain, r));
        if (s.target) target_err[m] = round_trip_error(*s.target, r);
        output_err[m] = round_trip_error(predict(model, s.input), r);
      },
      model.concurrent());

  AuditReport report;
  report.samples = dataset.size();
  CompensatedSum in, tg, out;
  for (std::size_t m = 0; m < dataset.size(); ++m) {
    in.add(input_err[m]);
    out.add(output_err[m]);
    if (dataset[m].target) {
      tg.add(target_err[m]);
      ++report.samples_with_target;
    }
  }
  const double count = static_cast<double>(dataset.size());
  report.input_err = in.value() / count;
  report.output_err = out.value() / count;
  report.target_err =
      report.samples_with_target ? tg.value() / static_cast<double>(report.samples_with_target) : 0.0;
  return report;
}

}  // namespace tta
