#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tta/engine.hpp"
#include "tta/errors.hpp"
#include "tta/models.hpp"
#include "tta/rotation_sampler.hpp"

using namespace tta;

namespace {

ModelInput random_input(RotationStream& s, std::size_t steps) {
  ModelInput in;
  in.a = sample_orientation_tensor(s);
  in.vf = sample_volume_fraction(s);
  std::vector<SymTensor3> eps;
  Voigt6 acc{};
  for (std::size_t t = 0; t < steps; ++t) {
    for (auto& x : acc) x += 4e-4 * (2.0 * s.next_uniform() - 1.0);
    eps.emplace_back(acc);
  }
  in.strain = TensorPath(eps);
  return in;
}

TensorPath scalar_path(std::initializer_list<double> xs) {
  std::vector<SymTensor3> v;
  for (double x : xs) v.push_back(SymTensor3(Voigt6{x, 0, 0, 0, 0, 0}));
  return TensorPath(v);
}

double max_diff(const TensorPath& a, const TensorPath& b) {
  double m = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) m = std::max(m, max_abs_diff(a[t], b[t]));
  return m;
}

// g(r x) = r g(x) r^T exactly up to rounding: stress proportional to strain.
struct LinearModel : Model {
  TensorPath predict(const ModelInput& in) const override {
    std::vector<SymTensor3> out;
    for (const auto& e : in.strain) out.push_back(1000.0 * e);
    return TensorPath(out);
  }
  std::string name() const override { return "linear"; }
};

}  // namespace

TEST_CASE("TTAConfig validation") {
  TTAConfig c;
  c.n_rotations = 0;
  c.include_identity = false;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.include_identity = true;
  CHECK_NOTHROW(c.validate());
  c.divisor = DivisorMode::paper_verbatim;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("rotate_input") {
  RotationStream s(1);
  const auto in = random_input(s, 5);
  const auto same = rotate_input(in, Rotation3::identity());
  CHECK(same.a == in.a);
  CHECK(same.vf == in.vf);
  CHECK(same.strain == in.strain);

  const auto r = sample_rotation(s);
  CHECK(std::fabs(rotate_input(in, r).a.trace() - in.a.trace()) <= 1e-12);

  const auto q = Rotation3::about_axis({0, 0, 1}, std::numbers::pi / 2);
  ModelInput diag{SymTensor3::diag(0.6, 0.3, 0.1), 0.1, in.strain};
  CHECK(max_abs_diff(rotate_input(diag, q).a, SymTensor3::diag(0.3, 0.6, 0.1)) <= 1e-15);
}

TEST_CASE("equivariant oracle: TTA is a no-op") {
  RotationStream s(2);
  const EquivariantOracle model;
  const auto in = random_input(s, 40);
  TTAConfig cfg;
  cfg.n_rotations = 32;
  cfg.seed = 17;
  const auto r = run_tta(model, in, cfg);
  REQUIRE(r.predictions.size() == 33);
  for (const auto& p : r.predictions) CHECK(max_diff(p, r.predictions.front()) <= 1e-10);
  for (const auto& sd : r.sd) {
    for (double x : sd) CHECK(x <= 1e-10);
  }
  CHECK(max_diff(r.aggregated, r.predictions.front()) <= 1e-9);
  for (double x : r.vm_sd) CHECK(x <= 1e-9);
}

TEST_CASE("back-rotation of an exactly covariant fixture") {
  RotationStream s(3);
  const auto in = random_input(s, 10);
  TTAConfig cfg;
  cfg.n_rotations = 20;
  const auto r = run_tta(LinearModel{}, in, cfg);
  for (const auto& p : r.predictions) CHECK(max_diff(p, r.predictions.front()) <= 1e-12);
}

TEST_CASE("N = 0 returns the identity prediction") {
  RotationStream s(4);
  OracleParams p;
  p.noise_amp = 1.0;
  const NoisyOracle model(p);
  const auto in = random_input(s, 12);
  const auto r = run_tta(model, in, TTAConfig{});
  REQUIRE(r.predictions.size() == 1);
  CHECK(r.aggregated == r.predictions.front());
  CHECK(r.aggregated == model.predict(in));
  for (double x : r.vm_sd) CHECK(x == 0.0);
}

TEST_CASE("noisy oracle spread is of the order of the amplitude") {
  RotationStream s(5);
  OracleParams p;
  p.noise_amp = 2.0;
  const NoisyOracle model(p);
  const auto in = random_input(s, 50);
  TTAConfig cfg;
  cfg.n_rotations = 64;
  cfg.seed = 8;
  const auto r = run_tta(model, in, cfg);
  double mean = 0.0;
  for (const auto& sd : r.sd) {
    for (double x : sd) mean += x / (6.0 * r.sd.size());
  }
  CHECK(mean >= 0.2 * p.noise_amp);
  CHECK(mean <= 3.0 * p.noise_amp);
}

TEST_CASE("aggregate_mean") {
  const auto p = scalar_path({1.5, -2.0});
  const std::vector<TensorPath> same{p, p, p};
  CHECK(aggregate_mean(same, DivisorMode::count) == p);

  const std::vector<TensorPath> two{scalar_path({0}), scalar_path({2})};
  CHECK(aggregate_mean(two, DivisorMode::count)[0][0] == 1.0);
  CHECK(aggregate_mean(two, DivisorMode::paper_verbatim)[0][0] == 2.0);

  CHECK_THROWS_AS(aggregate_mean(std::vector<TensorPath>{}, DivisorMode::count), InvalidArgument);
  CHECK_THROWS_AS(aggregate_mean(std::vector<TensorPath>{p}, DivisorMode::paper_verbatim), InvalidArgument);
  CHECK_THROWS_AS(aggregate_mean(std::vector<TensorPath>{p, scalar_path({1})}, DivisorMode::count), InvalidArgument);
}

TEST_CASE("aggregate_mean is order independent") {
  RotationStream s(6);
  std::vector<TensorPath> preds;
  for (int i = 0; i < 50; ++i) {
    std::vector<SymTensor3> steps;
    for (int t = 0; t < 4; ++t) {
      Voigt6 v{};
      for (auto& x : v) x = 1e3 * (2.0 * s.next_uniform() - 1.0) * std::pow(10.0, i % 7 - 3);
      steps.emplace_back(v);
    }
    preds.emplace_back(steps);
  }
  const auto a = aggregate_mean(preds, DivisorMode::count);
  std::reverse(preds.begin() + 1, preds.end());
  const auto b = aggregate_mean(preds, DivisorMode::count);
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t k = 0; k < 6; ++k) CHECK(std::fabs(a[t][k] - b[t][k]) <= 1e-12 * std::max(1.0, std::fabs(a[t][k])));
  }
}

TEST_CASE("pointwise_sd") {
  const std::vector<TensorPath> equal{scalar_path({4}), scalar_path({4}), scalar_path({4})};
  CHECK(pointwise_sd(equal, scalar_path({4}))[0][0] == 0.0);

  // Index 0 is the identity prediction and is excluded by default.
  const std::vector<TensorPath> preds{scalar_path({100}), scalar_path({1}), scalar_path({3})};
  CHECK(pointwise_sd(preds, scalar_path({2}))[0][0] == doctest::Approx(1.0).epsilon(1e-15));

  AggregationOptions with_identity;
  with_identity.sd_include_identity = true;
  const std::vector<TensorPath> three{scalar_path({2}), scalar_path({1}), scalar_path({3})};
  CHECK(pointwise_sd(three, scalar_path({2}), with_identity)[0][0] ==
        doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));

  const std::vector<TensorPath> scaled{scalar_path({0}), scalar_path({-3}), scalar_path({-9})};
  CHECK(pointwise_sd(scaled, scalar_path({-6}))[0][0] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("von_mises_sd") {
  const std::vector<Series> same{{5, 6}, {5, 6}, {5, 6}};
  for (double x : von_mises_sd(same, Series{5, 6})) CHECK(x == 0.0);
  const std::vector<Series> vm{{9}, {1}, {3}};
  CHECK(von_mises_sd(vm, Series{2})[0] == doctest::Approx(1.0).epsilon(1e-15));
  RotationStream s(7);
  std::vector<Series> many;
  for (int i = 0; i < 10; ++i) many.push_back({s.next_uniform(), s.next_uniform()});
  for (double x : von_mises_sd(many, Series{0.5, 0.5})) CHECK(x >= 0.0);
}

TEST_CASE("vm_aggregated is the von Mises of the aggregated path") {
  RotationStream s(8);
  OracleParams p;
  p.noise_amp = 3.0;
  const auto in = random_input(s, 20);
  TTAConfig cfg;
  cfg.n_rotations = 10;
  const auto r = run_tta(NoisyOracle(p), in, cfg);
  CHECK(r.vm_aggregated == von_mises_path(r.aggregated));
  REQUIRE(r.vm_individual.size() == 11);
  CHECK(r.vm_individual[3] == von_mises_path(r.predictions[3]));
}

TEST_CASE("permuting the rotation list leaves the aggregate unchanged") {
  RotationStream s(9);
  OracleParams p;
  p.noise_amp = 3.0;
  const NoisyOracle model(p);
  const auto in = random_input(s, 15);
  RotationStream rs(10);
  auto rotations = rotation_list(rs, 30);
  const auto a = run_tta(model, in, rotations, AggregationOptions{});
  std::reverse(rotations.begin() + 1, rotations.end());
  const auto b = run_tta(model, in, rotations, AggregationOptions{});
  CHECK(max_diff(a.aggregated, b.aggregated) <= 1e-12);
}

TEST_CASE("numerics audit") {
  RotationStream s(11);
  std::vector<Sample> dataset;
  const OracleParams truth;
  for (int m = 0; m < 10; ++m) {
    Sample smp{"s" + std::to_string(m), random_input(s, 30), std::nullopt};
    smp.target = equivariant_oracle(truth, smp.input);
    dataset.push_back(smp);
  }
  const EquivariantOracle model;
  RotationStream a(1);
  const auto rep = numerics_audit(dataset, model, a);
  CHECK(rep.input_err <= 1e-12);
  CHECK(rep.target_err <= 1e-12);
  CHECK(rep.output_err <= 1e-12);
  CHECK(rep.samples == 10);
  CHECK(rep.samples_with_target == 10);

  RotationStream b(1);
  const auto zero = numerics_audit(dataset, model, b, true);
  CHECK(zero.input_err == 0.0);
  CHECK(zero.target_err == 0.0);
  CHECK(zero.output_err == 0.0);

  // Errors grow with the magnitude of the tensors.
  auto big = dataset;
  for (auto& smp : big) {
    std::vector<SymTensor3> steps;
    for (const auto& e : smp.input.strain) steps.push_back(1e3 * e);
    smp.input.strain = TensorPath(steps);
    std::vector<SymTensor3> sig;
    for (const auto& x : *smp.target) sig.push_back(1e3 * x);
    smp.target = TensorPath(sig);
  }
  RotationStream c(1);
  const auto scaled = numerics_audit(big, LinearModel{}, c);
  RotationStream d(1);
  const auto base = numerics_audit(dataset, LinearModel{}, d);
  const double ratio = scaled.target_err / base.target_err;
  CHECK(ratio >= 1e2);
  CHECK(ratio <= 1e4);
}
