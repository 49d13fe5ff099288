#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "tta/engine.hpp"
#include "tta/errors.hpp"
#include "tta/metrics.hpp"
#include "tta/rotation_sampler.hpp"

using namespace tta;
using namespace tta::metrics;

namespace {

Series random_series(RotationStream& s, std::size_t n, double lo, double hi) {
  Series x(n);
  for (auto& v : x) v = lo + (hi - lo) * s.next_uniform();
  return x;
}

TensorPath uniaxial(const Series& values) {
  std::vector<SymTensor3> steps;
  for (double v : values) steps.push_back(SymTensor3::diag(v, 0, 0));
  return TensorPath(steps);
}

TTAResult result_from(std::vector<TensorPath> predictions) {
  return summarize(std::move(predictions), AggregationOptions{});
}

}  // namespace

TEST_CASE("MeRE") {
  const std::vector<Series> tg{{1, 2, 3, 4}};
  CHECK(mere(tg, tg) == 0.0);

  const double e = 0.3, s = 4.0;
  const std::vector<Series> pred{{1 + e, 2 + e, 3 + e, 4 + e}};
  CHECK(std::fabs(mere(tg, pred) - e / (2.0 * s)) <= 1e-12);
  // RMS variant: sqrt(4 e^2 / 4) / s.
  CHECK(std::fabs(mere(tg, pred, MereNormalization::rms) - e / s) <= 1e-12);

  const std::vector<Series> tg2{{2, 4, 6, 8}};
  const std::vector<Series> pred2{{2 + 2 * e, 4 + 2 * e, 6 + 2 * e, 8 + 2 * e}};
  CHECK(std::fabs(mere(tg2, pred2) - mere(tg, pred)) <= 1e-12);

  const std::vector<Series> zero{{0, 0, 0, 0}};
  CHECK_THROWS_AS(mere(zero, zero), ZeroTargetMax);
  CHECK_THROWS_AS(mere(tg, std::vector<Series>{{1, 2}}), InvalidArgument);
}

TEST_CASE("MaRE") {
  const std::vector<Series> tg{{1, 5, 3}};
  CHECK(mare(tg, tg) == 0.0);
  const double c = 0.5;
  const std::vector<Series> under{{1 - c, 5 - c, 3 - c}};
  CHECK(std::fabs(mare(tg, under) - c / 5.0) <= 1e-12);
  const std::vector<Series> over{{1 + c, 5 + c, 3 + c}};
  CHECK(std::fabs(mare(tg, over) + c / 5.0) <= 1e-12);
  CHECK(std::fabs(mare(tg, over, true) - mare(tg, under, true)) <= 1e-12);
  CHECK(std::fabs(mare(tg, under, true) - c / 5.0) <= 1e-12);
}

TEST_CASE("MeRE_av and SD_MeRE") {
  const Series one{0.7};
  CHECK(mere_av(one) == 0.7);
  const Series two{0.02, 0.04};
  CHECK(std::fabs(mere_av(two) - 0.03) <= 1e-15);

  RotationStream s(1);
  const auto many = random_series(s, 50, 0.01, 0.05);
  const double av = mere_av(many);
  CHECK(av >= *std::min_element(many.begin(), many.end()));
  CHECK(av <= *std::max_element(many.begin(), many.end()));

  const Series equal{0.5, 0.5, 0.5};
  CHECK(sd_mere(equal, 0.5) == 0.0);
  // values[0] is i = 0 and is left out: MeRE_{1,2} = {1,3} about 2.
  const Series vals{2.0, 1.0, 3.0};
  CHECK(std::fabs(sd_mere(vals, 2.0) - 1.0) <= 1e-15);
  CHECK(sd_mere(many, av) >= 0.0);
}

TEST_CASE("scale invariance of the error family") {
  RotationStream s(2);
  std::vector<Series> tg, pr, tg_c, pr_c;
  const double c = 37.25;
  for (int m = 0; m < 5; ++m) {
    tg.push_back(random_series(s, 30, 10, 100));
    pr.push_back(random_series(s, 30, 10, 100));
    tg_c.push_back(tg.back());
    pr_c.push_back(pr.back());
    for (auto& v : tg_c.back()) v *= c;
    for (auto& v : pr_c.back()) v *= c;
  }
  CHECK(std::fabs(mere(tg, pr) - mere(tg_c, pr_c)) <= 1e-12);
  CHECK(std::fabs(mare(tg, pr) - mare(tg_c, pr_c)) <= 1e-12);
  CHECK(std::fabs(mare(tg, pr, true) - mare(tg_c, pr_c, true)) <= 1e-12);
}

TEST_CASE("histogram") {
  RotationStream s(3);
  for (double w : {1e-5, 1e-3, 0.01, 0.37}) {
    const auto v = random_series(s, 500, 0.02, 0.05);
    const auto h = mere_histogram(v, w);
    CHECK(std::fabs(h.area() - 1.0) <= 1e-9);
    CHECK(std::fabs(h.fit_mean - mere_av(v)) <= 1e-12);
  }
  const Series tight{0.1234, 0.1234, 0.12345};
  const auto h = mere_histogram(tight, 1e-3);
  REQUIRE(h.density.size() == 1);
  CHECK(h.density[0] == doctest::Approx(1.0 / 1e-3).epsilon(1e-12));
  CHECK_THROWS_AS(mere_histogram(Series{1.0}, 0.1), InvalidArgument);
}

TEST_CASE("percentile") {
  const Series pop{1, 2, 3};
  CHECK(percentile_of(0.5, pop) == 0.0);
  CHECK(percentile_of(4.0, pop) == 100.0);
  CHECK(percentile_of(2.0, pop) == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("first differences") {
  CHECK(first_differences(Series{1, 1, 1}) == Series{0, 0});
  CHECK(first_differences(Series{0, 1, 3}) == Series{1, 2});
  Series ramp;
  for (int t = 0; t < 10; ++t) ramp.push_back(0.5 * t + 2.0);
  for (double d : first_differences(ramp)) CHECK(d == 0.5);
}

TEST_CASE("pearson_r") {
  const Series x{1, 2, 3, 5, 8};
  CHECK(pearson_r(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  Series neg;
  for (double v : x) neg.push_back(-v);
  CHECK(pearson_r(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));

  const Series a{1, 2, 3}, b{1, 2, 4};
  const double expected = oracle::pearson({1, 2, 3}, {1, 2, 4});
  CHECK(std::fabs(expected - 0.9819805060619657) <= 1e-15);
  CHECK(std::fabs(pearson_r(a, b) - expected) <= 1e-12);
  CHECK(std::fabs(pearson_r(a, b) - 0.9819) <= 1e-4);

  CHECK_THROWS_AS(pearson_r(Series{1, 1, 1}, Series{1, 2, 3}), DegenerateSequence);

  RotationStream s(4);
  for (int k = 0; k < 200; ++k) {
    const auto u = random_series(s, 20, -5, 5);
    const auto v = random_series(s, 20, -5, 5);
    const double r = pearson_r(u, v);
    CHECK(std::fabs(r - pearson_r(v, u)) <= 1e-12);
    CHECK(r <= 1.0 + 1e-12);
    CHECK(r >= -1.0 - 1e-12);
    CHECK(std::fabs(r - oracle::pearson(u, v)) <= 1e-12);
    Series w = u;
    for (auto& z : w) z = 3.5 * z - 12.0;
    CHECK(std::fabs(pearson_r(w, v) - r) <= 1e-10);
  }
}

TEST_CASE("shape ratio") {
  const Series target{0, 1, 3, 4, 7, 8};
  const Series i0{0, 2, 2, 5, 6, 9};
  const auto same = shape_ratio(target, i0, i0);
  CHECK(same.value == 1.0);

  const auto perfect = shape_ratio(target, i0, target);
  CHECK(perfect.perfect_tta_shape);
  CHECK(perfect.value == std::numeric_limits<double>::infinity());

  RotationStream s(5);
  for (int k = 0; k < 100; ++k) {
    const auto tg = random_series(s, 12, 0, 10);
    const auto p0 = random_series(s, 12, 0, 10);
    const auto p1 = random_series(s, 12, 0, 10);
    const auto r = shape_ratio(tg, p0, p1);
    CHECK((r.value > 1.0) == (r.r_tta > r.r_i0));
  }
}

TEST_CASE("uncertainty curves") {
  const auto target = uniaxial({1, 2, 3, 4});

  SUBCASE("perfect predictions") {
    const auto r = result_from({target, target, target});
    const auto c = uncertainty_curves(std::vector<TTAResult>{r}, std::vector<TensorPath>{target});
    for (double v : c.eabs_mean) CHECK(v == 0.0);
    for (double v : c.sd_mean) CHECK(v == 0.0);
  }
  SUBCASE("single sample") {
    const auto r = result_from({uniaxial({1.5, 2, 2, 5}), uniaxial({1.5, 2.5, 3, 3})});
    const auto c = uncertainty_curves(std::vector<TTAResult>{r}, std::vector<TensorPath>{target});
    const auto vm_t = von_mises_path(target);
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(c.eabs_mean[t] == std::fabs(vm_t[t] - r.vm_aggregated[t]));
      CHECK(c.sd_mean[t] == r.vm_sd[t]);
      CHECK(c.er_mean[t] == doctest::Approx(c.eabs_mean[t] / r.vm_aggregated[t]).epsilon(1e-15));
    }
    CHECK(c.excluded_steps == 0);
  }
  SUBCASE("steps with a vanishing aggregate are excluded and counted") {
    const auto r = result_from({uniaxial({0, 2, 3, 4}), uniaxial({0, 2, 3, 5})});
    const auto c = uncertainty_curves(std::vector<TTAResult>{r}, std::vector<TensorPath>{target});
    CHECK(c.excluded_steps == 1);
    CHECK(c.relative_steps == std::vector<std::size_t>{1, 2, 3});
    CHECK(c.er_mean.size() == 3);
  }
  SUBCASE("every step excluded") {
    const auto zero = uniaxial({0, 0});
    const auto r = result_from({zero, zero});
    CHECK_THROWS_AS(uncertainty_curves(std::vector<TTAResult>{r}, std::vector<TensorPath>{uniaxial({1, 1})}),
                    AllStepsExcluded);
  }
}

TEST_CASE("evaluate on an equivariant oracle") {
  RotationStream s(6);
  std::vector<TTAResult> results;
  std::vector<TensorPath> targets;
  for (int m = 0; m < 3; ++m) {
    const auto tg = uniaxial(random_series(s, 10, 5, 50));
    targets.push_back(tg);
    const auto p = uniaxial(random_series(s, 10, 5, 50));
    results.push_back(result_from({p, p, p, p}));
  }
  const auto rep = evaluate(results, targets);
  CHECK(rep.rotations == 3);
  CHECK(rep.samples == 3);
  CHECK(rep.steps == 10);
  CHECK(rep.mere_per_rotation.size() == 4);
  CHECK(std::fabs(rep.mere_tta - rep.mere_i0) <= 1e-12);
  CHECK(std::fabs(rep.mere_av - rep.mere_i0) <= 1e-12);
  REQUIRE(rep.sd_mere);
  CHECK(*rep.sd_mere <= 1e-12);
  REQUIRE(rep.shape);
  CHECK(rep.shape->entries.size() == 3 * 7);
}

TEST_CASE("report serialization is stable") {
  RotationStream s(7);
  std::vector<TTAResult> results;
  std::vector<TensorPath> targets;
  for (int m = 0; m < 2; ++m) {
    targets.push_back(uniaxial(random_series(s, 6, 5, 50)));
    results.push_back(result_from({uniaxial(random_series(s, 6, 5, 50)), uniaxial(random_series(s, 6, 5, 50)),
                                   uniaxial(random_series(s, 6, 5, 50))}));
  }
  ReportOptions opts;
  opts.bin_width = 0.01;
  const auto rep = evaluate(results, targets, opts);
  const auto a = to_json(rep, 42);
  CHECK(a == to_json(evaluate(results, targets, opts), 42));
  CHECK(a.find("\"seed\": 42") != std::string::npos);
  CHECK(a.back() == '\n');
  CHECK(curve_csv(Series{0.5, 0.25}) == "t,value\n1,0.5\n2,0.25\n");
  const std::vector<std::size_t> steps{0, 2};
  CHECK(curve_csv(Series{0.5, 0.25}, steps) == "t,value\n1,0.5\n3,0.25\n");
}
