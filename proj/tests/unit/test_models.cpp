#include <doctest.h>

#include <cmath>

#include "tta/engine.hpp"
#include "tta/errors.hpp"
#include "tta/models.hpp"
#include "tta/rotation_sampler.hpp"

using namespace tta;

namespace {

ModelInput random_input(RotationStream& s, std::size_t steps, double scale = 0.01) {
  ModelInput in;
  in.a = sample_orientation_tensor(s);
  in.vf = sample_volume_fraction(s);
  std::vector<SymTensor3> eps;
  for (std::size_t t = 0; t < steps; ++t) {
    Voigt6 v{};
    for (auto& x : v) x = scale * (2.0 * s.next_uniform() - 1.0);
    eps.emplace_back(v);
  }
  in.strain = TensorPath(eps);
  return in;
}

double max_diff(const TensorPath& a, const TensorPath& b) {
  double m = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) m = std::max(m, max_abs_diff(a[t], b[t]));
  return m;
}

}  // namespace

TEST_CASE("closed-form oracle step") {
  OracleParams p;
  p.lambda = 1;
  p.mu = 1;
  p.kappa = 1;
  p.sigma_y = 1e30;
  const auto s = equivariant_oracle_step(p, SymTensor3::diag(0.5, 0.3, 0.2), 0.1, SymTensor3::diag(0.01, 0.01, 0.01));
  CHECK(std::fabs(s[0] - 0.0510) <= 1e-15);
  CHECK(std::fabs(s[1] - 0.0506) <= 1e-15);
  CHECK(std::fabs(s[2] - 0.0504) <= 1e-15);
  CHECK(s[3] == 0.0);
  CHECK(s[4] == 0.0);
  CHECK(s[5] == 0.0);
}

TEST_CASE("isotropic orientation under pure shear") {
  OracleParams p;
  p.sigma_y = 1e30;
  const double e = 1e-3, vf = 0.12;
  const auto s = equivariant_oracle_step(p, SymTensor3::diag(1.0 / 3, 1.0 / 3, 1.0 / 3), vf,
                                         SymTensor3(Voigt6{0, 0, 0, e, 0, 0}));
  const double expected = (2.0 * p.mu + 2.0 / 3.0 * vf * p.kappa) * e;
  CHECK(s[3] == doctest::Approx(expected).epsilon(1e-14));
  for (int k : {0, 1, 2, 4, 5}) CHECK(std::fabs(s[k]) <= 1e-15);
}

TEST_CASE("zero strain gives zero stress") {
  ModelInput in{SymTensor3::diag(0.5, 0.3, 0.2), 0.12, TensorPath({SymTensor3{}, SymTensor3{}, SymTensor3{}})};
  const auto out = predict(EquivariantOracle{}, in);
  REQUIRE(out.size() == 3);
  for (const auto& x : out) CHECK(x == SymTensor3{});
}

TEST_CASE("equivariance of the oracle") {
  RotationStream s(21);
  const OracleParams p;
  for (int k = 0; k < 200; ++k) {
    const auto in = random_input(s, 10, 0.03);
    const auto r = sample_rotation(s);
    const auto direct = equivariant_oracle(p, in);
    const auto back = inverse_rotate_path(equivariant_oracle(p, rotate_input(in, r)), r);
    CHECK(max_diff(direct, back) <= 1e-10);
  }
}

TEST_CASE("von Mises cap holds") {
  RotationStream s(22);
  const OracleParams p;
  for (int k = 0; k < 100; ++k) {
    const auto out = equivariant_oracle(p, random_input(s, 20, 0.1));
    for (double v : von_mises_path(out)) CHECK(v <= p.sigma_y + 1e-9);
  }
}

TEST_CASE("noisy oracle") {
  RotationStream s(23);
  const auto in = random_input(s, 30);
  OracleParams p;

  SUBCASE("zero amplitude reduces to the equivariant oracle") {
    CHECK(noisy_oracle(p, in) == equivariant_oracle(p, in));
  }
  SUBCASE("deterministic") {
    p.noise_amp = 2.0;
    CHECK(noisy_oracle(p, in) == noisy_oracle(p, in));
  }
  SUBCASE("bounded by the amplitude and not equivariant") {
    p.noise_amp = 2.0;
    const auto clean = equivariant_oracle(p, in);
    const auto noisy = noisy_oracle(p, in);
    CHECK(max_diff(clean, noisy) <= p.noise_amp);
    CHECK(max_diff(clean, noisy) > 0.0);
    const auto r = sample_rotation(s);
    const auto back = inverse_rotate_path(noisy_oracle(p, rotate_input(in, r)), r);
    const double d = max_diff(back, noisy);
    CHECK(d <= 4.0 * p.noise_amp);
    CHECK(d > 0.0);
  }
  SUBCASE("linear in the amplitude") {
    const auto clean = equivariant_oracle(p, in);
    p.noise_amp = 1e-3;
    const double d1 = max_diff(noisy_oracle(p, in), clean);
    p.noise_amp = 1e-6;
    const double d2 = max_diff(noisy_oracle(p, in), clean);
    CHECK(d1 / d2 == doctest::Approx(1000.0).epsilon(1e-6));
  }
  SUBCASE("different noise seeds give different noise") {
    p.noise_amp = 1.0;
    const auto a = noisy_oracle(p, in);
    p.noise_seed = 1;
    CHECK_FALSE(a == noisy_oracle(p, in));
  }
}

TEST_CASE("parameter and input validation") {
  OracleParams p;
  p.mu = 0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  OracleParams q;
  q.noise_amp = -1;
  CHECK_THROWS_AS(q.validate(), InvalidArgument);
  OracleParams r;
  r.noise_amp = 1;
  CHECK_THROWS_AS(EquivariantOracle{r}, InvalidArgument);

  ModelInput in{SymTensor3::diag(0.5, 0.3, 0.2), 1.5, TensorPath({SymTensor3{}})};
  CHECK_THROWS_AS(in.validate(), InvariantViolation);
}

namespace {

struct ShortModel : Model {
  TensorPath predict(const ModelInput& in) const override {
    std::vector<SymTensor3> v(in.strain.steps().begin(), in.strain.steps().end() - 1);
    return TensorPath(v);
  }
  std::string name() const override { return "short"; }
};

}  // namespace

TEST_CASE("output length contract") {
  ModelInput in{SymTensor3::diag(0.5, 0.3, 0.2), 0.1, TensorPath({SymTensor3{}, SymTensor3{}})};
  try {
    predict(ShortModel{}, in);
    FAIL("expected ExternalModelError");
  } catch (const ExternalModelError& e) {
    CHECK(e.kind() == ExternalModelError::Kind::length);
  }
}
