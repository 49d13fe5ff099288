#include "tta/models.hpp"

#include <cmath>
#include <string>

#include "tta/errors.hpp"
#include "tta/rotation_sampler.hpp"

namespace tta {

void ModelInput::validate() const {
  if (!(vf > 0.0 && vf < 1.0)) {
    throw InvariantViolation("fiber volume fraction must lie in (0, 1), got " + std::to_string(vf));
  }
  if (!a.is_finite()) throw InvariantViolation("orientation tensor has non-finite components");
  if (strain.empty()) throw InvariantViolation("strain path is empty");
}

TensorPath predict(const Model& model, const ModelInput& input) {
  TensorPath out = model.predict(input);
  if (out.size() != input.strain.size()) {
    throw ExternalModelError(ExternalModelError::Kind::length,
                             model.name() + " returned " + std::to_string(out.size()) +
                                 " steps for an input of " + std::to_string(input.strain.size()));
  }
  return out;
}

void OracleParams::validate() const {
  if (!(lambda > 0.0) || !(mu > 0.0) || !(kappa > 0.0) || !(sigma_y > 0.0)) {
    throw InvalidArgument("oracle parameters lambda, mu, kappa and sigma_y must be positive");
  }
  if (!(noise_amp >= 0.0) || !std::isfinite(noise_amp)) {
    throw InvalidArgument("oracle noise amplitude must be finite and non-negative");
  }
}

SymTensor3 equivariant_oracle_step(const OracleParams& params, const SymTensor3& a, double vf,
                                   const SymTensor3& eps) {
  const Mat3 am = a.to_matrix();
  const Mat3 em = eps.to_matrix();
  const Mat3 ae = matmul(am, em);
  const Mat3 ea = matmul(em, am);
  Mat3 coupling{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) coupling[i][j] = ae[i][j] + ea[i][j];
  }

  SymTensor3 s = params.lambda * eps.trace() * SymTensor3::identity() + 2.0 * params.mu * eps +
                 vf * params.kappa * SymTensor3::from_matrix(coupling);

  const double vm = von_mises(s);
  if (vm > params.sigma_y) {
    const double p = s.trace() / 3.0;
    const SymTensor3 hydro = p * SymTensor3::identity();
    SymTensor3 dev = s - hydro;
    dev *= params.sigma_y / vm;
    s = dev + hydro;
  }
  return s;
}

TensorPath equivariant_oracle(const OracleParams& params, const ModelInput& input) {
  std::vector<SymTensor3> out;
  out.reserve(input.strain.size());
  for (const auto& eps : input.strain) {
    out.push_back(equivariant_oracle_step(params, input.a, input.vf, eps));
  }
  return TensorPath(std::move(out));
}

namespace {

std::uint64_t fold(std::uint64_t h, std::uint64_t v) { return mix64(h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2))); }

std::uint64_t quantize(double x) {
  return static_cast<std::uint64_t>(std::llround(x / kNoiseQuantum));
}

}  // namespace

TensorPath noisy_oracle(const OracleParams& params, const ModelInput& input) {
  TensorPath clean = equivariant_oracle(params, input);
  if (params.noise_amp == 0.0) return clean;

  std::uint64_t base = mix64(params.noise_seed ^ 0xD1B54A32D192ED03ULL);
  for (std::size_t k = 0; k < kVoigtSize; ++k) base = fold(base, quantize(input.a[k]));
  base = fold(base, quantize(input.vf));

  std::vector<SymTensor3> out(clean.begin(), clean.end());
  for (std::size_t t = 0; t < out.size(); ++t) {
    std::uint64_t h = fold(base, t);
    for (std::size_t k = 0; k < kVoigtSize; ++k) h = fold(h, quantize(input.strain[t][k]));
    for (std::size_t k = 0; k < kVoigtSize; ++k) {
      const double u = static_cast<double>(mix64(fold(h, k)) >> 11) * 0x1.0p-53;
      out[t][k] += params.noise_amp * (2.0 * u - 1.0);
    }
  }
  return TensorPath(std::move(out));
}

EquivariantOracle::EquivariantOracle(OracleParams params) : params_(params) {
  params_.validate();
  if (params_.noise_amp != 0.0) throw InvalidArgument("equivariant oracle requires noise_amp = 0");
}

TensorPath EquivariantOracle::predict(const ModelInput& input) const {
  return equivariant_oracle(params_, input);
}

NoisyOracle::NoisyOracle(OracleParams params) : params_(params) { params_.validate(); }

TensorPath NoisyOracle::predict(const ModelInput& input) const { return noisy_oracle(params_, input); }

}  // namespace tta
