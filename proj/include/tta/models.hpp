#pragma once

// Predictors f(a, vf, eps(t)) -> sigma(t).

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include "tta/tensor.hpp"

namespace tta {

struct ModelInput {
  SymTensor3 a;  ///< fiber orientation tensor
  double vf = 0.0;
  TensorPath strain;

  /// Throws InvariantViolation when vf is outside (0, 1) or `a` is non-finite.
  void validate() const;
};

/// Abstract predictor. Implementations return a path of the same length as
/// the input strain path.
class Model {
 public:
  virtual ~Model() = default;

  virtual TensorPath predict(const ModelInput& input) const = 0;
  virtual std::string name() const = 0;
  /// Whether predict() may be called from several threads at once.
  virtual bool concurrent() const { return true; }
};

/// Calls model.predict and enforces the output-length contract.
TensorPath predict(const Model& model, const ModelInput& input);

struct OracleParams {
  double lambda = 2400.0;  ///< MPa
  double mu = 1100.0;      ///< MPa
  double kappa = 30000.0;  ///< MPa, fiber coupling
  double sigma_y = 120.0;  ///< MPa, von Mises cap
  double noise_amp = 0.0;  ///< MPa
  std::uint64_t noise_seed = 0;

  void validate() const;
};

/// Memoryless isotropic tensor polynomial in (a, eps), so exactly equivariant:
///   S = lambda tr(eps) I + 2 mu eps + vf kappa (a eps + eps a)
/// with the deviator of S scaled back onto the von Mises cap when it exceeds sigma_y.
TensorPath equivariant_oracle(const OracleParams& params, const ModelInput& input);
SymTensor3 equivariant_oracle_step(const OracleParams& params, const SymTensor3& a, double vf,
                                   const SymTensor3& eps);

/// Equivariant oracle plus frame noise: every step and component receives a
/// perturbation uniform in [-noise_amp, noise_amp], hashed from the quantized
/// input (so each rotated copy of an input sees independent noise).
TensorPath noisy_oracle(const OracleParams& params, const ModelInput& input);

/// Quantization grid applied to inputs before hashing.
inline constexpr double kNoiseQuantum = 1e-9;

class EquivariantOracle final : public Model {
 public:
  explicit EquivariantOracle(OracleParams params = {});
  TensorPath predict(const ModelInput& input) const override;
  std::string name() const override { return "equivariant"; }
  const OracleParams& params() const { return params_; }

 private:
  OracleParams params_;
};

class NoisyOracle final : public Model {
 public:
  explicit NoisyOracle(OracleParams params);
  TensorPath predict(const ModelInput& input) const override;
  std::string name() const override { return "noisy"; }
  const OracleParams& params() const { return params_; }

 private:
  OracleParams params_;
};

struct ExternalModelConfig {
  std::string command;  ///< run through /bin/sh -c
  std::chrono::milliseconds timeout{30000};
};

/// Spawned process speaking newline-delimited JSON over stdin/stdout:
///   request  {"id": u64, "a": [6], "vf": x, "eps": [[6] x T]}
///   response {"id": u64, "sigma": [[6] x T]}
/// One request is in flight at a time; calls are serialized internally.
class ExternalModel final : public Model {
 public:
  explicit ExternalModel(ExternalModelConfig config);
  ~ExternalModel() override;

  ExternalModel(const ExternalModel&) = delete;
  ExternalModel& operator=(const ExternalModel&) = delete;

  TensorPath predict(const ModelInput& input) const override;
  std::string name() const override { return "external:" + config_.command; }
  bool concurrent() const override { return false; }

 private:
  struct Process;

  ExternalModelConfig config_;
  mutable std::mutex mutex_;
  mutable std::unique_ptr<Process> process_;
  mutable std::uint64_t next_id_ = 1;
};

TensorPath external_predict(const ExternalModelConfig& config, const ModelInput& input);

/// Request line (without trailing newline) for the external protocol.
std::string encode_request(std::uint64_t id, const ModelInput& input);
/// Parses and validates a response line; throws ExternalModelError.
TensorPath decode_response(const std::string& line, std::uint64_t expected_id,
                           std::size_t expected_steps);

}  // namespace tta
