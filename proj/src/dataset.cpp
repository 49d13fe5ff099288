#include "tta/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tta/errors.hpp"

namespace tta {

using json = nlohmann::json;

namespace {

std::string where(std::size_t line, const std::string& id, const std::string& field) {
  std::string s = "line " + std::to_string(line);
  if (!id.empty()) s += ", sample '" + id + "'";
  if (!field.empty()) s += ", field '" + field + "'";
  return s;
}

Voigt6 read_voigt(const json& j, std::size_t line, const std::string& id, const std::string& field) {
  if (!j.is_array() || j.size() != kVoigtSize) {
    throw ParseError(where(line, id, field) + ": expected an array of 6 numbers");
  }
  Voigt6 v{};
  for (std::size_t k = 0; k < kVoigtSize; ++k) {
    if (!j[k].is_number()) throw ParseError(where(line, id, field) + ": expected numbers");
    v[k] = j[k].get<double>();
    if (!std::isfinite(v[k])) throw InvariantViolation(where(line, id, field) + ": non-finite value");
  }
  return v;
}

TensorPath read_path(const json& j, std::size_t line, const std::string& id, const std::string& field) {
  if (!j.is_array() || j.empty()) {
    throw ParseError(where(line, id, field) + ": expected a non-empty array of 6-vectors");
  }
  std::vector<SymTensor3> steps;
  steps.reserve(j.size());
  for (const auto& row : j) steps.emplace_back(read_voigt(row, line, id, field));
  return TensorPath(std::move(steps));
}

json path_json(const TensorPath& p) {
  json arr = json::array();
  for (const auto& x : p) arr.push_back(x.voigt());
  return arr;
}

Sample parse_line(const std::string& text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(where(line, "", "") + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(where(line, "", "") + ": expected a JSON object");
  for (const char* key : {"id", "a", "vf", "eps"}) {
    if (!j.contains(key)) throw ParseError(where(line, "", key) + ": missing");
  }
  if (!j["id"].is_string()) throw ParseError(where(line, "", "id") + ": expected a string");
  Sample s;
  s.id = j["id"].get<std::string>();
  s.input.a = SymTensor3(read_voigt(j["a"], line, s.id, "a"));
  if (!is_orientation_tensor(s.input.a)) {
    throw InvariantViolation(where(line, s.id, "a") +
                             ": orientation tensor needs trace 1 and non-negative eigenvalues");
  }
  if (!j["vf"].is_number()) throw ParseError(where(line, s.id, "vf") + ": expected a number");
  s.input.vf = j["vf"].get<double>();
  if (!(s.input.vf > 0.0 && s.input.vf < 1.0)) {
    throw InvariantViolation(where(line, s.id, "vf") + ": must lie in (0, 1)");
  }
  s.input.strain = read_path(j["eps"], line, s.id, "eps");
  if (j.contains("sigma") && !j["sigma"].is_null()) {
    s.target = read_path(j["sigma"], line, s.id, "sigma");
    if (s.target->size() != s.input.strain.size()) {
      throw InvariantViolation(where(line, s.id, "sigma") + ": length " + std::to_string(s.target->size()) +
                               " differs from strain length " + std::to_string(s.input.strain.size()));
    }
  }
  return s;
}

}  // namespace

std::vector<Sample> parse_dataset(std::istream& in) {
  std::vector<Sample> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_line(text, line));
  }
  return out;
}

std::vector<Sample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path.string());
  auto samples = parse_dataset(in);
  if (samples.empty()) throw ParseError("dataset " + path.string() + " has no samples");
  return samples;
}

std::string serialize_sample(const Sample& s) {
  json j;
  j["id"] = s.id;
  j["a"] = s.input.a.voigt();
  j["vf"] = s.input.vf;
  j["eps"] = path_json(s.input.strain);
  if (s.target) j["sigma"] = path_json(*s.target);
  return j.dump();
}

void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& s : samples) out << serialize_sample(s) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

TensorPath uniaxial_cycle(std::size_t steps, double peak) {
  if (steps < 5) throw InvalidArgument("uniaxial cycle needs at least five steps");
  // Piecewise-linear through knots 0 -> +peak -> -peak -> 0, with both peaks on a step.
  const std::size_t last = steps - 1;
  const std::size_t up = (last + 2) / 4;
  const std::size_t down = last - up;
  std::vector<SymTensor3> out(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    double e;
    if (t <= up) {
      e = peak * static_cast<double>(t) / static_cast<double>(up);
    } else if (t <= down) {
      e = peak * (1.0 - 2.0 * static_cast<double>(t - up) / static_cast<double>(down - up));
    } else {
      e = -peak * static_cast<double>(last - t) / static_cast<double>(last - down);
    }
    out[t] = SymTensor3::diag(e, 0.0, 0.0);
  }
  return TensorPath(std::move(out));
}

namespace {

TensorPath random_walk(RotationStream& stream, const SyntheticOptions& opt) {
  Voigt6 drift{};
  for (auto& d : drift) d = opt.drift_scale * (2.0 * stream.next_uniform() - 1.0);
  std::vector<SymTensor3> steps(opt.steps);
  Voigt6 acc{};
  double peak = 0.0;
  for (std::size_t t = 0; t < opt.steps; ++t) {
    for (std::size_t k = 0; k < kVoigtSize; ++k) {
      acc[k] += drift[k] + opt.noise_scale * stream.next_normal();
      peak = std::max(peak, std::abs(acc[k]));
    }
    steps[t] = SymTensor3(acc);
  }
  const double scale = peak > 0.0 ? opt.max_strain / peak : 0.0;
  for (auto& s : steps) s *= scale;
  return TensorPath(std::move(steps));
}

}  // namespace

std::vector<Sample> generate_synthetic(const SyntheticOptions& opt, const RotationStream& stream) {
  if (opt.count == 0 || opt.steps == 0) throw InvalidArgument("sample count and steps must be >= 1");
  if (!(opt.max_strain > 0.0)) throw InvalidArgument("max strain must be positive");
  opt.truth.validate();
  std::vector<Sample> out;
  out.reserve(opt.count);
  for (std::size_t m = 0; m < opt.count; ++m) {
    RotationStream sub = stream.split(m);
    Sample s;
    s.id = (opt.uniaxial ? "uniaxial-" : "sample-") + std::to_string(m);
    s.input.a = sample_orientation_tensor(sub);
    s.input.vf = sample_volume_fraction(sub);
    s.input.strain = opt.uniaxial ? uniaxial_cycle(opt.steps, opt.uniaxial_peak) : random_walk(sub, opt);
    s.target = equivariant_oracle(opt.truth, s.input);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace tta
