#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "tta/errors.hpp"
#include "tta/models.hpp"

namespace tta {

using Kind = ExternalModelError::Kind;
using json = nlohmann::json;

std::string encode_request(std::uint64_t id, const ModelInput& input) {
  json eps = json::array();
  for (const auto& step : input.strain) eps.push_back(step.voigt());
  json req = {{"id", id}, {"a", input.a.voigt()}, {"vf", input.vf}, {"eps", std::move(eps)}};
  return req.dump();
}

namespace {

// Bare NaN / Infinity tokens (as emitted by e.g. Python's json module) are not
// JSON; recognise them so the diagnostic names the real problem.
bool has_non_finite_token(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (line.compare(i, 3, "NaN") == 0 || line.compare(i, 8, "Infinity") == 0) {
      return true;
    }
  }
  return false;
}

}  // namespace

TensorPath decode_response(const std::string& line, std::uint64_t expected_id,
                           std::size_t expected_steps) {
  if (has_non_finite_token(line)) {
    throw ExternalModelError(Kind::non_finite, "external model response contains non-finite values");
  }
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ExternalModelError(Kind::malformed, std::string("malformed response line: ") + e.what());
  } catch (const json::out_of_range& e) {
    // Number literals beyond the double range.
    throw ExternalModelError(Kind::non_finite, std::string("external model response overflows: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("id") || !doc.contains("sigma")) {
    throw ExternalModelError(Kind::malformed, "response must be an object with 'id' and 'sigma'");
  }
  if (!doc["id"].is_number_unsigned() && !doc["id"].is_number_integer()) {
    throw ExternalModelError(Kind::malformed, "response 'id' must be an integer");
  }
  const auto id = doc["id"].get<std::uint64_t>();
  if (id != expected_id) {
    throw ExternalModelError(Kind::id_mismatch, "response id " + std::to_string(id) +
                                                    " does not match request id " +
                                                    std::to_string(expected_id));
  }
  const json& sigma = doc["sigma"];
  if (!sigma.is_array()) throw ExternalModelError(Kind::malformed, "'sigma' must be an array");
  if (sigma.size() != expected_steps) {
    throw ExternalModelError(Kind::length, "response has " + std::to_string(sigma.size()) +
                                               " steps, expected " + std::to_string(expected_steps));
  }
  std::vector<SymTensor3> steps;
  steps.reserve(sigma.size());
  for (std::size_t t = 0; t < sigma.size(); ++t) {
    const json& row = sigma[t];
    if (!row.is_array() || row.size() != kVoigtSize) {
      throw ExternalModelError(Kind::malformed,
                               "step " + std::to_string(t) + " must have 6 components");
    }
    Voigt6 v{};
    for (std::size_t k = 0; k < kVoigtSize; ++k) {
      if (!row[k].is_number()) {
        throw ExternalModelError(Kind::malformed, "step " + std::to_string(t) + " has a non-numeric component");
      }
      v[k] = row[k].get<double>();
      if (!std::isfinite(v[k])) {
        throw ExternalModelError(Kind::non_finite,
                                 "step " + std::to_string(t) + " has a non-finite component");
      }
    }
    steps.emplace_back(v);
  }
  return TensorPath(std::move(steps));
}

// ---------------------------------------------------------------------------

struct ExternalModel::Process {
  pid_t pid = -1;
  int fd = -1;  // parent end of a socketpair wired to the child's stdin and stdout
  std::string buffer;

  explicit Process(const std::string& command) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
      throw ExternalModelError(Kind::spawn, std::string("socketpair: ") + std::strerror(errno));
    }
    pid = ::fork();
    if (pid < 0) {
      ::close(sv[0]);
      ::close(sv[1]);
      throw ExternalModelError(Kind::spawn, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
      // Own process group, so the shell and anything it starts can be killed together.
      ::setpgid(0, 0);
      ::dup2(sv[1], STDIN_FILENO);
      ::dup2(sv[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(sv[1]);
    fd = sv[0];
  }

  ~Process() {
    if (fd >= 0) ::close(fd);
    if (pid > 0) {
      // Closing the socket is the shutdown signal; give the child a moment.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid, nullptr, WNOHANG) == pid) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
    }
  }

  void write_line(const std::string& line) {
    std::string data = line + '\n';
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ExternalModelError(errno == EPIPE ? Kind::process_exit : Kind::io,
                                 std::string("writing request: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto nl = buffer.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw ExternalModelError(Kind::timeout, "external model timed out");
      pollfd p{fd, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ExternalModelError(Kind::io, std::string("poll: ") + std::strerror(errno));
      }
      if (rc == 0) throw ExternalModelError(Kind::timeout, "external model timed out");
      char chunk[65536];
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ExternalModelError(Kind::io, std::string("reading response: ") + std::strerror(errno));
      }
      if (n == 0) throw ExternalModelError(Kind::process_exit, "external model process exited");
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }
};

ExternalModel::ExternalModel(ExternalModelConfig config) : config_(std::move(config)) {
  if (config_.command.empty()) throw InvalidArgument("external model command is empty");
}

ExternalModel::~ExternalModel() = default;

TensorPath ExternalModel::predict(const ModelInput& input) const {
  std::lock_guard lock(mutex_);
  if (!process_) process_ = std::make_unique<Process>(config_.command);
  const std::uint64_t id = next_id_++;
  try {
    process_->write_line(encode_request(id, input));
    const std::string line = process_->read_line(config_.timeout);
    return decode_response(line, id, input.strain.size());
  } catch (const ExternalModelError&) {
    // The stream position is unknown after a failure; start over next call.
    process_.reset();
    throw;
  }
}

TensorPath external_predict(const ExternalModelConfig& config, const ModelInput& input) {
  return ExternalModel(config).predict(input);
}

}  // namespace tta
