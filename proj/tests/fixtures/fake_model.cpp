// Line-protocol model used by the external adapter tests.
// Usage: fake_model <mode>; modes: echo, short, nan, badid, garbage, hang, exit.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "exit") return 3;
    if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
      return 0;
    }
    if (mode == "garbage") {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    const auto request = nlohmann::json::parse(line);
    nlohmann::json sigma = request.at("eps");
    if (mode == "short") sigma.erase(sigma.size() - 1);
    const std::uint64_t id = request.at("id").get<std::uint64_t>() + (mode == "badid" ? 1 : 0);
    std::string out = nlohmann::json{{"id", id}, {"sigma", sigma}}.dump();
    if (mode == "nan") {
      const auto pos = out.find("[[") + 2;
      out = out.substr(0, pos) + "NaN," + out.substr(out.find(',', pos) + 1);
    }
    std::cout << out << std::endl;
  }
  return 0;
}
