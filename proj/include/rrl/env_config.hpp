#pragma once
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rrl/env.hpp"

namespace rrl {

inline NavConfig config_from_json(const nlohmann::json& j, const std::string& origin) {
  try {
    NavConfig c;
    c.name = j.at("name").get<std::string>();
    auto vec2 = [](const nlohmann::json& v) -> Vec2 {
      return {v.at(0).get<double>(), v.at(1).get<double>()};
    };
    c.workspace.lo = vec2(j.at("workspace").at("lo"));
    c.workspace.hi = vec2(j.at("workspace").at("hi"));
    for (const auto& o : j.at("obstacles"))
      c.obstacles.push_back(Rect{vec2(o.at("lo")), vec2(o.at("hi"))});
    c.start_mean = vec2(j.at("start_mean"));
    const auto& cov = j.at("start_cov");
    for (int r = 0; r < 2; ++r)
      for (int k = 0; k < 2; ++k) c.start_cov[r][k] = cov.at(r).at(k).get<double>();
    c.goal = vec2(j.at("goal"));
    c.goal_radius = j.at("goal_radius").get<double>();
    c.sigma = j.at("sigma").get<double>();
    c.drag = j.at("drag").get<double>();
    c.max_action = j.at("max_action").get<double>();
    c.horizon = j.at("horizon").get<int>();
    c.collect_noise = j.value("collect_noise", 0.5);
    c.offline_transitions = j.value("offline_transitions", 8000);
    validate_config(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed env config " + origin + ": " + e.what());
  }
}

inline NavConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open env config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("cannot parse env config " + path + ": " + e.what());
  }
  return config_from_json(j, path);
}

// Accepts either a config file path or a short env name resolved
// against RRL_CONFIG_DIR and then the source tree's configs directory.
inline NavConfig resolve_env(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  if (name_or_path.find('/') != std::string::npos || name_or_path.ends_with(".json")) {
    if (fs::exists(name_or_path)) return load_config_file(name_or_path);
    throw std::runtime_error("env config not found: " + name_or_path);
  }
  std::vector<std::string> roots;
  if (const char* d = std::getenv("RRL_CONFIG_DIR")) roots.push_back(d);
#ifdef RRL_SOURCE_CONFIG_DIR
  roots.push_back(RRL_SOURCE_CONFIG_DIR);
#endif
  for (const auto& root : roots) {
    const fs::path p = fs::path(root) / (name_or_path + ".json");
    if (fs::exists(p)) return load_config_file(p.string());
  }
  throw std::runtime_error("unknown env '" + name_or_path +
                           "': no config found (set RRL_CONFIG_DIR or pass a file path)");
}

}  // namespace rrl
