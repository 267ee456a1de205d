#include "l1c/scribble_io.hpp"

#include <fstream>

#include "l1c/error.hpp"

namespace l1c {

nlohmann::json scribbles_to_json(const ScribbleSet& s, int width) {
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& site : s.sites) {
    sites.push_back({{"x", site.index % width}, {"y", site.index / width}, {"u", site.u}, {"v", site.v}});
  }
  return {{"exact", s.exact}, {"sites", std::move(sites)}};
}

ScribbleSet scribbles_from_json(const nlohmann::json& j, int width, int height) {
  if (!j.is_object() || !j.contains("sites") || !j["sites"].is_array()) {
    throw Error(ErrorCode::InvalidScribbles, "scribble JSON must be an object with a 'sites' array");
  }
  ScribbleSet s;
  if (j.contains("exact")) {
    if (!j["exact"].is_boolean()) throw Error(ErrorCode::InvalidScribbles, "'exact' must be a boolean");
    s.exact = j["exact"].get<bool>();
  }
  for (const auto& site : j["sites"]) {
    if (!site.is_object() || !site.contains("x") || !site.contains("y") || !site.contains("u") ||
        !site.contains("v") || !site["x"].is_number_integer() || !site["y"].is_number_integer() ||
        !site["u"].is_number() || !site["v"].is_number()) {
      throw Error(ErrorCode::InvalidScribbles, "each site needs integer x, y and numeric u, v");
    }
    const auto x = site["x"].get<long long>();
    const auto y = site["y"].get<long long>();
    if (x < 0 || y < 0 || x >= width || y >= height) {
      throw Error(ErrorCode::InvalidScribbles, "scribble site outside the image");
    }
    s.sites.push_back({static_cast<int>(y * width + x), site["u"].get<double>(), site["v"].get<double>()});
  }
  s.validate(width, height);
  return s;
}

ScribbleSet load_scribbles(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open scribble file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidScribbles, std::string("scribble JSON parse error: ") + e.what());
  }
  return scribbles_from_json(j, width, height);
}

void save_scribbles(const ScribbleSet& s, int width, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IOFailure, "cannot open for writing: " + path.string());
  out << scribbles_to_json(s, width).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IOFailure, "write failed: " + path.string());
}

}  // namespace l1c
