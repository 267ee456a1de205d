#pragma once

#include <filesystem>

#include <json.hpp>

#include "l1c/colorizer.hpp"

namespace l1c {

/// {"exact": bool, "sites": [{"x": int, "y": int, "u": float, "v": float}, ...]}
nlohmann::json scribbles_to_json(const ScribbleSet& s, int width);

/// Parses and validates against the image size. Throws EmptyScribbles or
/// InvalidScribbles.
ScribbleSet scribbles_from_json(const nlohmann::json& j, int width, int height);

ScribbleSet load_scribbles(const std::filesystem::path& path, int width, int height);
void save_scribbles(const ScribbleSet& s, int width, const std::filesystem::path& path);

}  // namespace l1c
