#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "lml/model.hpp"

namespace lml {

// Text checkpoint:
//   line 1  "LMLCKPT 1"
//   line 2  JSON header {"model": ModelSpec, "pooling": tag, "extra": {...}}
//   then per parameter: "<name> <rows> <cols>" followed by one line of
//   hexadecimal floating-point values, so reloads are bit-exact.
//   last line "END"
void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());

Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

}  // namespace lml
