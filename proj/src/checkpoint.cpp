#include "lml/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lml/baselines.hpp"
#include "lml/errors.hpp"

namespace lml {

namespace {
constexpr const char* kMagic = "LMLCKPT 1";

std::string pooling_tag(const ModelSpec& spec) {
  if (is_counting(spec.method)) return "count";
  return baselines::to_string(baselines::PoolingKind::for_model(spec));
}
}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path, const nlohmann::json& extra) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  nlohmann::json header = {{"model", to_json(model.spec())},
                           {"pooling", pooling_tag(model.spec())},
                           {"adam_step", model.params().step()},
                           {"extra", extra}};
  out << kMagic << '\n' << header.dump() << '\n';
  char buf[64];
  for (const auto& [name, e] : model.params().entries()) {
    out << name << ' ' << e.value.rows << ' ' << e.value.cols << '\n';
    for (std::size_t k = 0; k < e.value.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%a", e.value.data[k]);
      out << (k ? " " : "") << buf;
    }
    out << '\n';
  }
  out << "END\n";
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw IoError(path.string() + ": not a checkpoint file");
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed header: " + e.what());
  }
  Model model(model_spec_from_json(header.at("model")));
  model.params().set_step(header.value("adam_step", std::uint64_t{0}));
  if (extra != nullptr) *extra = header.value("extra", nlohmann::json::object());

  std::size_t loaded = 0;
  while (std::getline(in, line)) {
    if (line == "END") {
      if (loaded != model.params().entries().size()) {
        throw IoError(path.string() + ": checkpoint is missing parameters");
      }
      return model;
    }
    std::istringstream head(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(head >> name >> rows >> cols)) throw IoError(path.string() + ": bad parameter header '" + line + "'");
    auto& entry = model.params().at(name);
    if (entry.value.rows != rows || entry.value.cols != cols) {
      throw DimensionError(path.string() + ": parameter '" + name + "' has shape [" + std::to_string(rows) + "x" +
                           std::to_string(cols) + "], model expects " + entry.value.shape_string());
    }
    if (!std::getline(in, line)) throw IoError(path.string() + ": truncated values for " + name);
    std::istringstream values(line);
    std::string tok;
    std::size_t k = 0;
    while (values >> tok) {
      if (k >= entry.value.size()) throw IoError(path.string() + ": too many values for " + name);
      char* end = nullptr;
      entry.value.data[k++] = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw IoError(path.string() + ": bad value '" + tok + "'");
    }
    if (k != entry.value.size()) throw IoError(path.string() + ": too few values for " + name);
    ++loaded;
  }
  throw IoError(path.string() + ": missing END marker");
}

}  // namespace lml
