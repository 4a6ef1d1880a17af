#include "hlsga/serialize.hpp"

#include <json.hpp>

#include "hlsga/errors.hpp"

namespace hlsga {

std::string model_to_json(const Model& model) {
  nlohmann::json j;
  j["input_dim"] = model.arch.input_dim;
  j["hidden_sizes"] = model.arch.hidden_sizes;
  j["output_dim"] = model.arch.output_dim;
  j["w"] = model.w;
  return j.dump();
}

Model model_from_json(std::string_view text) {
  Model m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.arch.input_dim = j.at("input_dim").get<std::size_t>();
    m.arch.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::size_t>>();
    m.arch.output_dim = j.at("output_dim").get<std::size_t>();
    m.w = j.at("w").get<Vector>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model json: ") + e.what());
  }
  m.arch.validate();
  if (m.w.size() != m.arch.param_count()) {
    throw DimensionError("model json: expected " + std::to_string(m.arch.param_count()) +
                         " parameters, got " + std::to_string(m.w.size()));
  }
  if (!all_finite(m.w)) throw FormatError("model json: non-finite parameter");
  return m;
}

}  // namespace hlsga
