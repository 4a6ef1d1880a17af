#pragma once

#include <string>
#include <string_view>

#include "hlsga/mlp.hpp"

namespace hlsga {

/// {"input_dim":..,"hidden_sizes":[..],"output_dim":..,"w":[..]}; doubles
/// round-trip exactly.
std::string model_to_json(const Model& model);
/// Throws FormatError on malformed input, DimensionError on a w/arch mismatch.
Model model_from_json(std::string_view text);

}  // namespace hlsga
