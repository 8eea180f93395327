#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "xfer/lti.hpp"

namespace xfer {

// JSON text with keys "A", "B", "C" (row-major nested arrays), "dt",
// "input_labels" and "output_labels". Doubles are written in shortest
// round-trip form, so save/load is bit-faithful for finite values.
std::string model_to_json(const StateSpaceModel& model);
StateSpaceModel model_from_json(std::string_view text);

void save_model(const StateSpaceModel& model, const std::filesystem::path& path);
StateSpaceModel load_model(const std::filesystem::path& path);

}  // namespace xfer
