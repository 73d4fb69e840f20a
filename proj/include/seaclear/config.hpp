#pragma once

#include <string>

#include "seaclear/trainer.hpp"

namespace seaclear {

/// key=value run configuration mirroring TrainConfig.
///
/// Blank lines and '#' comments are ignored; whitespace around keys and
/// values is trimmed. An optional first key `profile` (desk or full)
/// selects the defaults the remaining keys override. Unknown or repeated
/// keys and malformed values throw ParameterError with the line number.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);

/// Every field, one per line, in a form parse_config reads back to an
/// equal config (doubles are printed with round-trip precision).
std::string serialize_config(const TrainConfig& config);

}  // namespace seaclear
