#pragma once

#include "evgrid/feeder.hpp"

#include <filesystem>

#include "json.hpp"

namespace evgrid {

/// Feeder file schema: JSON with top-level keys `buses`, `lines`,
/// `transformers`, `loads` (plus `id`). Field names match the domain types;
/// phases are strings like "ABC". One file per feeder.
Feeder feeder_from_json(const nlohmann::ordered_json& j, const std::string& context);
nlohmann::ordered_json feeder_to_json(const Feeder& feeder);

/// Parses and validates. Throws ParseError on malformed input (naming the
/// offending field) and ConfigError when validation finds invariant breaches.
Feeder load_feeder(const std::filesystem::path& path);
void save_feeder(const Feeder& feeder, const std::filesystem::path& path);

} // namespace evgrid
