#pragma once

#include "cda/wire/codec.hpp"

#include <nlohmann/json.hpp>

namespace cda::wire {

/// Field document: {"type": "bsm"|"advisory"|"toll", <field>: <integer>, ...}.
/// Missing fields take their struct defaults (sentinels for BSM).
/// Throws std::invalid_argument for an unknown type or a non-integer field.
Payload payload_from_json(const nlohmann::json& doc);

nlohmann::json payload_to_json(const Payload& message);

}  // namespace cda::wire
