#pragma once

#include "gridrag/chunker.hpp"
#include "json.hpp"

namespace gridrag {

// payload_as_digest replaces the raw image payload with its SHA-256 digest
// (trace export rule); chunk_from_json only accepts full-payload records.
nlohmann::json chunk_to_json(const Chunk& chunk, bool payload_as_digest = false);
Chunk chunk_from_json(const nlohmann::json& j);

}  // namespace gridrag
