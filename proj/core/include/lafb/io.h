#pragma once

// JSON / JSON Lines persistence for schemas and interaction logs.
//
// Interaction record (one JSON object per line):
//   {"user_id": "...", "item_id": "...", "creator_id": "...",
//    "timestamp": 1700000000, "watch_time": 42.5, "urps": 1.7,
//    "familiarity": {"<feature name>": <number>, ...}}
//
// Schema file:
//   {"names": [...], "kinds": ["count"|"recency"|"affinity", ...],
//    "monotonicity": ["increasing"|"decreasing", ...]}

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "lafb/core.h"

namespace lafb {

nlohmann::json ToJson(const FeatureSchema& schema);
FeatureSchema SchemaFromJson(const nlohmann::json& j);

nlohmann::json ToJson(const Interaction& interaction,
                      const FeatureSchema& schema);
// Familiarity keys are matched against the schema. Missing or unknown keys
// yield a vector whose arity differs from the schema, which ValidateLog then
// reports with the record index.
Interaction InteractionFromJson(const nlohmann::json& j,
                                const FeatureSchema& schema);

void WriteLog(std::ostream& out, const InteractionLog& log,
              const FeatureSchema& schema);
InteractionLog ReadLog(std::istream& in, const FeatureSchema& schema);

void WriteLogFile(const std::filesystem::path& path, const InteractionLog& log,
                  const FeatureSchema& schema);
InteractionLog ReadLogFile(const std::filesystem::path& path,
                           const FeatureSchema& schema);

nlohmann::json ReadJsonFile(const std::filesystem::path& path);
// Pretty-printed with a trailing newline. Creates parent directories.
void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace lafb
