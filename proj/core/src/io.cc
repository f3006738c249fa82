#include "lafb/io.h"

#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace lafb {

using nlohmann::json;

json ToJson(const FeatureSchema& schema) {
  json kinds = json::array();
  json mono = json::array();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    kinds.push_back(ToString(schema.kinds()[i]));
    mono.push_back(ToString(schema.monotonicity()[i]));
  }
  return json{{"names", schema.names()}, {"kinds", kinds},
              {"monotonicity", mono}};
}

FeatureSchema SchemaFromJson(const json& j) {
  try {
    std::vector<std::string> names = j.at("names").get<std::vector<std::string>>();
    std::vector<FeatureKind> kinds;
    for (const auto& k : j.at("kinds")) {
      kinds.push_back(ParseFeatureKind(k.get<std::string>()));
    }
    std::vector<Monotonicity> mono;
    if (j.contains("monotonicity")) {
      for (const auto& m : j.at("monotonicity")) {
        mono.push_back(ParseMonotonicity(m.get<std::string>()));
      }
    } else {
      mono.assign(names.size(), Monotonicity::kIncreasing);
    }
    return FeatureSchema(std::move(names), std::move(kinds), std::move(mono));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed schema: ") + e.what());
  }
}

json ToJson(const Interaction& r, const FeatureSchema& schema) {
  json fam = json::object();
  for (std::size_t i = 0; i < r.familiarity.size(); ++i) {
    const std::string key =
        i < schema.size() ? schema.name(i) : "extra_" + std::to_string(i);
    fam[key] = r.familiarity.values[i];
  }
  return json{{"user_id", r.user_id},       {"item_id", r.item_id},
              {"creator_id", r.creator_id}, {"timestamp", r.timestamp},
              {"watch_time", r.watch_time}, {"urps", r.urps},
              {"familiarity", fam}};
}

namespace {

double NumberOrNaN(const json& v) {
  return v.is_number() ? v.get<double>()
                       : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

Interaction InteractionFromJson(const json& j, const FeatureSchema& schema) {
  Interaction r;
  try {
    r.user_id = j.at("user_id").get<std::string>();
    r.item_id = j.at("item_id").get<std::string>();
    r.creator_id = j.at("creator_id").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::int64_t>();
    r.watch_time = NumberOrNaN(j.at("watch_time"));
    r.urps = NumberOrNaN(j.at("urps"));
    const json& fam = j.at("familiarity");
    if (!fam.is_object()) throw ValidationError("familiarity must be an object");
    bool complete = true;
    for (const auto& name : schema.names()) {
      auto it = fam.find(name);
      if (it == fam.end()) {
        complete = false;
        continue;
      }
      r.familiarity.values.push_back(NumberOrNaN(*it));
    }
    if (complete) {
      for (auto it = fam.begin(); it != fam.end(); ++it) {
        bool known = false;
        for (const auto& name : schema.names()) known |= name == it.key();
        if (!known) r.familiarity.values.push_back(NumberOrNaN(it.value()));
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed interaction: ") + e.what());
  }
  return r;
}

void WriteLog(std::ostream& out, const InteractionLog& log,
              const FeatureSchema& schema) {
  for (const auto& r : log) out << ToJson(r, schema).dump() << '\n';
}

InteractionLog ReadLog(std::istream& in, const FeatureSchema& schema) {
  InteractionLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      throw ValidationError("invalid JSON on line " + std::to_string(line_no));
    }
    log.push_back(InteractionFromJson(j, schema));
  }
  return log;
}

void WriteLogFile(const std::filesystem::path& path, const InteractionLog& log,
                  const FeatureSchema& schema) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WriteLog(out, log, schema);
}

InteractionLog ReadLogFile(const std::filesystem::path& path,
                           const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  return ReadLog(in, schema);
}

json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    throw ValidationError("invalid JSON in " + path.string());
  }
  return j;
}

void WriteJsonFile(const std::filesystem::path& path, const json& j) {
  WriteTextFile(path, j.dump(2) + "\n");
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace lafb
