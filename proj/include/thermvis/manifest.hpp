#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thermvis/error.hpp"
#include "thermvis/image.hpp"
#include "thermvis/png_io.hpp"

namespace thermvis {

struct ManifestEntry {
  std::string id;
  std::string file;  ///< relative to the manifest root
  Domain domain = Domain::IR;
  std::vector<BBox> boxes;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// JSON-lines annotation manifest. One object per line:
/// {"id": ..., "file": ..., "domain": "IR"|"VI", "boxes": [[x,y,w,h], ...]}
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry& e) const { return root / e.file; }

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.entries == b.entries;
  }
};

inline nlohmann::json to_json(const ManifestEntry& e) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : e.boxes) boxes.push_back({b.x, b.y, b.w, b.h});
  return {{"id", e.id}, {"file", e.file}, {"domain", to_string(e.domain)}, {"boxes", boxes}};
}

inline ManifestEntry entry_from_json(const nlohmann::json& j) {
  ManifestEntry e;
  try {
    e.id = j.at("id").get<std::string>();
    e.file = j.at("file").get<std::string>();
    e.domain = parse_domain(j.at("domain").get<std::string>());
    for (const auto& b : j.at("boxes")) {
      if (!b.is_array() || b.size() != 4) throw DataError("box must be [x,y,w,h]");
      BBox box{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
      if (box.w < 1 || box.h < 1) throw DataError("box extent must be positive");
      e.boxes.push_back(box);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed manifest entry: ") + ex.what());
  }
  return e;
}

/// Parses a manifest; the root is the manifest's directory.
inline DatasetManifest read_manifest(const std::filesystem::path& path,
                                     bool check_files = true) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  DatasetManifest m;
  m.root = path.parent_path();
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
    ManifestEntry e = entry_from_json(j);
    if (!ids.insert(e.id).second) {
      throw DataError(path.string() + ": duplicate id '" + e.id + "'");
    }
    if (check_files && !std::filesystem::exists(m.resolve(e))) {
      throw DataError(path.string() + ": missing file '" + m.resolve(e).string() + "'");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  for (const auto& e : m.entries) out << to_json(e).dump() << '\n';
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

/// Reads the image behind one entry and validates its boxes.
inline Sample load_sample(const DatasetManifest& m, const ManifestEntry& e) {
  Sample s{read_png(m.resolve(e)), e.boxes, e.domain, e.id};
  s.validate();
  return s;
}

}  // namespace thermvis
