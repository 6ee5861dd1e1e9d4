// Copyright 2026 The texbias Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "texbias/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>

#include "texbias/error.hpp"
#include "texbias/io.hpp"

namespace texbias {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split \"" + s + "\"");
}

SplitCounts split_counts(std::size_t n) {
  if (n < 3) throw InvalidArgument("a cohort needs at least 3 subjects");
  SplitCounts c;
  c.val = std::max<std::size_t>(1, n * 15 / 100);
  c.test = std::max<std::size_t>(1, n * 15 / 100);
  c.train = n - c.val - c.test;
  return c;
}

std::vector<SubjectEntry> CohortManifest::in_split(Split s) const {
  std::vector<SubjectEntry> out;
  for (const auto& e : subjects)
    if (e.split == s) out.push_back(e);
  return out;
}

json to_json(const CohortManifest& m) {
  json subjects = json::array();
  for (const auto& e : m.subjects) {
    subjects.push_back({{"id", e.id},
                        {"volume", e.volume_file},
                        {"labels", e.label_file},
                        {"split", to_string(e.split)},
                        {"seed", e.seed},
                        {"scale", e.scale},
                        {"retries", e.retries}});
  }
  json j = {{"num_classes", m.num_classes}, {"seed", m.seed}, {"subjects", subjects}};
  if (!m.generator.is_null()) j["generator"] = m.generator;
  return j;
}

CohortManifest cohort_from_json(const json& j) {
  try {
    CohortManifest m;
    m.num_classes = j.at("num_classes").get<int>();
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("generator")) m.generator = j.at("generator");
    for (const auto& s : j.at("subjects")) {
      SubjectEntry e;
      e.id = s.at("id").get<std::string>();
      e.volume_file = s.at("volume").get<std::string>();
      e.label_file = s.at("labels").get<std::string>();
      e.split = split_from_string(s.at("split").get<std::string>());
      e.seed = s.value("seed", std::uint64_t{0});
      e.scale = s.value("scale", 1.0);
      e.retries = s.value("retries", 0);
      m.subjects.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed cohort manifest: ") + e.what());
  }
}

CohortManifest load_cohort_manifest(const fs::path& dir) {
  const auto path = dir / kCohortManifest;
  if (!fs::exists(path)) throw IoError("missing " + path.string());
  return cohort_from_json(read_json(path));
}

void save_cohort_manifest(const CohortManifest& m, const fs::path& dir) {
  write_json(dir / kCohortManifest, to_json(m));
}

std::string volume_stem(const fs::path& p) {
  std::string name = p.filename().string();
  for (std::string_view ext : {".vol.json", ".nii.gz", ".nii"}) {
    if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0)
      return name.substr(0, name.size() - ext.size());
  }
  return name;
}

bool is_volume_file(const fs::path& p) { return volume_stem(p) != p.filename().string(); }

bool is_label_file(const fs::path& p) {
  if (!is_volume_file(p)) return false;
  const auto stem = volume_stem(p);
  const std::string_view suffix = kLabelSuffix;
  return stem.size() > suffix.size() && stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<fs::path> list_intensity_volumes(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (is_volume_file(p) && !is_label_file(p)) out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

json read_json(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::uint32_t content_crc(const fs::path& dir, const std::vector<std::string>& files) {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& f : files) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(f.data()), uInt(f.size()));
    std::ifstream in(dir / f, std::ios::binary);
    if (!in) throw IoError("cannot open " + (dir / f).string());
    char buf[1 << 16];
    while (in) {
      in.read(buf, sizeof(buf));
      crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), uInt(in.gcount()));
    }
  }
  return std::uint32_t(crc);
}

std::uint64_t stable_hash(const std::string& s) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace texbias
