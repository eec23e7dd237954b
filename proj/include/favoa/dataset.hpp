// SPDX-License-Identifier: Apache-2.0
//
// On-disk dataset: a JSON manifest listing scenes and face tracks, plus one
// face-feature file and one audio-feature file per scene.
//
// Feature file layout (little-endian):
//   "FVFEAT01"  u64 dim  u64 count  f64[count * dim]
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "favoa/binary_io.hpp"
#include "favoa/context.hpp"
#include "favoa/metrics.hpp"

namespace favoa {

namespace fs = std::filesystem;

enum class AmbiguityMode { clear, ambiguous };

inline std::string_view mode_name(AmbiguityMode m) {
  return m == AmbiguityMode::clear ? "clear" : "ambiguous";
}

inline AmbiguityMode parse_mode(std::string_view s) {
  if (s == "clear") return AmbiguityMode::clear;
  if (s == "ambiguous") return AmbiguityMode::ambiguous;
  throw ParseError("unknown scene mode '" + std::string(s) + "'");
}

struct FeatureTable {
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t count() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(std::size_t i) const {
    require(i < count(), "feature row ", i, " out of range (", count(), " rows)");
    return std::span<const double>(values).subspan(i * dim, dim);
  }
  std::size_t append(std::span<const double> r) {
    if (r.size() != dim) {
      throw DimensionError(detail::concat_message("feature row of dim ", r.size(),
                                                  " appended to table of dim ", dim));
    }
    values.insert(values.end(), r.begin(), r.end());
    return count() - 1;
  }
};

inline void write_feature_file(const fs::path& path, const FeatureTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write feature file " + path.string());
  io::write_magic(out, "FVFEAT01");
  io::write_le<std::uint64_t>(out, table.dim);
  io::write_le<std::uint64_t>(out, table.count());
  for (double v : table.values) io::write_le<double>(out, v);
}

inline FeatureTable read_feature_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open feature file " + path.string());
  io::expect_magic(in, "FVFEAT01", path.string());
  FeatureTable t;
  t.dim = io::read_le<std::uint64_t>(in, "feature dim");
  const auto count = io::read_le<std::uint64_t>(in, "feature count");
  t.values.resize(t.dim * count);
  for (double& v : t.values) v = io::read_le<double>(in, "feature values");
  return t;
}

struct Scene {
  std::size_t id = 0;
  std::string split = "train";
  AmbiguityMode mode = AmbiguityMode::clear;
  long first_frame = 0;
  long last_frame = 0;
  std::vector<SpeakerTrack> tracks;             // ascending track_id
  std::vector<std::map<long, RawLabel>> labels;  // parallel to tracks
  FeatureTable face;   // rows referenced by SpeakerTrack::frames
  FeatureTable audio;  // one row per frame, index frame - first_frame
};

struct EntryRef {
  std::size_t scene = 0;
  std::size_t track = 0;  // index into Scene::tracks
  long frame = 0;
};

/// What the model needs to classify one (frame, speaker) instance.
struct EntryContext {
  std::size_t scene = 0;
  std::span<const SpeakerTrack> tracks;
  long clip_first = 0;
  long clip_last = 0;
  int target_id = 0;
  long frame = 0;
};

struct Dataset {
  std::uint64_t seed = 0;
  std::size_t face_dim = 0;
  std::size_t audio_dim = 0;
  std::vector<Scene> scenes;

  /// Every (scene, track, present frame); empty split/mode selects all.
  std::vector<EntryRef> entries(std::string_view split = {},
                                std::optional<AmbiguityMode> mode = std::nullopt) const {
    std::vector<EntryRef> out;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const Scene& scene = scenes[s];
      if (!split.empty() && scene.split != split) continue;
      if (mode && scene.mode != *mode) continue;
      for (std::size_t t = 0; t < scene.tracks.size(); ++t)
        for (const auto& [frame, ref] : scene.tracks[t].frames) out.push_back({s, t, frame});
    }
    return out;
  }

  RawLabel label(const EntryRef& e) const { return scenes.at(e.scene).labels.at(e.track).at(e.frame); }

  std::string entry_id(const EntryRef& e) const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "s%05zu_t%05d_f%06ld", scenes.at(e.scene).id,
                  scenes.at(e.scene).tracks.at(e.track).track_id, e.frame);
    return buf;
  }

  EntryContext context(const EntryRef& e) const {
    const Scene& scene = scenes.at(e.scene);
    return {e.scene, scene.tracks, scene.first_frame, scene.last_frame,
            scene.tracks.at(e.track).track_id, e.frame};
  }
};

inline std::string feature_file_name(std::size_t scene_id, const char* kind) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "features/scene_%05zu_%s.f64", scene_id, kind);
  return buf;
}

/// Writes `dir/manifest.json` and `dir/features/*`.
inline void write_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir / "features");
  nlohmann::json manifest;
  manifest["format"] = "favoa-manifest";
  manifest["version"] = 1;
  manifest["seed"] = data.seed;
  manifest["face_dim"] = data.face_dim;
  manifest["audio_dim"] = data.audio_dim;
  manifest["scenes"] = nlohmann::json::array();
  for (const Scene& scene : data.scenes) {
    nlohmann::json js;
    js["id"] = scene.id;
    js["split"] = scene.split;
    js["mode"] = mode_name(scene.mode);
    js["first_frame"] = scene.first_frame;
    js["last_frame"] = scene.last_frame;
    js["face_features"] = feature_file_name(scene.id, "face");
    js["audio_features"] = feature_file_name(scene.id, "audio");
    js["tracks"] = nlohmann::json::array();
    for (std::size_t t = 0; t < scene.tracks.size(); ++t) {
      nlohmann::json jt;
      jt["track_id"] = scene.tracks[t].track_id;
      std::vector<long> frames;
      std::vector<std::size_t> rows;
      std::vector<std::string> labels;
      for (const auto& [frame, ref] : scene.tracks[t].frames) {
        frames.push_back(frame);
        rows.push_back(ref);
        labels.emplace_back(label_name(scene.labels[t].at(frame)));
      }
      jt["frames"] = frames;
      jt["rows"] = rows;
      jt["labels"] = labels;
      js["tracks"].push_back(std::move(jt));
    }
    write_feature_file(dir / feature_file_name(scene.id, "face"), scene.face);
    write_feature_file(dir / feature_file_name(scene.id, "audio"), scene.audio);
    manifest["scenes"].push_back(std::move(js));
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in " + dir.string());
  out << manifest.dump(1) << '\n';
}

inline Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  const fs::path root = manifest_path.parent_path();
  Dataset data;
  try {
    if (manifest.at("format") != "favoa-manifest" || manifest.at("version") != 1)
      throw ParseError(manifest_path.string() + ": unsupported manifest format/version");
    data.seed = manifest.at("seed").get<std::uint64_t>();
    data.face_dim = manifest.at("face_dim").get<std::size_t>();
    data.audio_dim = manifest.at("audio_dim").get<std::size_t>();
    for (const auto& js : manifest.at("scenes")) {
      Scene scene;
      scene.id = js.at("id").get<std::size_t>();
      scene.split = js.at("split").get<std::string>();
      scene.mode = parse_mode(js.at("mode").get<std::string>());
      scene.first_frame = js.at("first_frame").get<long>();
      scene.last_frame = js.at("last_frame").get<long>();
      scene.face = read_feature_file(root / js.at("face_features").get<std::string>());
      scene.audio = read_feature_file(root / js.at("audio_features").get<std::string>());
      if (scene.face.dim != data.face_dim || scene.audio.dim != data.audio_dim)
        throw DimensionError("scene " + std::to_string(scene.id) +
                             ": feature file dims disagree with manifest");
      if (scene.audio.count() != static_cast<std::size_t>(scene.last_frame - scene.first_frame + 1))
        throw DimensionError("scene " + std::to_string(scene.id) +
                             ": audio feature count does not match frame range");
      for (const auto& jt : js.at("tracks")) {
        SpeakerTrack track;
        track.track_id = jt.at("track_id").get<int>();
        const auto frames = jt.at("frames").get<std::vector<long>>();
        const auto rows = jt.at("rows").get<std::vector<std::size_t>>();
        const auto labels = jt.at("labels").get<std::vector<std::string>>();
        if (frames.size() != rows.size() || frames.size() != labels.size() || frames.empty())
          throw ParseError("track " + std::to_string(track.track_id) +
                           ": frames/rows/labels lengths differ or are empty");
        std::map<long, RawLabel> label_map;
        for (std::size_t i = 0; i < frames.size(); ++i) {
          if (rows[i] >= scene.face.count())
            throw ParseError("track " + std::to_string(track.track_id) + ": row out of range");
          track.frames[frames[i]] = rows[i];
          label_map[frames[i]] = parse_raw_label(labels[i]);
        }
        scene.tracks.push_back(std::move(track));
        scene.labels.push_back(std::move(label_map));
      }
      data.scenes.push_back(std::move(scene));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  return data;
}

}  // namespace favoa
