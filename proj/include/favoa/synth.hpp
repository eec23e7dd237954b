// SPDX-License-Identifier: Apache-2.0
//
// Synthetic scenes with controllable face-voice correspondence.
//
// Each person carries an abstract attribute code. Face rows hold
//   [ code + noise | mouth channel | noise ]
// and the per-frame audio row holds
//   [ v+ | v- | noise ] + noise,  v = mean of voice(code) over audible speakers
// (the voice is split into positive and negative parts so it survives a ReLU)
// where voice() is a fixed random linear map shared by the whole dataset.
// In clear scenes the mouth channel tracks speech; in ambiguous scenes it is
// unit noise independent of every label, so only matching the voice against
// the face code can tell who is talking.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include <json.hpp>

#include "favoa/dataset.hpp"
#include "favoa/layers.hpp"

namespace favoa {

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t scenes = 40;
  std::size_t min_persons = 1;
  std::size_t max_persons = 3;
  std::size_t frames = 20;
  double noise = 0.1;                 // sigma of additive noise on informative channels
  double ambiguous_fraction = 0.5;
  double val_fraction = 0.3;
  double speaking_prevalence = 0.4;   // stationary P(person speaking)
  double not_audible_rate = 0.05;     // P(speech is not audible | speaking)
  double persistence = 0.8;           // P(speaker keeps talking next frame)
  double gap_rate = 0.05;             // P(face missing at an interior frame)
  std::size_t code_dim = 8;
  std::size_t face_dim = 32;
  std::size_t audio_dim = 16;
  double mouth_amplitude = 1.0;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("generator config: " + m); };
    if (scenes == 0 || frames == 0) fail("scenes and frames must be positive");
    if (min_persons == 0 || min_persons > max_persons) fail("need 1 <= min_persons <= max_persons");
    if (noise < 0) fail("noise must be non-negative");
    for (double f : {ambiguous_fraction, val_fraction, not_audible_rate, gap_rate})
      if (f < 0 || f > 1) fail("fractions must lie in [0, 1]");
    if (speaking_prevalence <= 0 || speaking_prevalence >= 1) fail("prevalence must lie in (0, 1)");
    if (persistence < 0 || persistence >= 1) fail("persistence must lie in [0, 1)");
    if ((1 - persistence) * speaking_prevalence / (1 - speaking_prevalence) > 1)
      fail("prevalence too high for the requested persistence");
    if (code_dim == 0 || face_dim < 2 * code_dim || audio_dim < 2 * code_dim)
      fail("need face_dim >= 2 * code_dim and audio_dim >= 2 * code_dim");
  }
};

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"seed", c.seed},
       {"scenes", c.scenes},
       {"min_persons", c.min_persons},
       {"max_persons", c.max_persons},
       {"frames", c.frames},
       {"noise", c.noise},
       {"ambiguous_fraction", c.ambiguous_fraction},
       {"val_fraction", c.val_fraction},
       {"speaking_prevalence", c.speaking_prevalence},
       {"not_audible_rate", c.not_audible_rate},
       {"persistence", c.persistence},
       {"gap_rate", c.gap_rate},
       {"code_dim", c.code_dim},
       {"face_dim", c.face_dim},
       {"audio_dim", c.audio_dim},
       {"mouth_amplitude", c.mouth_amplitude}};
}

inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  c.seed = j.value("seed", c.seed);
  c.scenes = j.value("scenes", c.scenes);
  c.min_persons = j.value("min_persons", c.min_persons);
  c.max_persons = j.value("max_persons", c.max_persons);
  c.frames = j.value("frames", c.frames);
  c.noise = j.value("noise", c.noise);
  c.ambiguous_fraction = j.value("ambiguous_fraction", c.ambiguous_fraction);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.speaking_prevalence = j.value("speaking_prevalence", c.speaking_prevalence);
  c.not_audible_rate = j.value("not_audible_rate", c.not_audible_rate);
  c.persistence = j.value("persistence", c.persistence);
  c.gap_rate = j.value("gap_rate", c.gap_rate);
  c.code_dim = j.value("code_dim", c.code_dim);
  c.face_dim = j.value("face_dim", c.face_dim);
  c.audio_dim = j.value("audio_dim", c.audio_dim);
  c.mouth_amplitude = j.value("mouth_amplitude", c.mouth_amplitude);
}

enum class MouthBehaviour {
  follows_speech,  // moves exactly when the person talks
  mimics_speech,   // moves although the person is silent
  attenuated,      // low-resolution face: motion scaled far below the noise floor
};

inline constexpr double kAttenuatedMouthGain = 0.05;

struct PersonLatent {
  int track_id = 0;
  std::vector<double> code;
  MouthBehaviour mouth = MouthBehaviour::follows_speech;
};

struct SyntheticScene {
  std::vector<PersonLatent> persons;
  long first_frame = 0;
  long last_frame = 0;
  std::map<std::pair<int, long>, RawLabel> speaking;  // every (track, frame)
  std::map<int, std::vector<long>> visible;           // frames with a face, per track
  AmbiguityMode mode = AmbiguityMode::clear;
  std::string split = "train";

  RawLabel label(int track, long frame) const { return speaking.at({track, frame}); }
};

namespace detail {

inline std::vector<double> normal_vector(std::size_t n, double sigma, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = sigma * dist(rng);
  return v;
}

inline std::vector<double> voice_map(std::size_t code_dim, Rng& rng) {
  return normal_vector(code_dim * code_dim, 1.0 / std::sqrt(double(code_dim)), rng);
}

inline std::vector<double> apply_voice_map(const std::vector<double>& map,
                                           const std::vector<double>& code) {
  const std::size_t n = code.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += map[i * n + j] * code[j];
  return out;
}

}  // namespace detail

/// Turns a scene description into feature tables and tracks.
inline Scene render_scene(const SyntheticScene& synthetic, std::size_t scene_id,
                          const GeneratorConfig& config, const std::vector<double>& voice_map,
                          Rng& rng) {
  Scene scene;
  scene.id = scene_id;
  scene.split = synthetic.split;
  scene.mode = synthetic.mode;
  scene.first_frame = synthetic.first_frame;
  scene.last_frame = synthetic.last_frame;
  scene.face.dim = config.face_dim;
  scene.audio.dim = config.audio_dim;
  const std::size_t k = config.code_dim;
  const double amp = config.mouth_amplitude;
  std::normal_distribution<double> unit(0.0, 1.0);

  for (const PersonLatent& person : synthetic.persons) {
    SpeakerTrack track;
    track.track_id = person.track_id;
    std::map<long, RawLabel> labels;
    for (long frame : synthetic.visible.at(person.track_id)) {
      const RawLabel label = synthetic.label(person.track_id, frame);
      std::vector<double> row = detail::normal_vector(config.face_dim, config.noise, rng);
      for (std::size_t i = 0; i < k; ++i) row[i] += person.code[i];
      for (std::size_t i = k; i < 2 * k; ++i) {
        if (synthetic.mode == AmbiguityMode::ambiguous) {
          row[i] = amp * unit(rng);
          continue;
        }
        bool moving = label != RawLabel::not_speaking;
        double gain = 1.0;
        if (person.mouth == MouthBehaviour::mimics_speech) moving = true;
        if (person.mouth == MouthBehaviour::attenuated) gain = kAttenuatedMouthGain;
        row[i] += (moving ? amp : -amp) * gain;
      }
      track.frames[frame] = scene.face.append(row);
      labels[frame] = label;
    }
    scene.tracks.push_back(std::move(track));
    scene.labels.push_back(std::move(labels));
  }

  for (long frame = synthetic.first_frame; frame <= synthetic.last_frame; ++frame) {
    std::vector<double> voice(k, 0.0);
    std::size_t audible = 0;
    for (const PersonLatent& person : synthetic.persons) {
      if (synthetic.label(person.track_id, frame) != RawLabel::speaking_audible) continue;
      const auto v = detail::apply_voice_map(voice_map, person.code);
      for (std::size_t i = 0; i < k; ++i) voice[i] += v[i];
      ++audible;
    }
    std::vector<double> row = detail::normal_vector(config.audio_dim, config.noise, rng);
    for (std::size_t i = 0; i < k && audible > 0; ++i) {
      const double v = voice[i] / double(audible);
      row[i] += std::max(v, 0.0);
      row[k + i] += std::max(-v, 0.0);
    }
    scene.audio.append(row);
  }
  return scene;
}

namespace detail {

inline SyntheticScene random_scene(const GeneratorConfig& c, int& next_track_id, Rng& rng) {
  SyntheticScene scene;
  scene.first_frame = 0;
  scene.last_frame = static_cast<long>(c.frames) - 1;
  std::uniform_int_distribution<std::size_t> persons_dist(c.min_persons, c.max_persons);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const std::size_t n = persons_dist(rng);
  const long last = scene.last_frame;
  const double leave = 1.0 - c.persistence;
  const double enter = leave * c.speaking_prevalence / (1.0 - c.speaking_prevalence);
  for (std::size_t p = 0; p < n; ++p) {
    PersonLatent person;
    person.track_id = next_track_id++;
    person.code = normal_vector(c.code_dim, 1.0, rng);

    std::uniform_int_distribution<long> start_dist(0, last / 4);
    std::uniform_int_distribution<long> end_dist(last - last / 4, last);
    const long start = start_dist(rng);
    const long end = end_dist(rng);
    std::vector<long> frames;
    for (long f = start; f <= end; ++f) {
      const bool interior = f != start && f != end;
      if (interior && u01(rng) < c.gap_rate) continue;
      frames.push_back(f);
    }
    scene.visible[person.track_id] = std::move(frames);

    bool talking = u01(rng) < c.speaking_prevalence;
    for (long f = 0; f <= last; ++f) {
      if (f > 0) talking = talking ? u01(rng) >= leave : u01(rng) < enter;
      RawLabel label = RawLabel::not_speaking;
      if (talking) {
        label = u01(rng) < c.not_audible_rate ? RawLabel::speaking_not_audible
                                              : RawLabel::speaking_audible;
      }
      scene.speaking[{person.track_id, f}] = label;
    }
    scene.persons.push_back(std::move(person));
  }
  return scene;
}

/// Marks round(fraction * n) of the indices (chosen by a seeded shuffle).
inline std::vector<bool> pick_fraction(std::size_t n, double fraction, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto take = static_cast<std::size_t>(std::llround(fraction * double(n)));
  std::vector<bool> marked(n, false);
  for (std::size_t i = 0; i < take && i < n; ++i) marked[order[i]] = true;
  return marked;
}

}  // namespace detail

/// Deterministic in `config` (including its seed).
inline Dataset generate(const GeneratorConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const auto voice = detail::voice_map(config.code_dim, rng);

  const auto ambiguous = detail::pick_fraction(config.scenes, config.ambiguous_fraction, rng);
  std::vector<std::size_t> clear_ids, ambiguous_ids;
  for (std::size_t i = 0; i < config.scenes; ++i)
    (ambiguous[i] ? ambiguous_ids : clear_ids).push_back(i);
  std::vector<bool> validation(config.scenes, false);
  for (const auto* group : {&clear_ids, &ambiguous_ids}) {
    const auto marked = detail::pick_fraction(group->size(), config.val_fraction, rng);
    for (std::size_t i = 0; i < group->size(); ++i) validation[(*group)[i]] = marked[i];
  }

  Dataset data;
  data.seed = config.seed;
  data.face_dim = config.face_dim;
  data.audio_dim = config.audio_dim;
  int next_track_id = 1;
  for (std::size_t s = 0; s < config.scenes; ++s) {
    SyntheticScene scene = detail::random_scene(config, next_track_id, rng);
    scene.mode = ambiguous[s] ? AmbiguityMode::ambiguous : AmbiguityMode::clear;
    scene.split = validation[s] ? "val" : "train";
    data.scenes.push_back(render_scene(scene, s, config, voice, rng));
  }
  return data;
}

enum class ScenarioKind { wrong_gender, low_resolution, multiple_speakers };

/// Two fully visible persons over `frames` frames, shaped after the hard cases
/// where visual context alone is insufficient.
inline SyntheticScene scenario_fixture(ScenarioKind kind, std::uint64_t seed = 7,
                                       std::size_t frames = 10, std::size_t code_dim = 8) {
  Rng rng(seed);
  SyntheticScene scene;
  scene.first_frame = 0;
  scene.last_frame = static_cast<long>(frames) - 1;
  PersonLatent a{1, detail::normal_vector(code_dim, 1.0, rng), MouthBehaviour::follows_speech};
  PersonLatent b{2, detail::normal_vector(code_dim, 1.0, rng), MouthBehaviour::follows_speech};
  RawLabel label_a = RawLabel::speaking_audible;
  RawLabel label_b = RawLabel::not_speaking;
  switch (kind) {
    case ScenarioKind::wrong_gender:
      for (std::size_t i = 0; i < code_dim; ++i) b.code[i] = -a.code[i];
      b.mouth = MouthBehaviour::mimics_speech;
      break;
    case ScenarioKind::low_resolution:
      a.mouth = b.mouth = MouthBehaviour::attenuated;
      break;
    case ScenarioKind::multiple_speakers:
      label_b = RawLabel::speaking_audible;
      break;
  }
  for (long f = scene.first_frame; f <= scene.last_frame; ++f) {
    scene.speaking[{a.track_id, f}] = label_a;
    scene.speaking[{b.track_id, f}] = label_b;
    scene.visible[a.track_id].push_back(f);
    scene.visible[b.track_id].push_back(f);
  }
  scene.persons = {std::move(a), std::move(b)};
  return scene;
}

/// Renders hand-built scenes into a dataset sharing one voice map.
inline Dataset make_dataset(std::span<const SyntheticScene> scenes, const GeneratorConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const auto voice = detail::voice_map(config.code_dim, rng);
  Dataset data;
  data.seed = config.seed;
  data.face_dim = config.face_dim;
  data.audio_dim = config.audio_dim;
  for (std::size_t s = 0; s < scenes.size(); ++s)
    data.scenes.push_back(render_scene(scenes[s], s, config, voice, rng));
  return data;
}

}  // namespace favoa
