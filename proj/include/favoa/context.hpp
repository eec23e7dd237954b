// SPDX-License-Identifier: Apache-2.0
//
// Context tensor assembly: L frames centred on t with hop tau, S speakers
// with the classified target in slot 0, and replication wherever a speaker
// has no embedding at a selected frame.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "favoa/tensor.hpp"

namespace favoa {

struct ContextPlan {
  long center = 0;          // t
  std::size_t frames = 1;   // L, odd
  std::size_t speakers = 1; // S
  long hop = 1;             // tau

  void validate() const {
    require(frames > 0 && frames % 2 == 1, "context plan: frame count must be odd and positive, got ",
            frames);
    require(speakers > 0, "context plan: speaker count must be positive");
    require(hop > 0, "context plan: hop must be positive, got ", hop);
  }
};

/// A face track: frame index -> feature reference (row in the owning feature table).
struct SpeakerTrack {
  int track_id = 0;
  std::map<long, std::size_t> frames;

  bool present_at(long frame) const { return frames.count(frame) != 0; }
};

/// t - floor(L/2) tau ... t + floor(L/2) tau, clamped into [clip_first, clip_last].
inline std::vector<long> select_frames(const ContextPlan& plan, long clip_first, long clip_last) {
  plan.validate();
  require(clip_first <= plan.center && plan.center <= clip_last, "select_frames: centre frame ",
          plan.center, " outside clip [", clip_first, ", ", clip_last, "]");
  const long half = static_cast<long>(plan.frames / 2);
  std::vector<long> out;
  out.reserve(plan.frames);
  for (long i = -half; i <= half; ++i) {
    out.push_back(std::clamp(plan.center + i * plan.hop, clip_first, clip_last));
  }
  return out;
}

/// Slot order for S speakers: target first, the rest by ascending track id,
/// cycled when fewer than S tracks are visible.
inline std::vector<int> select_speakers(std::span<const int> visible_ids, std::size_t count,
                                        std::optional<int> target = std::nullopt) {
  require(!visible_ids.empty(), "select_speakers: no tracks in frame");
  require(count > 0, "select_speakers: speaker count must be positive");
  std::vector<int> ordered(visible_ids.begin(), visible_ids.end());
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
  if (target) {
    auto it = std::find(ordered.begin(), ordered.end(), *target);
    require(it != ordered.end(), "select_speakers: target track ", *target, " not in frame");
    std::rotate(ordered.begin(), it, it + 1);
  }
  std::vector<int> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(ordered[i % ordered.size()]);
  return out;
}

/// Feature reference used for `frame`: exact hit, else first activity before
/// the track starts, last activity after it ends, nearest preceding in gaps.
inline std::size_t track_feature_at(const SpeakerTrack& track, long frame) {
  require(!track.frames.empty(), "track ", track.track_id, " has no frames");
  auto it = track.frames.upper_bound(frame);
  if (it == track.frames.begin()) return it->second;
  return std::prev(it)->second;
}

struct ContextLayout {
  std::vector<long> frames;        // L selected frames
  std::vector<int> speaker_order;  // S track ids, target first
  std::vector<std::size_t> refs;   // L*S feature references, frame-major
};

inline ContextLayout plan_context(const ContextPlan& plan, long clip_first, long clip_last,
                                  std::span<const SpeakerTrack> tracks, int target_id) {
  ContextLayout layout;
  layout.frames = select_frames(plan, clip_first, clip_last);

  std::vector<int> visible;
  const SpeakerTrack* target = nullptr;
  for (const auto& t : tracks) {
    if (!t.present_at(plan.center)) continue;
    visible.push_back(t.track_id);
    if (t.track_id == target_id) target = &t;
  }
  require(target != nullptr, "assemble_context: target track ", target_id,
          " is not present at centre frame ", plan.center);
  layout.speaker_order = select_speakers(visible, plan.speakers, target_id);

  std::vector<const SpeakerTrack*> by_slot;
  for (int id : layout.speaker_order) {
    auto it = std::find_if(tracks.begin(), tracks.end(),
                           [id](const SpeakerTrack& t) { return t.track_id == id; });
    by_slot.push_back(&*it);
  }
  layout.refs.reserve(plan.frames * plan.speakers);
  for (long frame : layout.frames) {
    for (const SpeakerTrack* track : by_slot) layout.refs.push_back(track_feature_at(*track, frame));
  }
  return layout;
}

struct ContextTensor {
  Tensor data;  // [L x S x D]
  ContextPlan plan;
  std::vector<int> speaker_order;
  std::vector<long> frames;
};

/// `feature(ref)` must return a rank-1 tensor; all references share one dim.
template <class FeatureLookup>
ContextTensor assemble_context(const ContextPlan& plan, long clip_first, long clip_last,
                               std::span<const SpeakerTrack> tracks, int target_id,
                               FeatureLookup&& feature) {
  ContextLayout layout = plan_context(plan, clip_first, clip_last, tracks, target_id);
  std::vector<Tensor> cells;
  cells.reserve(layout.refs.size());
  for (std::size_t ref : layout.refs) cells.push_back(feature(ref));
  const Tensor stacked = stack_rows(cells);
  return {reshape(stacked, {plan.frames, plan.speakers, stacked.dim(1)}), plan,
          std::move(layout.speaker_order), std::move(layout.frames)};
}

/// Repeats `samples` end to end and truncates to target_seconds * sample_rate.
inline std::vector<double> tile_audio(std::span<const double> samples, std::size_t sample_rate,
                                      double target_seconds = 10.0) {
  require(!samples.empty(), "tile_audio: empty input");
  require(sample_rate > 0 && target_seconds > 0, "tile_audio: rate and duration must be positive");
  const auto target = static_cast<std::size_t>(std::llround(target_seconds * double(sample_rate)));
  std::vector<double> out(target);
  for (std::size_t k = 0; k < target; ++k) out[k] = samples[k % samples.size()];
  return out;
}

}  // namespace favoa
