// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "favoa/errors.hpp"

namespace favoa {

enum class RawLabel { not_speaking, speaking_audible, speaking_not_audible };
enum class BinaryLabel { negative, positive };

inline std::string_view label_name(RawLabel label) {
  switch (label) {
    case RawLabel::not_speaking: return "not_speaking";
    case RawLabel::speaking_audible: return "speaking_audible";
    case RawLabel::speaking_not_audible: return "speaking_not_audible";
  }
  return "";
}

/// Case-insensitive, so SPEAKING_AUDIBLE etc. also parse.
inline RawLabel parse_raw_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "not_speaking") return RawLabel::not_speaking;
  if (lower == "speaking_audible") return RawLabel::speaking_audible;
  if (lower == "speaking_not_audible") return RawLabel::speaking_not_audible;
  throw ParseError("unknown label '" + std::string(text) + "'");
}

/// Only audible speech is the positive class.
inline BinaryLabel map_labels(RawLabel label) {
  return label == RawLabel::speaking_audible ? BinaryLabel::positive : BinaryLabel::negative;
}

inline BinaryLabel map_labels(std::string_view text) { return map_labels(parse_raw_label(text)); }

struct ScoredEntry {
  std::string entry_id;
  double score = 0.0;
  BinaryLabel label = BinaryLabel::negative;
};

namespace detail {

inline void count_classes(std::span<const ScoredEntry> entries, std::size_t& positives,
                          std::size_t& negatives) {
  positives = negatives = 0;
  for (const auto& e : entries) {
    if (!std::isfinite(e.score)) throw NumericError("non-finite score for entry " + e.entry_id);
    (e.label == BinaryLabel::positive ? positives : negatives)++;
  }
}

}  // namespace detail

/// Non-interpolated AP: mean of precision@k over the ranks k of positives.
/// Ranking is by descending score, ties by ascending entry_id.
inline double average_precision(std::span<const ScoredEntry> entries) {
  std::size_t positives = 0, negatives = 0;
  detail::count_classes(entries, positives, negatives);
  if (positives == 0) throw UndefinedMetricError("average precision needs at least one positive");
  std::vector<const ScoredEntry*> ranked;
  ranked.reserve(entries.size());
  for (const auto& e : entries) ranked.push_back(&e);
  std::sort(ranked.begin(), ranked.end(), [](const ScoredEntry* a, const ScoredEntry* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->entry_id < b->entry_id;
  });
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (ranked[k]->label != BinaryLabel::positive) continue;
    ++hits;
    total += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return total / static_cast<double>(positives);
}

/// Mann-Whitney AUC with mid-ranks for ties.
inline double roc_auc(std::span<const ScoredEntry> entries) {
  std::size_t positives = 0, negatives = 0;
  detail::count_classes(entries, positives, negatives);
  if (positives == 0 || negatives == 0)
    throw UndefinedMetricError("ROC AUC needs both positive and negative entries");
  std::vector<const ScoredEntry*> sorted;
  sorted.reserve(entries.size());
  for (const auto& e : entries) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredEntry* a, const ScoredEntry* b) { return a->score < b->score; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j]->score == sorted[i]->score) ++j;
    const double mid_rank = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (sorted[k]->label == BinaryLabel::positive) positive_rank_sum += mid_rank;
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

/// (TPR + TNR) / 2 with prediction = score >= threshold.
inline double balanced_accuracy(std::span<const ScoredEntry> entries, double threshold = 0.5) {
  std::size_t positives = 0, negatives = 0;
  detail::count_classes(entries, positives, negatives);
  if (positives == 0 || negatives == 0)
    throw UndefinedMetricError("balanced accuracy needs both positive and negative entries");
  std::size_t tp = 0, tn = 0;
  for (const auto& e : entries) {
    const bool predicted = e.score >= threshold;
    if (e.label == BinaryLabel::positive && predicted) ++tp;
    if (e.label == BinaryLabel::negative && !predicted) ++tn;
  }
  const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
  const double tnr = static_cast<double>(tn) / static_cast<double>(negatives);
  return (tpr + tnr) / 2.0;
}

struct MetricReport {
  double map = 0.0;
  double auc = 0.0;
  double balanced_accuracy = 0.0;
  double threshold = 0.5;
  std::size_t entries = 0;
  std::size_t positives = 0;
};

inline MetricReport evaluate(std::span<const ScoredEntry> entries, double threshold = 0.5) {
  MetricReport r;
  r.map = average_precision(entries);
  r.auc = roc_auc(entries);
  r.balanced_accuracy = balanced_accuracy(entries, threshold);
  r.threshold = threshold;
  r.entries = entries.size();
  r.positives = static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(),
      [](const ScoredEntry& e) { return e.label == BinaryLabel::positive; }));
  return r;
}

inline nlohmann::json to_json(const MetricReport& r) {
  return {{"map", r.map},
          {"auc", r.auc},
          {"balanced_accuracy", r.balanced_accuracy},
          {"threshold", r.threshold},
          {"entries", r.entries},
          {"positives", r.positives}};
}

// CSV: entry_id,score,raw_label

struct ScoreRow {
  std::string entry_id;
  double score = 0.0;
  RawLabel label = RawLabel::not_speaking;
};

inline void write_scores_csv(std::ostream& out, std::span<const ScoreRow> rows) {
  out << "entry_id,score,raw_label\n";
  out << std::setprecision(17);
  for (const auto& r : rows) out << r.entry_id << ',' << r.score << ',' << label_name(r.label) << '\n';
}

inline std::vector<ScoreRow> read_scores_csv(std::istream& in) {
  std::vector<ScoreRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("entry_id", 0) == 0) continue;
    std::stringstream fields(line);
    std::string id, score, label;
    if (!std::getline(fields, id, ',') || !std::getline(fields, score, ',') ||
        !std::getline(fields, label)) {
      throw ParseError("scores CSV line " + std::to_string(line_no) + ": expected 3 fields");
    }
    ScoreRow row;
    row.entry_id = id;
    try {
      std::size_t used = 0;
      row.score = std::stod(score, &used);
      if (used != score.size()) throw std::invalid_argument(score);
    } catch (const std::exception&) {
      throw ParseError("scores CSV line " + std::to_string(line_no) + ": bad score '" + score + "'");
    }
    row.label = parse_raw_label(label);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<ScoredEntry> to_scored(std::span<const ScoreRow> rows) {
  std::vector<ScoredEntry> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.entry_id, r.score, map_labels(r.label)});
  return out;
}

}  // namespace favoa
