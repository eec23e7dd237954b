// SPDX-License-Identifier: Apache-2.0
//
// Degree of contribution of the voice branch: the fraction of gate elements
// strictly above 0.5, i.e. elements of z that favour modality e1.
#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "favoa/dataset.hpp"
#include "favoa/metrics.hpp"
#include "favoa/model.hpp"

namespace favoa {

inline double degree_of_contribution(std::span<const double> gate) {
  require(!gate.empty(), "degree_of_contribution: empty gate vector");
  const auto above = std::count_if(gate.begin(), gate.end(), [](double p) { return p > 0.5; });
  return static_cast<double>(above) / static_cast<double>(gate.size());
}

struct ContributionRecord {
  std::string entry_id;
  double degree = 0.0;
  RawLabel label = RawLabel::not_speaking;
  double score = 0.0;
};

struct Histogram {
  double bin_width = 0.025;
  std::vector<double> lower_edges;
  std::vector<std::size_t> counts;

  std::size_t total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
};

/// Uniform bins over [0, 1]. A degree on an interior edge goes to the upper
/// bin; 1.0 goes to the last bin.
inline Histogram build_histogram(std::span<const ContributionRecord> records,
                                 double bin_width = 0.025) {
  require(!records.empty(), "build_histogram: no records");
  require(bin_width > 0.0 && bin_width <= 1.0, "build_histogram: bin width ", bin_width,
          " outside (0, 1]");
  const double exact_bins = 1.0 / bin_width;
  const auto bins = static_cast<std::size_t>(std::llround(exact_bins));
  require(std::abs(exact_bins - static_cast<double>(bins)) < 1e-9 * exact_bins,
          "build_histogram: bin width ", bin_width, " does not divide [0, 1] into whole bins");
  Histogram h;
  h.bin_width = bin_width;
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i < bins; ++i) h.lower_edges.push_back(static_cast<double>(i) * bin_width);
  for (const auto& r : records) {
    require(r.degree >= 0.0 && r.degree <= 1.0, "build_histogram: degree ", r.degree,
            " outside [0, 1] for ", r.entry_id);
    // The small offset keeps values that sit on an edge from rounding into the lower bin.
    auto idx = static_cast<std::size_t>(std::floor(r.degree * static_cast<double>(bins) + 1e-9));
    ++h.counts[std::min(idx, bins - 1)];
  }
  return h;
}

struct ContributionSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double frac_gt_015 = 0.0;
  double frac_gt_030 = 0.0;
};

inline ContributionSummary summarize(std::span<const ContributionRecord> records) {
  require(!records.empty(), "summarize: no records");
  std::vector<double> degrees;
  degrees.reserve(records.size());
  for (const auto& r : records) degrees.push_back(r.degree);
  std::sort(degrees.begin(), degrees.end());
  ContributionSummary s;
  s.count = degrees.size();
  const double n = static_cast<double>(degrees.size());
  double total = 0.0;
  for (double d : degrees) total += d;
  s.mean = total / n;
  const std::size_t mid = degrees.size() / 2;
  s.median = degrees.size() % 2 ? degrees[mid] : (degrees[mid - 1] + degrees[mid]) / 2.0;
  s.frac_gt_015 = static_cast<double>(std::count_if(degrees.begin(), degrees.end(),
                                                    [](double d) { return d > 0.15; })) / n;
  s.frac_gt_030 = static_cast<double>(std::count_if(degrees.begin(), degrees.end(),
                                                    [](double d) { return d > 0.30; })) / n;
  return s;
}

inline nlohmann::json to_json(const ContributionSummary& s) {
  return {{"count", s.count},
          {"mean", s.mean},
          {"median", s.median},
          {"frac_gt_0.15", s.frac_gt_015},
          {"frac_gt_0.30", s.frac_gt_030}};
}

struct ContributionAnalysis {
  std::vector<ContributionRecord> records;
  Histogram histogram;
  ContributionSummary summary;
};

inline ContributionAnalysis analyze(const FavoaModel& model, const Dataset& data,
                                    std::span<const EntryRef> entries, double bin_width = 0.025) {
  NoGradGuard no_grad;
  ContributionAnalysis out;
  out.records.reserve(entries.size());
  for (const auto& e : entries) {
    const std::string id = data.entry_id(e);
    ForwardTrace trace;
    try {
      trace = model.forward(data.context(e));
    } catch (const std::exception& err) {
      throw std::runtime_error("entry " + id + ": " + err.what());
    }
    out.records.push_back({id, degree_of_contribution(trace.p.data()), data.label(e), trace.q});
  }
  out.histogram = build_histogram(out.records, bin_width);
  out.summary = summarize(out.records);
  return out;
}

inline void write_contributions_csv(std::ostream& out, std::span<const ContributionRecord> records) {
  out << "entry_id,degree,label,score\n" << std::setprecision(17);
  for (const auto& r : records)
    out << r.entry_id << ',' << r.degree << ',' << label_name(r.label) << ',' << r.score << '\n';
}

inline void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_lower,count\n" << std::setprecision(17);
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    out << h.lower_edges[i] << ',' << h.counts[i] << '\n';
}

}  // namespace favoa
