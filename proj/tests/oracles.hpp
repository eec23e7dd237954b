// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations for tests. They work on plain vectors and loops
// and share no code with the library beyond the data types they read.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "favoa/favoa.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline Vec values(const favoa::Tensor& t) { return t.to_vector(); }

// ---------------------------------------------------------------------------
// Linear algebra and activations

/// a[m x k] * b[k x n], row-major.
inline Vec matmul(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n) {
  Vec out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) out[i * n + j] += a[i * k + p] * b[p * n + j];
  return out;
}

inline Vec matvec(const Vec& w, const Vec& x, std::size_t rows) {
  return matmul(w, x, rows, x.size(), 1);
}

inline Vec add(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec map(Vec v, double (*f)(double)) {
  for (double& x : v) x = f(x);
  return v;
}

inline Vec softmax(const Vec& x) {
  double total = 0.0;
  for (double v : x) total += std::exp(v);
  Vec out;
  for (double v : x) out.push_back(std::exp(v) / total);
  return out;
}

// ---------------------------------------------------------------------------
// Layers, one step at a time

inline Vec lstm(const favoa::LstmParams& p, const Vec& seq, std::size_t steps) {
  const std::size_t hidden = p.hidden_dim();
  const std::size_t input = p.input_dim();
  Vec h(hidden, 0.0), c(hidden, 0.0), out;
  auto gate = [&](const favoa::Tensor& w, const favoa::Tensor& b, const Vec& xh, std::size_t r) {
    double acc = b[r];
    for (std::size_t j = 0; j < input + hidden; ++j) acc += w.at(r, j) * xh[j];
    return acc;
  };
  for (std::size_t t = 0; t < steps; ++t) {
    Vec xh(seq.begin() + t * input, seq.begin() + (t + 1) * input);
    xh.insert(xh.end(), h.begin(), h.end());
    Vec next_h(hidden);
    for (std::size_t r = 0; r < hidden; ++r) {
      const double i = sigmoid(gate(p.w_input, p.b_input, xh, r));
      const double f = sigmoid(gate(p.w_forget, p.b_forget, xh, r));
      const double o = sigmoid(gate(p.w_output, p.b_output, xh, r));
      const double g = std::tanh(gate(p.w_cell, p.b_cell, xh, r));
      c[r] = f * c[r] + i * g;
      next_h[r] = o * std::tanh(c[r]);
    }
    h = next_h;
    out.insert(out.end(), h.begin(), h.end());
  }
  return out;
}

struct AttentionResult {
  Vec out;
  Vec weights;
};

inline AttentionResult attention(const favoa::AttentionParams& p, const Vec& tokens, std::size_t n) {
  const std::size_t d = p.model_dim();
  const std::size_t dk = p.key_dim();
  auto project = [&](const favoa::Tensor& w, std::size_t token) {
    Vec out(dk, 0.0);
    for (std::size_t a = 0; a < dk; ++a)
      for (std::size_t b = 0; b < d; ++b) out[a] += w.at(a, b) * tokens[token * d + b];
    return out;
  };
  std::vector<Vec> q, k, v;
  for (std::size_t i = 0; i < n; ++i) {
    q.push_back(project(p.query, i));
    k.push_back(project(p.key, i));
    v.push_back(project(p.value, i));
  }
  AttentionResult r;
  for (std::size_t i = 0; i < n; ++i) {
    Vec scores(n);
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t a = 0; a < dk; ++a) dot += q[i][a] * k[j][a];
      scores[j] = dot / std::sqrt(double(dk));
    }
    const Vec w = softmax(scores);
    r.weights.insert(r.weights.end(), w.begin(), w.end());
    Vec mixed(dk, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t a = 0; a < dk; ++a) mixed[a] += w[j] * v[j][a];
    for (std::size_t b = 0; b < d; ++b) {
      double acc = 0.0;
      for (std::size_t a = 0; a < dk; ++a) acc += p.output.at(b, a) * mixed[a];
      r.out.push_back(acc);
    }
  }
  return r;
}

struct GbuResult {
  Vec z, p, h1, h2;
};

/// h_i = tanh(W_i e_i + b_i); p = sigmoid(W_p [e1; e2] + b_p); z = p h1 + (1 - p) h2.
inline GbuResult gbu(const favoa::GbuParams& params, const Vec& e1, const Vec& e2) {
  const std::size_t d = params.dim();
  GbuResult r;
  for (std::size_t i = 0; i < d; ++i) {
    double a1 = params.b1[i], a2 = params.b2[i], ap = params.gate_bias[i];
    for (std::size_t j = 0; j < d; ++j) {
      a1 += params.w1.at(i, j) * e1[j];
      a2 += params.w2.at(i, j) * e2[j];
      ap += params.gate_weight.at(i, j) * e1[j] + params.gate_weight.at(i, d + j) * e2[j];
    }
    const double h1 = std::tanh(a1), h2 = std::tanh(a2), p = sigmoid(ap);
    r.h1.push_back(h1);
    r.h2.push_back(h2);
    r.p.push_back(p);
    r.z.push_back(p * h1 + (1.0 - p) * h2);
  }
  return r;
}

/// ADAM moments and parameter after `grads.size()` steps from zero moments.
inline double adam(double param, const Vec& grads, double rate, double b1 = 0.9,
                   double b2 = 0.999, double eps = 1e-8) {
  double m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, double(t)));
    const double vh = v / (1 - std::pow(b2, double(t)));
    param -= rate * mh / (std::sqrt(vh) + eps);
  }
  return param;
}

// ---------------------------------------------------------------------------
// Context assembly by direct reading of the rules

struct BruteContext {
  std::vector<long> frames;
  std::vector<int> speakers;
  std::vector<std::size_t> refs;  // frame-major
};

inline BruteContext assemble(long t, std::size_t L, std::size_t S, long tau, long first, long last,
                             const std::vector<favoa::SpeakerTrack>& tracks, int target) {
  BruteContext c;
  const long half = static_cast<long>(L) / 2;
  for (std::size_t i = 0; i < L; ++i) {
    long f = t + (static_cast<long>(i) - half) * tau;
    if (f < first) f = first;
    if (f > last) f = last;
    c.frames.push_back(f);
  }
  std::vector<int> others;
  for (const auto& tr : tracks)
    if (tr.frames.count(t) && tr.track_id != target) others.push_back(tr.track_id);
  std::sort(others.begin(), others.end());
  std::vector<int> pool{target};
  pool.insert(pool.end(), others.begin(), others.end());
  for (std::size_t s = 0; s < S; ++s) c.speakers.push_back(pool[s % pool.size()]);

  auto lookup = [&](int id, long f) -> std::size_t {
    const favoa::SpeakerTrack* track = nullptr;
    for (const auto& tr : tracks)
      if (tr.track_id == id) track = &tr;
    long lo = track->frames.begin()->first, hi = track->frames.rbegin()->first;
    if (f <= lo) return track->frames.at(lo);
    if (f >= hi) return track->frames.at(hi);
    for (long g = f; g >= lo; --g)
      if (track->frames.count(g)) return track->frames.at(g);
    return track->frames.at(lo);
  };
  for (long f : c.frames)
    for (int id : c.speakers) c.refs.push_back(lookup(id, f));
  return c;
}

// ---------------------------------------------------------------------------
// Metrics by pair counting

struct Scored {
  double score;
  bool positive;
  std::string id;
};

/// Entry j ranks at or above i when it scores higher, or ties with an id not after i's.
inline bool at_or_above(const Scored& j, const Scored& i) {
  return j.score > i.score || (j.score == i.score && j.id <= i.id);
}

inline double average_precision(const std::vector<Scored>& e) {
  std::vector<std::pair<std::size_t, double>> terms;  // (rank, precision at rank)
  std::size_t positives = 0;
  for (const auto& i : e) {
    if (!i.positive) continue;
    ++positives;
    std::size_t rank = 0, hits = 0;
    for (const auto& j : e) {
      if (!at_or_above(j, i)) continue;
      ++rank;
      hits += j.positive;
    }
    terms.emplace_back(rank, double(hits) / double(rank));
  }
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (const auto& [rank, precision] : terms) total += precision;
  return total / double(positives);
}

inline double roc_auc(const std::vector<Scored>& e) {
  long long twice = 0, pos = 0, neg = 0;
  for (const auto& i : e) (i.positive ? pos : neg) += 1;
  for (const auto& i : e)
    for (const auto& j : e)
      if (i.positive && !j.positive) twice += i.score > j.score ? 2 : (i.score == j.score ? 1 : 0);
  return double(twice) / double(2 * pos * neg);
}

inline double balanced_accuracy(const std::vector<Scored>& e, double threshold) {
  std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
  for (const auto& i : e) {
    if (i.positive) {
      ++pos;
      tp += i.score >= threshold;
    } else {
      ++neg;
      tn += i.score < threshold;
    }
  }
  return (double(tp) / double(pos) + double(tn) / double(neg)) / 2.0;
}

inline std::vector<favoa::ScoredEntry> to_entries(const std::vector<Scored>& e) {
  std::vector<favoa::ScoredEntry> out;
  for (const auto& i : e)
    out.push_back({i.id, i.score,
                   i.positive ? favoa::BinaryLabel::positive : favoa::BinaryLabel::negative});
  return out;
}

struct SweepResult {
  std::size_t instances = 0;
  std::size_t mismatches = 0;
  std::string first_mismatch;
};

/// Every label pattern and every score assignment from `grid` for 1..max_n
/// entries, compared exactly against the library. Single-class inputs must
/// raise UndefinedMetricError where the metric is undefined.
inline SweepResult exhaustive_metric_sweep(std::size_t max_n, const Vec& grid, double threshold = 0.5) {
  SweepResult r;
  auto note = [&](const std::string& what, const std::vector<Scored>& e) {
    ++r.mismatches;
    if (!r.first_mismatch.empty()) return;
    std::ostringstream s;
    s << what << " on";
    for (const auto& i : e) s << ' ' << i.id << ':' << i.score << (i.positive ? '+' : '-');
    r.first_mismatch = s.str();
  };
  for (std::size_t n = 1; n <= max_n; ++n) {
    std::vector<Scored> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i].id = "e" + std::to_string(i);
    std::vector<favoa::ScoredEntry> lib = to_entries(e);
    std::vector<std::size_t> digit(n, 0);
    while (true) {
      for (std::size_t i = 0; i < n; ++i) lib[i].score = e[i].score = grid[digit[i]];
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
          e[i].positive = (mask >> i) & 1u;
          lib[i].label = e[i].positive ? favoa::BinaryLabel::positive : favoa::BinaryLabel::negative;
          pos += e[i].positive;
        }
        ++r.instances;
        if (pos == 0) {
          try {
            favoa::average_precision(lib);
            note("AP defined without positives", e);
          } catch (const favoa::UndefinedMetricError&) {
          }
        } else if (favoa::average_precision(lib) != average_precision(e)) {
          note("AP", e);
        }
        if (pos == 0 || pos == n) {
          try {
            favoa::roc_auc(lib);
            note("AUC defined for one class", e);
          } catch (const favoa::UndefinedMetricError&) {
          }
          try {
            favoa::balanced_accuracy(lib, threshold);
            note("balanced accuracy defined for one class", e);
          } catch (const favoa::UndefinedMetricError&) {
          }
          continue;
        }
        if (favoa::roc_auc(lib) != roc_auc(e)) note("AUC", e);
        if (favoa::balanced_accuracy(lib, threshold) != balanced_accuracy(e, threshold))
          note("balanced accuracy", e);
      }
      std::size_t k = 0;
      while (k < n && ++digit[k] == grid.size()) digit[k++] = 0;
      if (k == n) break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Contribution

inline double degree(const Vec& p) {
  std::size_t above = 0;
  for (double v : p)
    if (v > 0.5) ++above;
  return double(above) / double(p.size());
}

/// Bin i covers [i w, (i+1) w); 1.0 lands in the last bin.
inline std::vector<std::size_t> tally(const Vec& degrees, std::size_t bins) {
  std::vector<std::size_t> counts(bins, 0);
  for (double d : degrees) {
    std::size_t chosen = bins - 1;
    for (std::size_t b = 0; b < bins; ++b) {
      const double lo = double(b) / double(bins), hi = double(b + 1) / double(bins);
      if (d >= lo - 1e-12 && d < hi - 1e-12) {
        chosen = b;
        break;
      }
    }
    ++counts[chosen];
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fresh scratch directory under $FAVOA_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("FAVOA_TEST_TMP");
  std::filesystem::path dir =
      (root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "favoa_tests") / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
