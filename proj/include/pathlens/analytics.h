// Copyright 2026 The pathlens Authors
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

// Statistical kernels behind the colored tree, the forward bar chart and the
// backward divergence view.
//
// Conventions:
//  - CV uses the population standard deviation.
//  - Percentiles interpolate linearly between order statistics.
//  - Histograms use equal-width bins over [min, max]; every bin is
//    right-open except the last, which is closed.
//  - KL divergence is D(selected || other) in nats over a shared binning with
//    additive smoothing.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pathlens/execution.h"
#include "pathlens/path_extractor.h"

namespace pathlens {

inline constexpr double kOutlierPercentile = 99.0;
inline constexpr int kMinClusters = 2;
inline constexpr int kMaxClusters = 5;
inline constexpr std::size_t kKlBins = 20;
inline constexpr double kKlAlpha = 0.5;
inline constexpr std::size_t kKlMinSamples = 5;
inline constexpr std::size_t kDefaultHistogramBins = 50;

// ---- variability ----

struct CvStat {
  double cv = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n_used = 0;
  std::size_t n_filtered = 0;
};

// q in [0, 100]; linear interpolation between closest ranks. Throws
// Error(kInvalidArgument) on empty input.
double percentile(std::span<const double> values, double q);

// Indices of the values that are not strictly greater than the 99th
// percentile, in input order.
std::vector<std::size_t> p99_keep(std::span<const double> values);

// Throws Error(kInvalidArgument) on empty input or negative values.
CvStat coefficient_of_variation(std::span<const double> values, bool apply_p99);

// ---- colors ----

struct ColorValue {
  std::uint8_t r = 255, g = 255, b = 255;

  std::string hex() const;  // "#rrggbb"
  friend bool operator==(const ColorValue&, const ColorValue&) = default;
};

inline constexpr ColorValue kNeutralGrey{200, 200, 200};

// White at 0, red at >= 1, linear in between.
ColorValue cv_color(double cv);

// ---- clustering ----

struct Cluster {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> members;  // indices into the input values
  double share = 0.0;
};

struct ClusterResult {
  int k = 1;
  std::vector<Cluster> clusters;    // ascending, non-overlapping ranges
  std::optional<double> silhouette; // absent when k = 1
  double sse = 0.0;
};

// SSE-optimal split of the values into k groups that are contiguous in
// sorted order and never split equal values. Returns the group label of
// each input value (0 = lowest group) and the SSE. Requires 1 <= k <= number
// of distinct values.
struct Partition {
  std::vector<int> labels;
  double sse = 0.0;
};
Partition optimal_partition_1d(std::span<const double> values, int k);

// Tries k = 2..5 (bounded by the number of distinct values) and keeps the
// partition with the highest mean silhouette; ties go to the smaller k.
// Fewer than two distinct values yield one cluster.
ClusterResult cluster_1d(std::span<const double> values,
                         Execution exec = Execution::kParallel);

// Mean silhouette with absolute-difference distance. Singleton clusters and
// points with a = b = 0 score 0. Labels must be dense in [0, k) with k >= 2
// and every cluster non-empty; otherwise Error(kInvalidArgument).
double silhouette(std::span<const double> values, std::span<const int> labels,
                  Execution exec = Execution::kParallel);

// ---- histograms ----

struct Histogram {
  std::vector<double> edges;  // strictly ascending, size bins + 1
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  std::size_t bins() const noexcept { return counts.size(); }
};

// Equal-width edges over [lo, hi]. A zero-width range is widened to
// [lo, lo + 1] so edges stay strictly ascending.
std::vector<double> equal_width_edges(double lo, double hi, std::size_t bins);

// Bin of `value` under `edges`, or nullopt when it lies outside.
std::optional<std::size_t> bin_index(std::span<const double> edges, double value);

// Throws Error(kInvalidArgument) on empty input or bins < 1.
Histogram make_histogram(std::span<const double> values, std::size_t bins);
Histogram histogram_with_edges(std::span<const double> values,
                               std::vector<double> edges);

// Per-bin counts of `selected` under hist's binning. Throws
// Error(kInvalidArgument) for a value outside the histogram range.
std::vector<std::uint64_t> highlight_mask(const Histogram& hist,
                                          std::span<const double> selected);

// ---- divergence ----

enum class DivergenceStatus { kOk, kInsufficientData };

struct DivergenceStat {
  double kl = 0.0;
  std::size_t n_selected = 0;
  std::size_t n_other = 0;
  DivergenceStatus status = DivergenceStatus::kOk;
};

std::string_view to_string(DivergenceStatus status);

// Throws Error(kInvalidArgument) for bins < 2 or alpha <= 0.
DivergenceStat kl_divergence(std::span<const double> selected,
                             std::span<const double> other,
                             std::size_t bins = kKlBins,
                             double alpha = kKlAlpha);

ColorValue kl_color(const DivergenceStat& stat);

// ---- selection ----

struct RangePartition {
  std::vector<std::string> selected;
  std::vector<std::string> other;
};

// Closed interval [lo, hi]. Throws Error(kInvalidArgument) when lo > hi.
RangePartition partition_by_range(std::span<const E2ERecord> e2e, Micros lo,
                                  Micros hi);

}  // namespace pathlens
