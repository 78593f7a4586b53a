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

#include "pathlens/analytics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace pathlens {

namespace {

void require_non_empty(std::span<const double> values, const char* what) {
  if (values.empty()) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + ": empty input");
  }
}

}  // namespace

// ---- variability ----

double percentile(std::span<const double> values, double q) {
  require_non_empty(values, "percentile");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<std::size_t> p99_keep(std::span<const double> values) {
  std::vector<std::size_t> keep;
  if (values.empty()) return keep;
  const double cutoff = percentile(values, kOutlierPercentile);
  keep.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > cutoff)) keep.push_back(i);
  }
  return keep;
}

CvStat coefficient_of_variation(std::span<const double> values, bool apply_p99) {
  require_non_empty(values, "coefficient_of_variation");
  for (double v : values) {
    if (!(v >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "coefficient_of_variation: values must be >= 0");
    }
  }
  std::vector<double> used;
  if (apply_p99) {
    for (std::size_t i : p99_keep(values)) used.push_back(values[i]);
  } else {
    used.assign(values.begin(), values.end());
  }
  CvStat stat;
  stat.n_used = used.size();
  stat.n_filtered = values.size() - used.size();
  double sum = 0.0;
  for (double v : used) sum += v;
  stat.mean = sum / static_cast<double>(used.size());
  double sq = 0.0;
  for (double v : used) sq += (v - stat.mean) * (v - stat.mean);
  stat.stddev = std::sqrt(sq / static_cast<double>(used.size()));
  stat.cv = (stat.mean > 0.0 && used.size() >= 2) ? stat.stddev / stat.mean : 0.0;
  return stat;
}

// ---- colors ----

std::string ColorValue::hex() const {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

ColorValue cv_color(double cv) {
  const double c = std::clamp(std::isnan(cv) ? 0.0 : cv, 0.0, 1.0);
  const auto gb = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - c)));
  return ColorValue{255, gb, gb};
}

// ---- clustering ----

namespace {

// Distinct sorted values with multiplicities, centered on the overall mean
// so the prefix-sum SSE formula does not cancel catastrophically.
struct Compressed {
  std::vector<double> x;        // distinct values, ascending (uncentered)
  std::vector<std::size_t> group_of_sorted;
  std::vector<std::size_t> order;  // input indices sorted by value
  std::vector<double> w, s1, s2;   // prefix sums, size D + 1
};

Compressed compress(std::span<const double> values) {
  Compressed c;
  c.order.resize(values.size());
  std::iota(c.order.begin(), c.order.end(), std::size_t{0});
  std::stable_sort(c.order.begin(), c.order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());

  c.w.push_back(0.0);
  c.s1.push_back(0.0);
  c.s2.push_back(0.0);
  c.group_of_sorted.reserve(values.size());
  for (std::size_t idx : c.order) {
    const double v = values[idx];
    if (c.x.empty() || v != c.x.back()) {
      c.x.push_back(v);
      c.w.push_back(c.w.back());
      c.s1.push_back(c.s1.back());
      c.s2.push_back(c.s2.back());
    }
    const double d = v - mean;
    c.w.back() += 1.0;
    c.s1.back() += d;
    c.s2.back() += d * d;
    c.group_of_sorted.push_back(c.x.size() - 1);
  }
  return c;
}

// SSE of distinct values [i, j] inclusive.
inline double segment_cost(const Compressed& c, std::size_t i, std::size_t j) {
  const double w = c.w[j + 1] - c.w[i];
  const double s1 = c.s1[j + 1] - c.s1[i];
  const double s2 = c.s2[j + 1] - c.s2[i];
  return std::max(0.0, s2 - s1 * s1 / w);
}

// split[m][j]: first distinct index of the last group in the best
// (m + 1)-group partition of distinct values [0, j].
struct DpTables {
  std::vector<std::vector<std::size_t>> split;
};

DpTables solve_layers(const Compressed& c, int kmax) {
  const std::size_t d = c.x.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  DpTables t;
  t.split.assign(kmax, std::vector<std::size_t>(d, 0));
  std::vector<double> prev(d), cur(d, kInf);
  for (std::size_t j = 0; j < d; ++j) prev[j] = segment_cost(c, 0, j);

  for (int m = 1; m < kmax; ++m) {
    std::fill(cur.begin(), cur.end(), kInf);
    auto& split = t.split[m];
    // Divide and conquer over j: the optimal split point is monotone in j.
    struct Job {
      std::size_t jlo, jhi, olo, ohi;
    };
    std::vector<Job> jobs;
    const std::size_t first = static_cast<std::size_t>(m);
    if (first < d) jobs.push_back({first, d - 1, first, d - 1});
    while (!jobs.empty()) {
      Job job = jobs.back();
      jobs.pop_back();
      const std::size_t j = job.jlo + (job.jhi - job.jlo) / 2;
      double best = kInf;
      std::size_t best_i = job.olo;
      const std::size_t hi = std::min(job.ohi, j);
      for (std::size_t i = job.olo; i <= hi; ++i) {
        const double v = prev[i - 1] + segment_cost(c, i, j);
        if (v < best) {
          best = v;
          best_i = i;
        }
      }
      cur[j] = best;
      split[j] = best_i;
      if (j > job.jlo) jobs.push_back({job.jlo, j - 1, job.olo, best_i});
      if (j < job.jhi) jobs.push_back({j + 1, job.jhi, best_i, job.ohi});
    }
    std::swap(prev, cur);
  }
  return t;
}

// Group label of every distinct value for the best k-group partition.
std::vector<int> backtrack(const DpTables& t, std::size_t d, int k) {
  std::vector<int> group(d, 0);
  std::size_t end = d;  // exclusive
  for (int m = k - 1; m >= 0; --m) {
    const std::size_t start = m == 0 ? 0 : t.split[m][end - 1];
    for (std::size_t i = start; i < end; ++i) group[i] = m;
    end = start;
  }
  return group;
}

Partition to_partition(std::span<const double> values, const Compressed& c,
                       const std::vector<int>& group, int k) {
  Partition p;
  p.labels.assign(values.size(), 0);
  for (std::size_t s = 0; s < c.order.size(); ++s) {
    p.labels[c.order[s]] = group[c.group_of_sorted[s]];
  }
  std::vector<double> sum(k, 0.0), n(k, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum[p.labels[i]] += values[i];
    n[p.labels[i]] += 1.0;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - sum[p.labels[i]] / n[p.labels[i]];
    p.sse += d * d;
  }
  return p;
}

}  // namespace

Partition optimal_partition_1d(std::span<const double> values, int k) {
  require_non_empty(values, "optimal_partition_1d");
  Compressed c = compress(values);
  if (k < 1 || static_cast<std::size_t>(k) > c.x.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "optimal_partition_1d: k must be between 1 and the number of "
                "distinct values");
  }
  DpTables t = solve_layers(c, k);
  return to_partition(values, c, backtrack(t, c.x.size(), k), k);
}

ClusterResult cluster_1d(std::span<const double> values, Execution exec) {
  require_non_empty(values, "cluster_1d");
  Compressed c = compress(values);
  const std::size_t n = values.size();

  ClusterResult result;
  std::vector<int> labels(n, 0);
  if (c.x.size() < 2) {
    result.k = 1;
  } else {
    const int kmax =
        static_cast<int>(std::min<std::size_t>(kMaxClusters, c.x.size()));
    DpTables t = solve_layers(c, kmax);
    double best = -std::numeric_limits<double>::infinity();
    for (int k = kMinClusters; k <= kmax; ++k) {
      Partition p = to_partition(values, c, backtrack(t, c.x.size(), k), k);
      const double s = silhouette(values, p.labels, exec);
      if (s > best) {
        best = s;
        result.k = k;
        result.silhouette = s;
        result.sse = p.sse;
        labels = std::move(p.labels);
      }
    }
  }

  result.clusters.assign(result.k, Cluster{});
  for (auto& cl : result.clusters) {
    cl.lo = std::numeric_limits<double>::infinity();
    cl.hi = -std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < n; ++i) {
    Cluster& cl = result.clusters[labels[i]];
    cl.members.push_back(i);
    cl.lo = std::min(cl.lo, values[i]);
    cl.hi = std::max(cl.hi, values[i]);
  }
  for (Cluster& cl : result.clusters) {
    cl.share = static_cast<double>(cl.members.size()) / static_cast<double>(n);
  }
  if (result.k == 1) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    for (double v : values) result.sse += (v - mean) * (v - mean);
  }
  return result;
}

double silhouette(std::span<const double> values, std::span<const int> labels,
                  Execution exec) {
  if (values.size() != labels.size()) {
    throw Error(ErrorKind::kInvalidArgument, "silhouette: size mismatch");
  }
  int k = 0;
  for (int l : labels) {
    if (l < 0) throw Error(ErrorKind::kInvalidArgument, "silhouette: negative label");
    k = std::max(k, l + 1);
  }
  if (k < 2) {
    throw Error(ErrorKind::kInvalidArgument, "silhouette: needs at least 2 clusters");
  }

  // Per cluster: sorted values shifted by the cluster minimum, with prefix
  // sums. Shifting keeps sums of identical values exactly zero.
  struct Sorted {
    double base = 0.0;
    std::vector<double> v;
    std::vector<long double> prefix;
  };
  std::vector<Sorted> clusters(k);
  for (std::size_t i = 0; i < values.size(); ++i) {
    clusters[labels[i]].v.push_back(values[i]);
  }
  for (Sorted& cl : clusters) {
    if (cl.v.empty()) {
      throw Error(ErrorKind::kInvalidArgument, "silhouette: empty cluster");
    }
    std::sort(cl.v.begin(), cl.v.end());
    cl.base = cl.v.front();
    cl.prefix.assign(cl.v.size() + 1, 0.0L);
    for (std::size_t i = 0; i < cl.v.size(); ++i) {
      cl.prefix[i + 1] = cl.prefix[i] + static_cast<long double>(cl.v[i] - cl.base);
    }
  }
  // Sum of |x - y| over y in the cluster.
  auto total_distance = [](const Sorted& cl, double x) -> long double {
    const auto left = static_cast<std::size_t>(
        std::lower_bound(cl.v.begin(), cl.v.end(), x) - cl.v.begin());
    const long double xs = static_cast<long double>(x - cl.base);
    const long double n_left = static_cast<long double>(left);
    const long double n_right = static_cast<long double>(cl.v.size() - left);
    const long double sum_left = cl.prefix[left];
    const long double sum_right = cl.prefix.back() - cl.prefix[left];
    return (xs * n_left - sum_left) + (sum_right - xs * n_right);
  };

  const std::size_t n = values.size();
  std::vector<double> score(n, 0.0);
  auto point = [&](std::size_t i) {
    const int own = labels[i];
    const Sorted& mine = clusters[own];
    if (mine.v.size() == 1) return;
    const double x = values[i];
    const double a = std::max(
        0.0, static_cast<double>(total_distance(mine, x) /
                                 static_cast<long double>(mine.v.size() - 1)));
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own) continue;
      const double mean_d = static_cast<double>(
          total_distance(clusters[c], x) /
          static_cast<long double>(clusters[c].v.size()));
      b = std::min(b, std::max(0.0, mean_d));
    }
    const double denom = std::max(a, b);
    score[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  };

  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) point(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) point(i);
  }
  double total = 0.0;
  for (double s : score) total += s;
  return total / static_cast<double>(n);
}

// ---- histograms ----

std::vector<double> equal_width_edges(double lo, double hi, std::size_t bins) {
  if (bins < 1) {
    throw Error(ErrorKind::kInvalidArgument, "histogram needs at least one bin");
  }
  if (!(hi > lo)) hi = lo + 1.0;
  std::vector<double> edges(bins + 1);
  const double width = hi - lo;
  for (std::size_t i = 0; i < bins; ++i) {
    edges[i] = lo + width * static_cast<double>(i) / static_cast<double>(bins);
  }
  edges[bins] = hi;
  for (std::size_t i = 1; i <= bins; ++i) {
    if (!(edges[i] > edges[i - 1])) {
      throw Error(ErrorKind::kInvalidArgument,
                  "value range too narrow for the requested bin count");
    }
  }
  return edges;
}

std::optional<std::size_t> bin_index(std::span<const double> edges, double value) {
  const std::size_t bins = edges.size() - 1;
  if (edges.size() < 2 || !(value >= edges.front()) || !(value <= edges.back())) {
    return std::nullopt;
  }
  const double width = (edges.back() - edges.front()) / static_cast<double>(bins);
  auto idx = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(bins - 1),
                       std::floor((value - edges.front()) / width)));
  while (idx > 0 && value < edges[idx]) --idx;
  while (idx + 1 < bins && value >= edges[idx + 1]) ++idx;
  return idx;
}

Histogram histogram_with_edges(std::span<const double> values,
                               std::vector<double> edges) {
  Histogram h;
  h.edges = std::move(edges);
  h.counts.assign(h.edges.size() - 1, 0);
  for (double v : values) {
    auto idx = bin_index(h.edges, v);
    if (!idx) {
      throw Error(ErrorKind::kInvalidArgument, "value outside histogram range");
    }
    ++h.counts[*idx];
    ++h.total;
  }
  return h;
}

Histogram make_histogram(std::span<const double> values, std::size_t bins) {
  require_non_empty(values, "make_histogram");
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  return histogram_with_edges(values, equal_width_edges(*mn, *mx, bins));
}

std::vector<std::uint64_t> highlight_mask(const Histogram& hist,
                                          std::span<const double> selected) {
  std::vector<std::uint64_t> mask(hist.bins(), 0);
  for (double v : selected) {
    auto idx = bin_index(hist.edges, v);
    if (!idx) {
      throw Error(ErrorKind::kInvalidArgument,
                  "highlight value outside histogram range (binning mismatch)");
    }
    ++mask[*idx];
  }
  return mask;
}

// ---- divergence ----

std::string_view to_string(DivergenceStatus status) {
  return status == DivergenceStatus::kOk ? "ok" : "insufficient-data";
}

DivergenceStat kl_divergence(std::span<const double> selected,
                             std::span<const double> other, std::size_t bins,
                             double alpha) {
  if (bins < 2) {
    throw Error(ErrorKind::kInvalidArgument, "kl_divergence needs at least 2 bins");
  }
  if (!(alpha > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "kl_divergence needs alpha > 0");
  }
  DivergenceStat stat;
  stat.n_selected = selected.size();
  stat.n_other = other.size();
  if (selected.size() < kKlMinSamples || other.size() < kKlMinSamples) {
    stat.status = DivergenceStatus::kInsufficientData;
    return stat;
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : selected) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : other) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!(hi > lo)) return stat;  // identical values on both sides

  const std::vector<double> edges = equal_width_edges(lo, hi, bins);
  std::vector<double> cp(bins, 0.0), cq(bins, 0.0);
  for (double v : selected) cp[*bin_index(edges, v)] += 1.0;
  for (double v : other) cq[*bin_index(edges, v)] += 1.0;
  const double b = static_cast<double>(bins);
  const double zp = static_cast<double>(selected.size()) + alpha * b;
  const double zq = static_cast<double>(other.size()) + alpha * b;
  double kl = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    const double p = (cp[i] + alpha) / zp;
    const double q = (cq[i] + alpha) / zq;
    kl += p * std::log(p / q);
  }
  stat.kl = std::max(0.0, kl);
  return stat;
}

ColorValue kl_color(const DivergenceStat& stat) {
  if (stat.status != DivergenceStatus::kOk) return kNeutralGrey;
  return cv_color(stat.kl);
}

// ---- selection ----

RangePartition partition_by_range(std::span<const E2ERecord> e2e, Micros lo,
                                  Micros hi) {
  if (lo > hi) {
    throw Error(ErrorKind::kInvalidArgument, "range lower bound exceeds upper bound");
  }
  RangePartition out;
  for (const E2ERecord& r : e2e) {
    (r.response_time >= lo && r.response_time <= hi ? out.selected : out.other)
        .push_back(r.trace_id);
  }
  return out;
}

}  // namespace pathlens
