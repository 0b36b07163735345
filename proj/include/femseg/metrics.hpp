#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "femseg/core/error.hpp"
#include "femseg/core/volume.hpp"

// Spacing-aware evaluation of predicted vs ground-truth masks: overlap (DSC),
// directed and bidirectional Hausdorff distance, and the 95th-percentile
// variant. Distances are Euclidean between voxel centers in millimetres,
// computed on 6-connectivity surface voxels.

namespace femseg {

struct SurfacePoint {
  double z = 0, y = 0, x = 0;  // mm
};

using SurfacePointSet = std::vector<SurfacePoint>;

/// 2|P^G| / (|P|+|G|); in binary form identical to the soft squared-
/// denominator overlap since v^2 = v for v in {0,1}.
inline double dsc(const LabelMask& p, const LabelMask& g) {
  if (p.dims() != g.dims()) raise(ErrorKind::Shape, "dsc: mask dims differ");
  std::int64_t inter = 0, total = 0;
  const auto& pv = p.data.values();
  const auto& gv = g.data.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    inter += pv[i] & gv[i];
    total += pv[i] + gv[i];
  }
  if (total == 0) raise(ErrorKind::Degenerate, "dsc: both masks empty");
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

/// Foreground voxels with at least one background 6-neighbor (out-of-bounds
/// counts as background), as world coordinates scaled by spacing.
inline SurfacePointSet extract_surface(const LabelMask& m) {
  const Dim3 d = m.dims();
  SurfacePointSet pts;
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < d.x; ++x) {
        if (!m.data(z, y, x)) continue;
        const bool boundary = z == 0 || !m.data(z - 1, y, x) || z == d.z - 1 ||
                              !m.data(z + 1, y, x) || y == 0 || !m.data(z, y - 1, x) ||
                              y == d.y - 1 || !m.data(z, y + 1, x) || x == 0 ||
                              !m.data(z, y, x - 1) || x == d.x - 1 || !m.data(z, y, x + 1);
        if (boundary)
          pts.push_back(SurfacePoint{static_cast<double>(z) * m.spacing.z,
                                     static_cast<double>(y) * m.spacing.y,
                                     static_cast<double>(x) * m.spacing.x});
      }
  if (pts.empty()) raise(ErrorKind::Degenerate, "extract_surface: empty mask");
  return pts;
}

namespace metrics_detail {

inline double dist2(const SurfacePoint& a, const SurfacePoint& b) {
  const double dz = a.z - b.z, dy = a.y - b.y, dx = a.x - b.x;
  return dz * dz + dy * dy + dx * dx;
}

}  // namespace metrics_detail

/// max over x in X of min over y in Y of ||x - y||. Exact: the inner scan
/// stops early only when the running minimum can no longer raise the outer
/// maximum, which never changes the result.
inline double directed_hd(const SurfacePointSet& X, const SurfacePointSet& Y) {
  if (X.empty() || Y.empty()) raise(ErrorKind::Degenerate, "directed_hd: empty point set");
  double max2 = 0.0;
  for (const auto& x : X) {
    double min2 = metrics_detail::dist2(x, Y[0]);
    for (std::size_t j = 1; j < Y.size() && min2 > max2; ++j)
      min2 = std::min(min2, metrics_detail::dist2(x, Y[j]));
    if (min2 > max2) max2 = min2;
  }
  return std::sqrt(max2);
}

inline double hd(const SurfacePointSet& X, const SurfacePointSet& Y) {
  return std::max(directed_hd(X, Y), directed_hd(Y, X));
}

/// Distance from each point of X to its nearest point of Y.
inline std::vector<double> directed_min_distances(const SurfacePointSet& X,
                                                  const SurfacePointSet& Y) {
  if (X.empty() || Y.empty())
    raise(ErrorKind::Degenerate, "directed_min_distances: empty point set");
  std::vector<double> out;
  out.reserve(X.size());
  for (const auto& x : X) {
    double min2 = metrics_detail::dist2(x, Y[0]);
    for (std::size_t j = 1; j < Y.size(); ++j)
      min2 = std::min(min2, metrics_detail::dist2(x, Y[j]));
    out.push_back(std::sqrt(min2));
  }
  return out;
}

/// q-th quantile by linear interpolation between closest ranks; v is sorted.
inline double percentile_sorted(const std::vector<double>& v, double q) {
  const double h = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// max of the two directed 95th percentiles of nearest-surface distances.
inline double hd95(const SurfacePointSet& X, const SurfacePointSet& Y) {
  auto directed = [](const SurfacePointSet& A, const SurfacePointSet& B) {
    auto d = directed_min_distances(A, B);
    std::sort(d.begin(), d.end());
    return percentile_sorted(d, 0.95);
  };
  return std::max(directed(X, Y), directed(Y, X));
}

struct MetricsReport {
  std::string case_id;
  double dsc = 0.0;
  std::optional<double> hd_mm;    // unset when either surface is empty
  std::optional<double> hd95_mm;
  double prediction_seconds = 0.0;
};

/// Per-case metrics. An empty prediction against a nonempty ground truth
/// (or vice versa) yields dsc 0 with undefined distance metrics, so cohort
/// statistics stay finite and the case stays visible.
inline MetricsReport evaluate_case(const std::string& case_id, const LabelMask& pred,
                                   const LabelMask& gt, double prediction_seconds = 0.0) {
  if (pred.dims() != gt.dims()) raise(ErrorKind::Shape, "evaluate_case: mask dims differ");
  if (!(pred.spacing == gt.spacing))
    raise(ErrorKind::Shape, "evaluate_case: mask spacings differ");
  MetricsReport r;
  r.case_id = case_id;
  r.prediction_seconds = prediction_seconds;
  r.dsc = dsc(pred, gt);
  if (pred.foreground_count() > 0 && gt.foreground_count() > 0) {
    const auto sp = extract_surface(pred);
    const auto sg = extract_surface(gt);
    auto dpg = directed_min_distances(sp, sg);
    auto dgp = directed_min_distances(sg, sp);
    double m1 = 0.0, m2 = 0.0;
    for (double v : dpg) m1 = std::max(m1, v);
    for (double v : dgp) m2 = std::max(m2, v);
    r.hd_mm = std::max(m1, m2);
    std::sort(dpg.begin(), dpg.end());
    std::sort(dgp.begin(), dgp.end());
    r.hd95_mm = std::max(percentile_sorted(dpg, 0.95), percentile_sorted(dgp, 0.95));
  }
  return r;
}

struct SummaryStats {
  std::int64_t count = 0;
  double mean = 0, sd = 0, min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

inline SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  s.count = static_cast<std::int64_t>(values.size());
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(sq / static_cast<double>(values.size() - 1)) : 0.0;
  s.min = values.front();
  s.q1 = percentile_sorted(values, 0.25);
  s.median = percentile_sorted(values, 0.5);
  s.q3 = percentile_sorted(values, 0.75);
  s.max = values.back();
  return s;
}

/// Tab-separated per-case table plus a summary block with the cohort mean,
/// spread, and box-plot five-number summary per metric.
inline void write_metrics_report(std::ostream& os, const std::vector<MetricsReport>& reports) {
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  os << "case_id\tdsc\thd_mm\thd95_mm\tseconds\n";
  std::vector<double> dscs, hds, hd95s;
  std::int64_t undefined_hd = 0;
  for (const auto& r : reports) {
    os << r.case_id << '\t' << fmt(r.dsc) << '\t'
       << (r.hd_mm ? fmt(*r.hd_mm) : std::string("undefined")) << '\t'
       << (r.hd95_mm ? fmt(*r.hd95_mm) : std::string("undefined")) << '\t'
       << fmt(r.prediction_seconds) << '\n';
    dscs.push_back(r.dsc);
    if (r.hd_mm) hds.push_back(*r.hd_mm);
    if (r.hd95_mm) hd95s.push_back(*r.hd95_mm);
    if (!r.hd_mm) ++undefined_hd;
  }
  auto block = [&](const char* name, const SummaryStats& s) {
    os << "# summary\t" << name << "\tcount=" << s.count << "\tmean=" << fmt(s.mean)
       << "\tsd=" << fmt(s.sd) << "\tmin=" << fmt(s.min) << "\tq1=" << fmt(s.q1)
       << "\tmedian=" << fmt(s.median) << "\tq3=" << fmt(s.q3) << "\tmax=" << fmt(s.max) << '\n';
  };
  block("dsc", summarize(dscs));
  block("hd_mm", summarize(hds));
  block("hd95_mm", summarize(hd95s));
  if (undefined_hd > 0)
    os << "# summary\tundefined_hd_cases\tcount=" << undefined_hd << '\n';
}

}  // namespace femseg
