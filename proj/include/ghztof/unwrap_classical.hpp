// SPDX-License-Identifier: Apache-2.0
#pragma once

// Classical multi-frequency unwrapping: CRT candidate search (exhaustive and
// reduced), kernel-density spatial voting, beat-phase (phasor) unwrapping and
// 1-D sequential unwrapping.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "ghztof/common.hpp"
#include "ghztof/correlation.hpp"
#include "ghztof/scene.hpp"

namespace ghztof {

struct CandidateRange {
  int min_wrap = 0;
  int max_wrap = 0;

  void validate() const {
    if (min_wrap < 0 || max_wrap < min_wrap) throw InvalidArgument("CandidateRange: need 0 <= min_wrap <= max_wrap");
  }
  int size() const { return max_wrap - min_wrap + 1; }

  /// Wrap counts at omega covering depths [min_depth_m, max_depth_m].
  static CandidateRange for_depths(double min_depth_m, double max_depth_m, double omega) {
    const double lo = std::floor(phase_from_depth(min_depth_m, omega) / kTwoPi);
    const double hi = std::floor(phase_from_depth(max_depth_m, omega) / kTwoPi);
    return {std::max(0, static_cast<int>(lo)), std::max(0, static_cast<int>(hi))};
  }
};

/// omega1 is the reference channel (depth is reported at omega1); k = omega1 / omega2
/// converts unwrapped phase at omega2 into phase at omega1.
struct FrequencyPair {
  double omega1 = 0.0;
  double omega2 = 0.0;

  void validate() const {
    if (!(omega1 > 0.0) || !(omega2 > 0.0)) throw InvalidArgument("FrequencyPair: frequencies must be > 0");
    if (omega1 == omega2) throw InvalidArgument("FrequencyPair: frequencies must differ");
  }
  double k() const { return omega1 / omega2; }
  double wrap_ratio() const { return omega2 / omega1; }
};

struct KdeParams {
  int window = 9;             // odd; 1 degenerates to plain CRT
  double sigma_spatial = 2.0; // px
  double sigma_hyp = 0.5;     // rad of unwrapped phase at omega1
  bool amplitude_weighting = true;

  void validate() const {
    if (window < 1 || window % 2 == 0) throw InvalidArgument("KdeParams: window must be odd and >= 1");
    if (!(sigma_spatial > 0.0) || !(sigma_hyp > 0.0)) throw InvalidArgument("KdeParams: sigmas must be > 0");
  }
};

enum class CrtSearch { Exhaustive, Reduced };

struct CrtSolution {
  int n1 = 0;
  int n2 = 0;
  double unwrapped = 0.0; // phase at omega1
  double residual = 0.0;  // squared consistency residual
};

/// (phi1 + 2 pi n1) - k (phi2 + 2 pi n2): zero for the true wrap pair on noiseless data.
inline double crt_residual(double phi1, double phi2, const FrequencyPair &pair, int n1, int n2) {
  const double k = pair.k();
  return (phi1 - k * phi2) + kTwoPi * (n1 - k * n2);
}

/// Wrap counts at omega2 reachable from the omega1 range.
inline CandidateRange secondary_range(const CandidateRange &r, const FrequencyPair &pair) {
  const double q = pair.wrap_ratio();
  const int lo = std::max(0, static_cast<int>(std::floor(r.min_wrap * q)) - 1);
  const int hi = static_cast<int>(std::ceil((r.max_wrap + 1) * q)) + 1;
  return {lo, hi};
}

namespace detail {

/// Strict improvement in (residual, n1, n2) lexicographic order; candidates are
/// visited with ascending n1 then n2, so strict < keeps the smallest pair on ties.
inline void consider(CrtSolution &best, double phi1, double phi2, const FrequencyPair &pair, int n1, int n2) {
  const double r = crt_residual(phi1, phi2, pair, n1, n2);
  const double r2 = r * r;
  if (r2 < best.residual) {
    best.residual = r2;
    best.n1 = n1;
    best.n2 = n2;
  }
}

/// Best omega2 wrap for a fixed n1: the residual is a convex parabola in n2
/// with its minimum at n2*, so the nearest integers around n2* suffice.
inline void best_secondary(CrtSolution &best, double phi1, double phi2, const FrequencyPair &pair, int n1,
                           const CandidateRange &r2) {
  const double n2_star = ((phi1 + kTwoPi * n1) / pair.k() - phi2) / kTwoPi;
  const double centre = std::clamp(std::nearbyint(n2_star), static_cast<double>(r2.min_wrap),
                                   static_cast<double>(r2.max_wrap));
  const int c = static_cast<int>(centre);
  for (int n2 = std::max(r2.min_wrap, c - 1); n2 <= std::min(r2.max_wrap, c + 1); ++n2)
    consider(best, phi1, phi2, pair, n1, n2);
}

} // namespace detail

inline CrtSolution crt_unwrap_pixel(double phi1, double phi2, const FrequencyPair &pair, const CandidateRange &range,
                                    CrtSearch search = CrtSearch::Reduced) {
  pair.validate();
  if (range.min_wrap < 0 || range.max_wrap < range.min_wrap) throw InvalidArgument("crt_unwrap_pixel: empty candidate set");
  const CandidateRange r2 = secondary_range(range, pair);
  CrtSolution best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int n1 = range.min_wrap; n1 <= range.max_wrap; ++n1) {
    if (search == CrtSearch::Exhaustive) {
      for (int n2 = r2.min_wrap; n2 <= r2.max_wrap; ++n2) detail::consider(best, phi1, phi2, pair, n1, n2);
    } else {
      detail::best_secondary(best, phi1, phi2, pair, n1, r2);
    }
  }
  best.unwrapped = phi1 + kTwoPi * best.n1;
  return best;
}

/// Wrap counts and metric depth at the reference frequency.
struct UnwrapResult {
  Grid<int> wraps;
  Grid<double> depth_m;
  Mask valid;
};

namespace detail {

inline void require_pair_maps(const RecoveredMaps &a, const RecoveredMaps &b) {
  require_same_shape(a.phase, b.phase, "unwrap");
  require_same_shape(a.phase, a.valid, "unwrap");
  require_same_shape(b.phase, b.valid, "unwrap");
}

inline UnwrapResult empty_result(int h, int w) { return {Grid<int>(h, w), Grid<double>(h, w), Mask(h, w)}; }

} // namespace detail

inline UnwrapResult crt_unwrap_map(const RecoveredMaps &m1, const RecoveredMaps &m2, const FrequencyPair &pair,
                                   const CandidateRange &range, CrtSearch search = CrtSearch::Reduced) {
  detail::require_pair_maps(m1, m2);
  range.validate();
  UnwrapResult out = detail::empty_result(m1.height(), m1.width());
  for (std::size_t i = 0; i < m1.phase.data.size(); ++i) {
    const CrtSolution s = crt_unwrap_pixel(m1.phase.data[i], m2.phase.data[i], pair, range, search);
    out.wraps.data[i] = s.n1;
    out.depth_m.data[i] = depth_from_phase(s.unwrapped, pair.omega1);
    out.valid.data[i] = (m1.valid.data[i] && m2.valid.data[i]) ? 1 : 0;
  }
  return out;
}

/// Spatially consistent unwrapping by kernel-density voting.
///
/// Pass 1 computes a CRT hypothesis (unwrapped phase at omega1) per pixel.
/// Pass 2 scores, for every pixel p, each wrap count n suggested by a valid
/// neighbour q in the window:
///
///   S(n) = sum_q  w_s(|p - q|) * w_a(q) * exp(-(phi1_p + 2 pi n - Phi_q)^2 / (2 sigma_hyp^2))
///
/// with a Gaussian spatial kernel w_s and optional amplitude weight w_a. The
/// highest score wins; ties go to the smaller n. Both passes read only pass-1
/// output, so the result is independent of evaluation order.
inline UnwrapResult kde_unwrap_map(const RecoveredMaps &m1, const RecoveredMaps &m2, const FrequencyPair &pair,
                                   const CandidateRange &range, const KdeParams &params = {}) {
  detail::require_pair_maps(m1, m2);
  range.validate();
  params.validate();
  const int h = m1.height(), w = m1.width();
  if (params.window > h || params.window > w) throw InvalidArgument("kde_unwrap_map: window exceeds image dimensions");

  const UnwrapResult crt = crt_unwrap_map(m1, m2, pair, range, CrtSearch::Reduced);
  Grid<double> hyp(h, w);
  for (std::size_t i = 0; i < hyp.data.size(); ++i) hyp.data[i] = m1.phase.data[i] + kTwoPi * crt.wraps.data[i];

  double amp_max = 0.0;
  for (double a : m1.amplitude.data) amp_max = std::max(amp_max, a);
  const int half = params.window / 2;
  std::vector<double> spatial(static_cast<std::size_t>(params.window * params.window));
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx)
      spatial[static_cast<std::size_t>((dy + half) * params.window + dx + half)] =
          std::exp(-(dx * dx + dy * dy) / (2.0 * params.sigma_spatial * params.sigma_spatial));
  const double inv_two_var = 1.0 / (2.0 * params.sigma_hyp * params.sigma_hyp);

  UnwrapResult out = detail::empty_result(h, w);
  std::vector<int> candidates;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double phi1 = m1.phase(y, x);
      candidates.clear();
      candidates.push_back(crt.wraps(y, x));
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w || !crt.valid(yy, xx)) continue;
          const int n = static_cast<int>(std::nearbyint((hyp(yy, xx) - phi1) / kTwoPi));
          if (n >= range.min_wrap && n <= range.max_wrap) candidates.push_back(n);
        }
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

      int best_n = crt.wraps(y, x);
      double best_score = -1.0;
      for (int n : candidates) {
        const double own = phi1 + kTwoPi * n;
        double score = 0.0;
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w || !crt.valid(yy, xx)) continue;
            double wq = spatial[static_cast<std::size_t>((dy + half) * params.window + dx + half)];
            if (params.amplitude_weighting && amp_max > 0.0) wq *= m1.amplitude(yy, xx) / amp_max;
            const double d = own - hyp(yy, xx);
            score += wq * std::exp(-d * d * inv_two_var);
          }
        if (score > best_score) {
          best_score = score;
          best_n = n;
        }
      }
      out.wraps(y, x) = best_n;
      out.depth_m(y, x) = depth_from_phase(phi1 + kTwoPi * best_n, pair.omega1);
      out.valid(y, x) = crt.valid(y, x);
    }
  return out;
}

/// Beat-phase unwrapping for a close frequency pair (omega1, omega1 + delta):
/// the beat (phi2 - phi1) mod 2pi gives a coarse depth over c / (2 delta),
/// which selects the fine wrap count at omega1.
struct PhasorSolution {
  int n1 = 0;
  double depth_m = 0.0;
  double coarse_depth_m = 0.0;
};

inline double beat_range(double delta) { return kSpeedOfLight / (2.0 * delta); }

inline PhasorSolution phasor_unwrap_pixel(double phi1, double phi2, double omega1, double delta, double max_depth_m) {
  if (!(delta > 0.0)) throw InvalidArgument("phasor_unwrap: delta must be > 0");
  if (max_depth_m > beat_range(delta)) throw InvalidArgument("phasor_unwrap: max depth exceeds the beat range");
  PhasorSolution s;
  const double beat = wrap_to_2pi(phi2 - phi1);
  s.coarse_depth_m = depth_from_phase(beat, delta);
  const double coarse_phase = phase_from_depth(s.coarse_depth_m, omega1);
  const int n_max = static_cast<int>(std::floor(phase_from_depth(max_depth_m, omega1) / kTwoPi));
  s.n1 = std::clamp(static_cast<int>(std::nearbyint((coarse_phase - phi1) / kTwoPi)), 0, std::max(0, n_max));
  s.depth_m = depth_from_phase(phi1 + kTwoPi * s.n1, omega1);
  return s;
}

inline UnwrapResult phasor_unwrap(const RecoveredMaps &m1, const RecoveredMaps &m2, double delta, double max_depth_m) {
  detail::require_pair_maps(m1, m2);
  UnwrapResult out = detail::empty_result(m1.height(), m1.width());
  for (std::size_t i = 0; i < m1.phase.data.size(); ++i) {
    const PhasorSolution s = phasor_unwrap_pixel(m1.phase.data[i], m2.phase.data[i], m1.frequency, delta, max_depth_m);
    out.wraps.data[i] = s.n1;
    out.depth_m.data[i] = s.depth_m;
    out.valid.data[i] = (m1.valid.data[i] && m2.valid.data[i]) ? 1 : 0;
  }
  return out;
}

/// Cumulative 1-D unwrapping: each step adds the multiple of 2pi that maps the
/// successive difference into (-pi, pi].
inline std::vector<double> sequential_unwrap(std::span<const double> profile) {
  std::vector<double> out(profile.begin(), profile.end());
  double offset = 0.0;
  for (std::size_t i = 1; i < out.size(); ++i) {
    const double d = profile[i] - profile[i - 1];
    offset += wrap_to_pi(d) - d;
    out[i] = profile[i] + offset;
  }
  return out;
}

/// Row-wise sequential unwrapping of the omega1 phase map; each row starts at wrap 0.
inline UnwrapResult sequential_unwrap_map(const RecoveredMaps &m1) {
  const int h = m1.height(), w = m1.width();
  UnwrapResult out = detail::empty_result(h, w);
  std::vector<double> row(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row[static_cast<std::size_t>(x)] = m1.phase(y, x);
    const std::vector<double> u = sequential_unwrap(row);
    for (int x = 0; x < w; ++x) {
      const double ph = u[static_cast<std::size_t>(x)];
      out.wraps(y, x) = static_cast<int>(std::floor(ph / kTwoPi));
      out.depth_m(y, x) = depth_from_phase(ph, m1.frequency);
      out.valid(y, x) = m1.valid(y, x);
    }
  }
  return out;
}

} // namespace ghztof
