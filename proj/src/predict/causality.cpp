#include "fastgrant/predict/causality.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fastgrant::predict {

std::vector<std::pair<std::size_t, std::size_t>> segment_ranges(const Segments& segments,
                                                                std::size_t length) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (segments.empty()) {
    if (length > 0) out.emplace_back(0, length);
    return out;
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const std::size_t b = segments[i];
    const std::size_t e = i + 1 < segments.size() ? segments[i + 1] : length;
    if (b > e || e > length) throw std::invalid_argument("segments out of order or out of range");
    if (e > b) out.emplace_back(b, e);
  }
  return out;
}

namespace {

double rss(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd coef = a.completeOrthogonalDecomposition().solve(b);
  return (a * coef - b).squaredNorm();
}

bool constant(std::span<const std::uint8_t> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

}  // namespace

GrangerResult granger_score(std::span<const std::uint8_t> x,
                            std::span<const std::uint8_t> y, int max_lag,
                            const Segments& segments) {
  if (x.size() != y.size()) throw std::invalid_argument("granger: sequences differ in length");
  if (max_lag < 1) throw std::invalid_argument("granger: max_lag must be >= 1");
  const auto L = y.size();
  if (L <= static_cast<std::size_t>(10 * max_lag)) {
    throw std::invalid_argument("granger: sequence length must exceed 10 * max_lag");
  }
  if (constant(y) || constant(x)) return {0.0, true};

  const auto lag = static_cast<std::size_t>(max_lag);
  std::vector<std::size_t> rows;
  for (auto [b, e] : segment_ranges(segments, L)) {
    for (std::size_t t = b + lag; t < e; ++t) rows.push_back(t);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(max_lag);
  if (n <= 2 * p + 1) return {0.0, true};

  Eigen::MatrixXd full(n, 1 + 2 * p);
  Eigen::VectorXd target(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t t = rows[static_cast<std::size_t>(r)];
    target(r) = y[t];
    full(r, 0) = 1.0;
    for (Eigen::Index l = 1; l <= p; ++l) {
      full(r, l) = y[t - static_cast<std::size_t>(l)];
      full(r, p + l) = x[t - static_cast<std::size_t>(l)];
    }
  }
  const double rss_full = rss(full, target);
  const double rss_restricted = rss(full.leftCols(1 + p), target);
  if (rss_restricted <= 0.0) return {0.0, true};
  // Guards the exact-fit case, where the full model leaves no residual.
  const double floor = 1e-12 * static_cast<double>(n);
  const double score = std::log((rss_restricted + floor) / (rss_full + floor));
  return {std::max(0.0, score), false};
}

double directed_information(std::span<const std::uint8_t> x,
                            std::span<const std::uint8_t> y, int k,
                            const Segments& segments) {
  if (x.size() != y.size()) throw std::invalid_argument("directed information: sequences differ in length");
  if (k < 1 || k > 8) throw std::invalid_argument("directed information: context length must be 1..8");
  const auto kk = static_cast<std::size_t>(k);
  // Index layout: [x context (k+1 bits)] [y past (k bits)] [y_t].
  const std::size_t x_states = std::size_t{1} << (kk + 1);
  const std::size_t y_states = std::size_t{1} << kk;
  std::vector<double> joint(x_states * y_states * 2, 0.0);
  double total = 0;
  for (auto [b, e] : segment_ranges(segments, y.size())) {
    for (std::size_t t = b + kk; t < e; ++t) {
      std::size_t xc = 0, yc = 0;
      for (std::size_t l = 0; l <= kk; ++l) xc = (xc << 1) | (x[t - kk + l] & 1u);
      for (std::size_t l = 0; l < kk; ++l) yc = (yc << 1) | (y[t - kk + l] & 1u);
      joint[(xc * y_states + yc) * 2 + (y[t] & 1u)] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0) throw std::invalid_argument("directed information: sequence shorter than its context");

  // I(X; Y | Z) = sum p(x,z,y) log p(x,z,y) p(z) / (p(x,z) p(z,y))
  std::vector<double> pz(y_states, 0.0), pzy(y_states * 2, 0.0), pxz(x_states * y_states, 0.0);
  for (std::size_t xc = 0; xc < x_states; ++xc) {
    for (std::size_t yc = 0; yc < y_states; ++yc) {
      for (std::size_t v = 0; v < 2; ++v) {
        const double c = joint[(xc * y_states + yc) * 2 + v];
        pz[yc] += c;
        pzy[yc * 2 + v] += c;
        pxz[xc * y_states + yc] += c;
      }
    }
  }
  double bits = 0;
  for (std::size_t xc = 0; xc < x_states; ++xc) {
    for (std::size_t yc = 0; yc < y_states; ++yc) {
      for (std::size_t v = 0; v < 2; ++v) {
        const double c = joint[(xc * y_states + yc) * 2 + v];
        if (c == 0) continue;
        bits += c * std::log2(c * pz[yc] / (pxz[xc * y_states + yc] * pzy[yc * 2 + v]));
      }
    }
  }
  return std::max(0.0, bits / total);
}

PermutationNull permutation_null(
    std::span<const std::uint8_t> cause, const Segments& segments,
    const std::function<double(std::span<const std::uint8_t>, const Segments&)>& statistic,
    int shuffles, double quantile, sim::RngStream& rng) {
  if (shuffles < 1) throw std::invalid_argument("permutation null needs at least one shuffle");
  if (quantile < 0.0 || quantile > 1.0) throw std::invalid_argument("quantile must be in [0,1]");
  PermutationNull out;
  const auto ranges = segment_ranges(segments, cause.size());
  std::vector<std::uint8_t> buf(cause.begin(), cause.end());
  std::vector<std::size_t> order(ranges.size());
  for (int s = 0; s < shuffles; ++s) {
    if (ranges.size() > 1) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
        std::swap(order[i], order[j]);
      }
      for (std::size_t r = 0; r < ranges.size(); ++r) {
        const auto [db, de] = ranges[r];
        const auto [sb, se] = ranges[order[r]];
        for (std::size_t t = 0; t < de - db; ++t) {
          buf[db + t] = sb + t < se ? cause[sb + t] : cause[se - 1];
        }
      }
    } else {
      std::copy(cause.begin(), cause.end(), buf.begin());
      for (std::size_t i = buf.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(buf[i - 1], buf[j]);
      }
    }
    out.samples.push_back(statistic(buf, segments));
  }
  std::vector<double> sorted = out.samples;
  std::sort(sorted.begin(), sorted.end());
  const auto idx = static_cast<std::size_t>(
      std::ceil(quantile * static_cast<double>(sorted.size()))) ;
  out.cutoff = sorted[std::min(sorted.size() - 1, idx == 0 ? 0 : idx - 1)];
  return out;
}

}  // namespace fastgrant::predict
