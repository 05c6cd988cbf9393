#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace oracle {

double pearson(std::span<const float> a, std::span<const float> b) {
  const std::size_t n = a.size();
  long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += a[i];
    sb += b[i];
  }
  const long double ma = sa / n;
  const long double mb = sb / n;
  for (std::size_t i = 0; i < n; ++i) {
    const long double da = a[i] - ma;
    const long double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa / n < 1e-12L || sbb / n < 1e-12L) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t byte : bytes) {
    crc ^= byte;
    for (int bit = 0; bit < 8; ++bit) crc = (crc & 1u) ? (crc >> 1) ^ 0xEDB88320u : crc >> 1;
  }
  return crc ^ 0xFFFFFFFFu;
}

double percentile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(rank));
  const auto above = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - std::floor(rank);
  return values[below] * (1.0 - frac) + values[above] * frac;
}

std::vector<double> bilinear(const std::vector<double>& plane, std::size_t h, std::size_t w,
                             std::size_t out_h, std::size_t out_w) {
  std::vector<double> out(out_h * out_w);
  const auto coordinate = [](std::size_t i, std::size_t in, std::size_t outn) {
    double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(outn) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sy = coordinate(y, h, out_h);
      const double sx = coordinate(x, w, out_w);
      double acc = 0.0;
      // Sum over all source pixels with tent weights; only the (at most)
      // four neighbours contribute.
      for (std::size_t yy = 0; yy < h; ++yy) {
        const double wy = std::max(0.0, 1.0 - std::abs(sy - static_cast<double>(yy)));
        if (wy == 0.0) continue;
        for (std::size_t xx = 0; xx < w; ++xx) {
          const double wx = std::max(0.0, 1.0 - std::abs(sx - static_cast<double>(xx)));
          acc += wy * wx * plane[yy * w + xx];
        }
      }
      out[y * out_w + x] = acc;
    }
  }
  return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, std::size_t h,
                  std::size_t w, std::size_t window, double sigma, double range) {
  const int r = static_cast<int>(window / 2);
  std::vector<double> kernel(window * window);
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      kernel[(dy + r) * window + (dx + r)] = v;
      total += v;
    }
  }
  for (double& v : kernel) v /= total;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t y = r; y + r < h; ++y) {
    for (std::size_t x = r; x + r < w; ++x) {
      double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double k = kernel[(dy + r) * window + (dx + r)];
          const double va = a[(y + dy) * w + (x + dx)];
          const double vb = b[(y + dy) * w + (x + dx)];
          ma += k * va;
          mb += k * vb;
          aa += k * va * va;
          bb += k * vb * vb;
          ab += k * va * vb;
        }
      }
      const double var_a = aa - ma * ma;
      const double var_b = bb - mb * mb;
      const double cov = ab - ma * mb;
      sum += ((2 * ma * mb + c1) * (2 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double mutual_information(const std::vector<double>& a, const std::vector<double>& b,
                          std::size_t bins) {
  const auto bin_of = [bins](const std::vector<double>& v) {
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<std::size_t> out(v.size(), 0);
    if (hi > lo) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        auto k = static_cast<std::size_t>((v[i] - lo) / (hi - lo) * static_cast<double>(bins));
        out[i] = std::min(k, bins - 1);
      }
    }
    return out;
  };
  const auto ba = bin_of(a);
  const auto bb = bin_of(b);
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> pa, pb;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{ba[i], bb[i]}] += 1.0 / n;
    pa[ba[i]] += 1.0 / n;
    pb[bb[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (const auto& [cell, p] : joint) mi += p * std::log2(p / (pa[cell.first] * pb[cell.second]));
  return mi;
}

std::size_t count_above(std::span<const float> values, double threshold) {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [&](float v) { return v > threshold; }));
}

std::vector<std::pair<std::size_t, double>> top_k(const std::vector<double>& row,
                                                  const std::vector<std::string>& keys,
                                                  std::size_t k) {
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!std::isnan(row[j])) order.push_back(j);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (row[x] != row[y]) return row[x] > row[y];
    return keys[x] < keys[y];
  });
  order.resize(std::min(k, order.size()));
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t j : order) out.emplace_back(j, row[j]);
  return out;
}

}  // namespace oracle
