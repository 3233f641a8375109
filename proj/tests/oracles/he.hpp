#pragma once

// Plain floating-point histogram equalization, written straight from the
// textbook formula without sharing code with the library.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

inline std::vector<std::uint8_t> equalize(const std::vector<std::uint8_t>& px) {
  std::vector<double> hist(256, 0.0);
  for (auto v : px) hist[v] += 1;
  int occupied = 0;
  for (double c : hist) occupied += c > 0;
  if (occupied <= 1) return px;
  std::vector<double> cdf(256);
  double run = 0, cdf_min = -1;
  for (int v = 0; v < 256; ++v) {
    run += hist[v];
    cdf[v] = run;
    if (cdf_min < 0 && hist[v] > 0) cdf_min = run;
  }
  const double n = static_cast<double>(px.size());
  std::vector<std::uint8_t> out(px.size());
  for (std::size_t i = 0; i < px.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::round((cdf[px[i]] - cdf_min) / (n - cdf_min) * 255.0));
  return out;
}

}  // namespace oracle
