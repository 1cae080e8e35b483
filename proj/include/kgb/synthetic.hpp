#pragma once

#include <cstdint>
#include <vector>

#include "kgb/errors.hpp"
#include "kgb/rng.hpp"

namespace kgb {

struct SyntheticPoint {
  double x = 0.0;
  double y = 0.0;
  double target = 0.0;
  bool in_domain = false;
};

// Membership predicate for the two-feature synthetic domain:
//   1/10 <= (x-1/2)^2 - (y-1/2)^2 <= 1/4, x outside (2/5, 3/5), y outside
//   (2/5, 3/5).
// The difference of squares is the form as printed; sum_variant swaps in
// (x-1/2)^2 + (y-1/2)^2, which turns the band into an annulus.
inline bool synthetic_domain_contains(double x, double y, bool sum_variant = false) {
  const double u = x - 0.5;
  const double v = y - 0.5;
  const double q = sum_variant ? u * u + v * v : u * u - v * v;
  if (q < 0.1 || q > 0.25) return false;
  if (x > 0.4 && x < 0.6) return false;
  if (y > 0.4 && y < 0.6) return false;
  return true;
}

// Uniform sample over the unit square with target x + y. Points inside the
// domain form the training set; the full sample is the evaluation set. Each
// point consumes exactly two draws (x then y) from one stream, so a seed
// pins the point set.
inline std::vector<SyntheticPoint> sample_synthetic(int points, std::uint64_t seed,
                                                    bool sum_variant = false) {
  if (points < 1) throw ContractError("need at least one point");
  std::vector<SyntheticPoint> out;
  out.reserve(static_cast<std::size_t>(points));
  RngStream stream(derive_key(seed, 0x686561727412abull));
  for (int i = 0; i < points; ++i) {
    SyntheticPoint p;
    p.x = stream.next_unit_open();
    p.y = stream.next_unit_open();
    p.target = p.x + p.y;
    p.in_domain = synthetic_domain_contains(p.x, p.y, sum_variant);
    out.push_back(p);
  }
  return out;
}

}  // namespace kgb
