#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <vector>

#include "roughdyadic/path.hpp"
#include "roughdyadic/tensor.hpp"

namespace roughdyadic {

/// Degree-2 signature of a straight segment with increment delta:
/// (1, delta, delta(x)delta / 2).
GroupTensor2 lift_segment(const Vec& delta);

/// Lift of the polygonal path over [s, t] (dyadic endpoints), accumulated
/// left to right over the covering (partial) segments. This is the generic
/// route; the dyadic_* closed forms below must agree with it.
GroupTensor2 lift_polygonal(const PolygonalPath& P, double s, double t);

/// Level-1 increment of the level-m polygon over (t_n^{k-1}, t_n^k]:
/// xi_n^k below level m, the proportional slice 2^(m-n) xi_m^{k(n,m)} at or
/// above it.
Vec dyadic_level1(const DyadicBrownianPath& path, int m, int n, std::uint64_t k);

/// Level-2 increment of the level-m polygon over (t_n^{k-1}, t_n^k].
/// Below level m this is the tensor square of the chord plus half the
/// antisymmetric bracket sum over the block of level-m increments; at or
/// above, the pure scaled tensor square.
Mat dyadic_level2(const DyadicBrownianPath& path, int m, int n, std::uint64_t k);

/// Level-j difference between the level-(m+1) and level-m polygons over
/// (t_n^{k-1}, t_n^k]. Level 1 vanishes identically for n <= m.
Vec dyadic_diff_level1(const DyadicBrownianPath& path, int m, int n, std::uint64_t k);
Mat dyadic_diff_level2(const DyadicBrownianPath& path, int m, int n, std::uint64_t k);

/// All 2^n interval lifts of the level-m polygon at dyadic level n, computed
/// in a single left-to-right pass over the level-max(m,n) grid.
std::vector<GroupTensor2> sweep_interval_lifts(const PolygonalPath& P, int n);

/// Memoizing front end for the (m, n, k) interval-lift queries the sweeps
/// make. Rows are computed once per (n) and shared; concurrent queries are
/// guarded and return identical values.
class PolygonalLiftCache {
  public:
    explicit PolygonalLiftCache(const PolygonalPath& P) : path_(P) {}

    const GroupTensor2& lift(int n, std::uint64_t k) const;

  private:
    PolygonalPath path_;
    mutable std::mutex mu_;
    mutable std::map<int, std::vector<GroupTensor2>> rows_;
};

/// Signed (Levy) area: antisymmetric part of the level-2 block.
Mat levy_area(const GroupTensor2& g);

}  // namespace roughdyadic
