#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "roughdyadic/tensor.hpp"

namespace roughdyadic {

constexpr int kMaxResolution = 24;

/// Sample path on the dyadic grid k/2^M of [0,1], started at the origin.
/// Generated paths are refinement-consistent: the same seed at a finer
/// resolution restricts bitwise to the coarser grid.
class DyadicBrownianPath {
  public:
    /// Midpoint (bridge) construction: the endpoint is N(0, I_d) and each
    /// refinement level n sets the midpoint of every level-n interval to the
    /// endpoint average plus an independent N(0, 2^-(n+2) I_d) displacement.
    static DyadicBrownianPath generate(int dim, int resolution, std::uint64_t seed);

    /// Wrap explicit grid values (oracle paths, CSV loads). values is
    /// (2^resolution + 1) * dim, row-major, first row all zero.
    static DyadicBrownianPath from_values(int dim, int resolution, std::vector<double> values,
                                          std::uint64_t seed = 0);

    int dim() const { return dim_; }
    int resolution() const { return resolution_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t grid_points() const { return values_.size() / dim_; }

    /// Value at t = k/2^resolution, component i.
    double at(std::size_t k, int i) const { return values_[k * dim_ + i]; }
    const double* point(std::size_t k) const { return values_.data() + k * dim_; }
    Vec value(std::size_t k) const {
        return Vec(values_.begin() + static_cast<long>(k * dim_),
                   values_.begin() + static_cast<long>((k + 1) * dim_));
    }

    /// Increment over (t_n^{k-1}, t_n^k], 1 <= k <= 2^n, n <= resolution.
    Vec xi(int n, std::uint64_t k) const;
    void xi_into(int n, std::uint64_t k, double* out) const;

    void dump_csv(std::ostream& os) const;
    static DyadicBrownianPath load_csv(std::istream& is);

  private:
    int dim_ = 0;
    int resolution_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> values_;  // (2^M + 1) x dim, row-major
};

/// k(n,m) = ceil(k / 2^(n-m)): the level-m interval containing the level-n
/// interval (t_n^{k-1}, t_n^k]; requires n >= m, equals k at n = m.
std::uint64_t parent_index(int n, std::uint64_t k, int m);

/// Piecewise-linear interpolation of a parent path at the level-m dyadics.
class PolygonalPath {
  public:
    PolygonalPath(const DyadicBrownianPath& parent, int level);

    int dim() const { return parent_->dim(); }
    int level() const { return level_; }
    const DyadicBrownianPath& parent() const { return *parent_; }

    /// Vertex k/2^level.
    Vec vertex(std::uint64_t k) const { return parent_->value(k << shift_); }
    const double* vertex_ptr(std::uint64_t k) const { return parent_->point(k << shift_); }

    /// Linear interpolation between enclosing vertices.
    Vec eval(double t) const;

  private:
    const DyadicBrownianPath* parent_;
    int level_;
    int shift_;  // resolution - level
};

/// polygonal(path, m): view of the level-m vertex skeleton.
inline PolygonalPath polygonal(const DyadicBrownianPath& path, int m) {
    return PolygonalPath(path, m);
}

}  // namespace roughdyadic
