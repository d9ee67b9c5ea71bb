#include "roughdyadic/path.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "roughdyadic/rng.hpp"

namespace roughdyadic {

namespace {

// Normal-pair layout inside a path's counter stream. The endpoint uses pair
// indices [0, npairs); the midpoints of refinement level l use the disjoint
// range [npairs * 2^l, npairs * 2^(l+1)), one slot of npairs pairs per
// interval. Indexing by (level, interval) rather than draw order is what
// makes refinement consistent.
struct PairLayout {
    int npairs;  // normals per grid point, packed two per Box-Muller pair

    explicit PairLayout(int dim) : npairs((dim + 1) / 2) {}

    std::uint64_t endpoint(int pair) const { return static_cast<std::uint64_t>(pair); }
    std::uint64_t midpoint(int level, std::uint64_t interval, int pair) const {
        return static_cast<std::uint64_t>(npairs) * ((1ULL << level) + interval) + pair;
    }
};

void fill_normals(std::uint64_t key, const PairLayout& layout, std::uint64_t base_pair, int dim,
                  double scale, double* out) {
    for (int p = 0; p < layout.npairs; ++p) {
        const NormalPair z = normal_pair(key, base_pair + p);
        out[2 * p] = scale * z.z0;
        if (2 * p + 1 < dim) out[2 * p + 1] = scale * z.z1;
    }
}

}  // namespace

DyadicBrownianPath DyadicBrownianPath::generate(int dim, int resolution, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("generate: dim must be >= 1");
    if (resolution < 0 || resolution > kMaxResolution)
        throw std::invalid_argument("generate: resolution out of range [0, 24]");

    DyadicBrownianPath path;
    path.dim_ = dim;
    path.resolution_ = resolution;
    path.seed_ = seed;
    const std::size_t npts = (1ULL << resolution) + 1;
    path.values_.assign(npts * dim, 0.0);

    const std::uint64_t key = derive_key(seed, 0);
    const PairLayout layout(dim);

    // Endpoint w_1 ~ N(0, I_d).
    fill_normals(key, layout, layout.endpoint(0), dim, 1.0, &path.values_[(npts - 1) * dim]);

    // Midpoint refinement, level by level.
    std::vector<double> z(static_cast<std::size_t>(2 * layout.npairs));
    for (int level = 0; level < resolution; ++level) {
        const std::uint64_t nintervals = 1ULL << level;
        const std::size_t stride = 1ULL << (resolution - level);  // grid step of one interval
        const double sd = std::sqrt(std::ldexp(1.0, -(level + 2)));
        for (std::uint64_t k = 0; k < nintervals; ++k) {
            fill_normals(key, layout, layout.midpoint(level, k, 0), dim, sd, z.data());
            const std::size_t lo = k * stride;
            const std::size_t mid = lo + stride / 2;
            const std::size_t hi = lo + stride;
            for (int i = 0; i < dim; ++i)
                path.values_[mid * dim + i] =
                    0.5 * (path.values_[lo * dim + i] + path.values_[hi * dim + i]) + z[i];
        }
    }
    return path;
}

DyadicBrownianPath DyadicBrownianPath::from_values(int dim, int resolution,
                                                   std::vector<double> values,
                                                   std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("from_values: dim must be >= 1");
    const std::size_t npts = (1ULL << resolution) + 1;
    if (values.size() != npts * static_cast<std::size_t>(dim))
        throw std::invalid_argument("from_values: value array has wrong shape");
    for (int i = 0; i < dim; ++i)
        if (values[i] != 0.0) throw std::invalid_argument("from_values: path must start at 0");
    DyadicBrownianPath path;
    path.dim_ = dim;
    path.resolution_ = resolution;
    path.seed_ = seed;
    path.values_ = std::move(values);
    return path;
}

Vec DyadicBrownianPath::xi(int n, std::uint64_t k) const {
    Vec out(dim_);
    xi_into(n, k, out.data());
    return out;
}

void DyadicBrownianPath::xi_into(int n, std::uint64_t k, double* out) const {
    if (n < 0 || n > resolution_ || k < 1 || k > (1ULL << n))
        throw std::out_of_range("xi: index out of range");
    const std::size_t stride = 1ULL << (resolution_ - n);
    const double* hi = point(k * stride);
    const double* lo = point((k - 1) * stride);
    for (int i = 0; i < dim_; ++i) out[i] = hi[i] - lo[i];
}

void DyadicBrownianPath::dump_csv(std::ostream& os) const {
    os << "t";
    for (int i = 1; i <= dim_; ++i) os << ",x" << i;
    os << "\n";
    char buf[32];
    const std::size_t npts = grid_points();
    for (std::size_t k = 0; k < npts; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", std::ldexp(static_cast<double>(k), -resolution_));
        os << buf;
        for (int i = 0; i < dim_; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", at(k, i));
            os << ',' << buf;
        }
        os << "\n";
    }
}

DyadicBrownianPath DyadicBrownianPath::load_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("load_csv: empty input");
    int dim = 0;
    for (char c : line)
        if (c == ',') ++dim;
    if (dim < 1 || line.rfind("t,", 0) != 0) throw std::runtime_error("load_csv: bad header");

    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');  // t column, implied by row index
        for (int i = 0; i < dim; ++i) {
            if (!std::getline(ls, cell, ',')) throw std::runtime_error("load_csv: short row");
            values.push_back(std::stod(cell));
        }
        ++rows;
    }
    int resolution = 0;
    while ((1ULL << resolution) + 1 < rows) ++resolution;
    if ((1ULL << resolution) + 1 != rows)
        throw std::runtime_error("load_csv: row count is not 2^M + 1");
    return from_values(dim, resolution, std::move(values));
}

std::uint64_t parent_index(int n, std::uint64_t k, int m) {
    if (n < m) throw std::invalid_argument("parent_index: requires n >= m");
    const int shift = n - m;
    return (k + (1ULL << shift) - 1) >> shift;
}

PolygonalPath::PolygonalPath(const DyadicBrownianPath& parent, int level)
    : parent_(&parent), level_(level), shift_(parent.resolution() - level) {
    if (level < 0 || level > parent.resolution())
        throw std::invalid_argument("polygonal: level exceeds path resolution");
}

Vec PolygonalPath::eval(double t) const {
    if (t < 0.0 || t > 1.0) throw std::out_of_range("PolygonalPath::eval: t outside [0,1]");
    const double scaled = std::ldexp(t, level_);
    std::uint64_t k = static_cast<std::uint64_t>(scaled);
    if (k >= (1ULL << level_)) k = (1ULL << level_) - 1;  // t == 1 falls in the last segment
    const double frac = scaled - static_cast<double>(k);
    if (frac == 0.0) return vertex(k);  // vertices are exact
    if (frac == 1.0) return vertex(k + 1);
    const double* lo = vertex_ptr(k);
    const double* hi = vertex_ptr(k + 1);
    Vec out(dim());
    for (int i = 0; i < dim(); ++i) out[i] = lo[i] + frac * (hi[i] - lo[i]);
    return out;
}

}  // namespace roughdyadic
