#include "hef/grid.hpp"

#include "hef/error.hpp"
#include "hef/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hef {

bool GridDomain::has_boundary() const {
    return std::any_of(boundary_mask.begin(), boundary_mask.end(), [](std::uint8_t b) { return b != 0; });
}

double GridDomain::volume() const {
    double v = 0.0;
    for (std::size_t i = 0; i < nodes(); ++i)
        if (active(i)) v += quad_weights[i];
    return v;
}

double GridDomain::min_conformal_factor() const {
    double m = INFINITY;
    for (std::size_t i = 0; i < nodes(); ++i)
        if (active(i)) m = std::min(m, conformal_factor[i]);
    return m;
}

std::size_t GridDomain::active_count() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < nodes(); ++i) c += active(i) ? 1 : 0;
    return c;
}

std::vector<std::size_t> GridDomain::interior_nodes() const {
    std::vector<std::size_t> out;
    out.reserve(nodes());
    for (std::size_t i = 0; i < nodes(); ++i)
        if (interior(i)) out.push_back(i);
    return out;
}

GridDomain build_flat_torus(int n, double side_length) {
    if (n < 8) {
        std::ostringstream os;
        os << "build_flat_torus: need n >= 8 lattice points per side, got " << n;
        throw InvalidArgument(os.str());
    }
    if (!(side_length > 0.0) || !std::isfinite(side_length))
        throw InvalidArgument("build_flat_torus: side_length must be positive");
    GridDomain d;
    d.n = n;
    d.side_length = side_length;
    d.spacing = side_length / n;
    const std::size_t count = static_cast<std::size_t>(n) * n;
    d.conformal_factor.assign(count, 1.0);
    d.interior_mask.assign(count, 1);
    d.boundary_mask.assign(count, 0);
    d.quad_weights.assign(count, d.spacing * d.spacing);
    return d;
}

GridDomain excise(const GridDomain& torus, const std::vector<std::uint8_t>& excised) {
    GridDomain d = torus;
    for (std::size_t i = 0; i < d.nodes(); ++i) {
        if (excised[i]) {
            d.interior_mask[i] = 0;
            d.boundary_mask[i] = 0;
            continue;
        }
        bool rim = false;
        for (int mu = 0; mu < 2; ++mu)
            for (int step : {-1, 1}) rim = rim || excised[d.neighbor(i, mu, step)] != 0;
        d.interior_mask[i] = rim ? 0 : 1;
        d.boundary_mask[i] = rim ? 1 : 0;
    }
    return d;
}

ExhaustionSequence build_punctured_square(int n, double side_length, const std::vector<double>& radii) {
    ExhaustionSequence seq;
    seq.base = build_flat_torus(n, side_length);
    const double h = seq.base.spacing;
    if (radii.empty()) throw InvalidArgument("build_punctured_square: radii list is empty");
    for (std::size_t j = 0; j < radii.size(); ++j) {
        if (!(radii[j] > 0.0) || !(radii[j] <= side_length / 4.0)) {
            std::ostringstream os;
            os << "build_punctured_square: radius " << radii[j] << " outside (0, side_length/4]";
            throw InvalidArgument(os.str());
        }
        if (j > 0 && !(radii[j] < radii[j - 1])) {
            std::ostringstream os;
            os << "build_punctured_square: radii must be strictly decreasing (" << radii[j - 1] << " then "
               << radii[j] << ")";
            throw InvalidArgument(os.str());
        }
        if (j > 0 && radii[j - 1] - radii[j] < h) {
            std::ostringstream os;
            os << "build_punctured_square: radii " << radii[j - 1] << " and " << radii[j]
               << " leave less than one lattice ring (spacing " << h << ") between masks";
            throw InvalidArgument(os.str());
        }
    }
    if (radii.back() < 2.0 * h) {
        std::ostringstream os;
        os << "build_punctured_square: smallest radius " << radii.back() << " is below two lattice spacings ("
           << 2.0 * h << ")";
        throw InvalidArgument(os.str());
    }
    seq.center_ix = n / 2;
    seq.center_iy = n / 2;
    seq.radii = radii;
    const GridDomain& base = seq.base;
    for (double r : radii) {
        std::vector<std::uint8_t> excised(base.nodes(), 0);
        for (std::size_t i = 0; i < base.nodes(); ++i) {
            const double dx = (base.ix(i) - seq.center_ix) * h;
            const double dy = (base.iy(i) - seq.center_iy) * h;
            excised[i] = std::hypot(dx, dy) < r ? 1 : 0;
        }
        seq.stages.push_back(excise(base, excised));
    }
    return seq;
}

namespace {

inline double stencil(const GridDomain& dom, std::span<const double> f, std::size_t i) {
    const double inv_h2 = 1.0 / (dom.spacing * dom.spacing);
    const double s = f[dom.neighbor(i, 0, 1)] + f[dom.neighbor(i, 0, -1)] + f[dom.neighbor(i, 1, 1)] +
                     f[dom.neighbor(i, 1, -1)] - 4.0 * f[i];
    return s * inv_h2 / dom.conformal_factor[i];
}

void check_size(const GridDomain& dom, std::size_t got) {
    if (got != dom.nodes()) throw InvalidArgument("field size does not match the lattice");
}

}  // namespace

ScalarField laplacian(const GridDomain& dom, std::span<const double> f, Exec exec) {
    check_size(dom, f.size());
    ScalarField out(dom.nodes(), 0.0);
    for_each_index(exec, dom.nodes(), [&](std::size_t i) {
        if (dom.interior(i)) out[i] = stencil(dom, f, i);
    });
    return out;
}

ScalarField laplacian_reference(const GridDomain& dom, std::span<const double> f) {
    check_size(dom, f.size());
    const int n = dom.n;
    const double h2 = dom.spacing * dom.spacing;
    ScalarField out(dom.nodes(), 0.0);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const std::size_t i = dom.index(ix, iy);
            if (!dom.interior(i)) continue;
            const double c = f[i];
            const double e = f[dom.index(ix + 1, iy)];
            const double w = f[dom.index(ix - 1, iy)];
            const double nn = f[dom.index(ix, iy + 1)];
            const double s = f[dom.index(ix, iy - 1)];
            out[i] = (e + w + nn + s - 4.0 * c) / h2 / dom.conformal_factor[i];
        }
    }
    return out;
}

EndoField laplacian(const GridDomain& dom, const EndoField& f, Exec exec) {
    check_size(dom, f.size());
    const int r = f.rank;
    EndoField out(dom.nodes(), r);
    const double inv_h2 = 1.0 / (dom.spacing * dom.spacing);
    for_each_index(exec, dom.nodes(), [&](std::size_t i) {
        if (!dom.interior(i)) return;
        Mat s = f[dom.neighbor(i, 0, 1)] + f[dom.neighbor(i, 0, -1)] + f[dom.neighbor(i, 1, 1)] +
                f[dom.neighbor(i, 1, -1)] - 4.0 * f[i];
        out[i] = s * (inv_h2 / dom.conformal_factor[i]);
    });
    return out;
}

double integrate(const GridDomain& dom, std::span<const double> f) {
    check_size(dom, f.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < dom.nodes(); ++i)
        if (dom.active(i)) acc += f[i] * dom.quad_weights[i];
    return acc;
}

double integrate_interior(const GridDomain& dom, std::span<const double> f) {
    check_size(dom, f.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < dom.nodes(); ++i)
        if (dom.interior(i)) acc += f[i] * dom.quad_weights[i];
    return acc;
}

double integrate_coarse(const GridDomain& dom, std::span<const double> f) {
    check_size(dom, f.size());
    double acc = 0.0;
    for (int iy = 0; iy < dom.n; iy += 2)
        for (int ix = 0; ix < dom.n; ix += 2) {
            const std::size_t i = dom.index(ix, iy);
            if (dom.active(i)) acc += 4.0 * f[i] * dom.quad_weights[i];
        }
    return acc;
}

double coord_x(const GridDomain& dom, std::size_t i) { return dom.ix(i) * dom.spacing; }
double coord_y(const GridDomain& dom, std::size_t i) { return dom.iy(i) * dom.spacing; }

}  // namespace hef
