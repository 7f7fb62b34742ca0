#pragma once

// Discretized flat base domains.
//
// The lattice is n x n nodes with spacing side_length / n and periodic
// neighbours; node (ix, iy) sits at (ix * spacing, iy * spacing) and has
// flat index iy * n + ix.  The Kaehler form is omega = lambda (i/2) dz ^ dzbar,
// so that the contraction is a pointwise division by lambda and
// 2 sqrt(-1) Lambda d dbar f = lambda^{-1} (f_xx + f_yy).

#include "hef/endo.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace hef {

enum class Exec { serial, parallel };

struct GridDomain {
    int n = 0;
    double side_length = 0.0;
    double spacing = 0.0;
    ScalarField conformal_factor;
    std::vector<std::uint8_t> interior_mask;
    std::vector<std::uint8_t> boundary_mask;
    ScalarField quad_weights;

    std::size_t nodes() const { return static_cast<std::size_t>(n) * n; }
    std::size_t index(int ix, int iy) const {
        return static_cast<std::size_t>(wrap(iy)) * n + wrap(ix);
    }
    int ix(std::size_t i) const { return static_cast<int>(i % n); }
    int iy(std::size_t i) const { return static_cast<int>(i / n); }
    int wrap(int k) const { return ((k % n) + n) % n; }

    /// Neighbour in direction mu (0 = x, 1 = y) displaced by step (+1 / -1).
    std::size_t neighbor(std::size_t i, int mu, int step) const {
        return mu == 0 ? index(ix(i) + step, iy(i)) : index(ix(i), iy(i) + step);
    }

    bool interior(std::size_t i) const { return interior_mask[i] != 0; }
    bool boundary(std::size_t i) const { return boundary_mask[i] != 0; }
    bool active(std::size_t i) const { return interior(i) || boundary(i); }
    bool has_boundary() const;

    double volume() const;
    double min_conformal_factor() const;
    std::size_t active_count() const;
    std::vector<std::size_t> interior_nodes() const;
};

/// Nested masks M_0 subset M_1 subset ... obtained by excising disks of
/// decreasing radius around one lattice node of a flat torus.
struct ExhaustionSequence {
    GridDomain base;
    int center_ix = 0;
    int center_iy = 0;
    std::vector<double> radii;
    std::vector<GridDomain> stages;

    std::size_t size() const { return stages.size(); }
    const GridDomain& masks(std::size_t j) const { return stages.at(j); }
};

GridDomain build_flat_torus(int n, double side_length);

/// Flat torus of side `side_length` punctured at its centre node, exhausted by
/// the complements of disks of the given strictly decreasing radii, each at
/// most side_length / 4 and the smallest at least two lattice spacings.
ExhaustionSequence build_punctured_square(int n, double side_length, const std::vector<double>& radii);

/// Turns a full torus into a domain with the given excised set; boundary
/// nodes are the active nodes with an excised 4-neighbour.
GridDomain excise(const GridDomain& torus, const std::vector<std::uint8_t>& excised);

/// lambda^{-1} times the 5-point Laplacian at interior nodes; zero elsewhere.
ScalarField laplacian(const GridDomain& dom, std::span<const double> f, Exec exec = Exec::parallel);
EndoField laplacian(const GridDomain& dom, const EndoField& f, Exec exec = Exec::parallel);

/// Serial loop kept as the reference for the OpenMP kernel.
ScalarField laplacian_reference(const GridDomain& dom, std::span<const double> f);

/// Sum of f * quad_weights over active nodes.
double integrate(const GridDomain& dom, std::span<const double> f);

/// Same sum restricted to interior nodes.
double integrate_interior(const GridDomain& dom, std::span<const double> f);

/// Quadrature on the stride-2 sublattice with 4x weights; the difference to
/// integrate() estimates the quadrature error of smooth integrands.
double integrate_coarse(const GridDomain& dom, std::span<const double> f);

/// Node coordinates.
double coord_x(const GridDomain& dom, std::size_t i);
double coord_y(const GridDomain& dom, std::size_t i);

}  // namespace hef
