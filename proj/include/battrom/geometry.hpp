#ifndef BATTROM_GEOMETRY_HPP
#define BATTROM_GEOMETRY_HPP

#include <array>
#include <cstdint>

#include "battrom/grid.hpp"

namespace battrom {

/// Parameters of the synthetic layered battery geometry. Lengths are
/// given in micrometers and converted to cm internally.
struct GeometrySpec {
    std::array<double, 3> lengths_um{104.0, 40.0, 40.0};  // full domain incl. collectors
    double voxel_um = 4.0;
    std::uint64_t seed = 20;

    int collector_layers = 1;  // voxel layers per collector slab
    int separator_layers = 2;  // all-electrolyte slab between the electrodes

    /// Target electrolyte volume fraction inside each electrode region
    /// (the contact layer next to the collector stays solid).
    double porosity = 0.45;

    /// Sphere radii for the particle blobs, in voxel units.
    double particle_radius_min = 1.0;
    double particle_radius_max = 2.4;

    std::array<bool, 2> periodic_yz{true, true};
};

/// Builds the layered demo geometry: collector slabs at both x-ends, a
/// central all-electrolyte separator, electrode regions with seeded
/// sphere-union particles in electrolyte. Deterministic in the seed.
///
/// Electrolyte pockets sealed off from the separator are filled with
/// electrode material so the potential equation stays nonsingular, and
/// the electrode layer touching each collector is kept solid so the
/// applied current always has a conducting path.
VoxelGrid build_demo_geometry(const GeometrySpec& spec);

} // namespace battrom

#endif
