#ifndef BATTROM_GRID_HPP
#define BATTROM_GRID_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "battrom/errors.hpp"

namespace battrom {

enum class CellLabel : std::uint8_t {
    Electrolyte = 0,
    NegElectrode = 1,
    PosElectrode = 2,
    NegCollector = 3,
    PosCollector = 4,
};

const char* to_token(CellLabel l);
CellLabel label_from_token(const std::string& token);

inline bool is_electrode(CellLabel l) {
    return l == CellLabel::NegElectrode || l == CellLabel::PosElectrode;
}
inline bool is_collector(CellLabel l) {
    return l == CellLabel::NegCollector || l == CellLabel::PosCollector;
}

/// Structured voxel mesh with one material label per cell.
///
/// Cells are stored x-fastest: index = i + nx*(j + ny*k). All geometry
/// is kept in cm so the material constants apply without rescaling.
/// The y and z axes may be periodic (the x axis never is; it carries
/// the current collectors).
struct VoxelGrid {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> voxel_size{0.0, 0.0, 0.0};  // cm
    std::vector<CellLabel> labels;                    // x-fastest
    std::array<bool, 2> periodic_yz{true, true};

    int cell_count() const { return dims[0] * dims[1] * dims[2]; }
    int index(int i, int j, int k) const { return i + dims[0] * (j + dims[1] * k); }
    std::array<int, 3> coords(int cell) const {
        return {cell % dims[0], (cell / dims[0]) % dims[1], cell / (dims[0] * dims[1])};
    }
    bool periodic(int axis) const { return axis >= 1 && periodic_yz[axis - 1]; }
    double voxel_volume() const { return voxel_size[0] * voxel_size[1] * voxel_size[2]; }

    /// Checks the collector/electrode layering invariant: negative
    /// collector cells only in the x = 0 layer region, positive only at
    /// max x, electrode/electrolyte strictly between.
    void validate_layout() const;
};

/// Cuboid macro partition aligned with the voxel grid. Subdomain i is
/// the set of cells with cell_to_subdomain[cell] == i, i in [0, K).
struct MacroPartition {
    std::array<int, 3> macro_dims{1, 1, 1};
    std::vector<int> cell_to_subdomain;
    int subdomain_count = 0;

    /// Voxel extent of each subdomain per axis.
    std::array<int, 3> block_size(const VoxelGrid& grid) const {
        return {grid.dims[0] / macro_dims[0], grid.dims[1] / macro_dims[1],
                grid.dims[2] / macro_dims[2]};
    }
};

/// Behavior class of an interior face, named by the coupling it carries.
enum class FaceClass : std::uint8_t {
    Bulk = 0,           // same material on both sides: diffusion + conduction
    ButlerVolmer = 1,   // electrode|electrolyte: reaction flux only
    PhiContinuity = 2,  // electrode|collector: conduction for phi only
    NoCoupling = 3,     // electrolyte|collector: no flux for either variable
};

struct InteriorFace {
    int cell_a = -1;  // canonical: cell_a < cell_b (linear index)
    int cell_b = -1;
    std::int8_t axis = 0;  // 0,1,2
    bool wrap = false;     // periodic wrap-around face
    FaceClass cls = FaceClass::Bulk;
};

/// Outer boundary face. side: 0 -x, 1 +x, 2 -y, 3 +y, 4 -z, 5 +z.
struct BoundaryFace {
    int cell = -1;
    std::int8_t side = 0;
};

struct FaceSet {
    std::vector<InteriorFace> interior;
    std::vector<BoundaryFace> boundary;

    int count(FaceClass c) const;
};

/// Enumerates and classifies every face of the grid. Interior faces are
/// oriented lower-cell-index first; y/z faces wrap when the axis is
/// periodic (only for extents >= 2).
FaceSet classify_faces(const VoxelGrid& grid);

/// Splits the grid into a cuboid macro partition. Each macro dimension
/// must divide the corresponding grid dimension.
MacroPartition build_macro_partition(const VoxelGrid& grid, std::array<int, 3> macro_dims);

/// Plain-text voxel label file: header "nx ny nz hx hy hz" (sizes in cm),
/// then one label token per cell in x-fastest order.
void write_labels(std::ostream& out, const VoxelGrid& grid);
void write_labels_file(const std::string& path, const VoxelGrid& grid);
VoxelGrid read_labels(std::istream& in);
VoxelGrid read_labels_file(const std::string& path);

} // namespace battrom

#endif
