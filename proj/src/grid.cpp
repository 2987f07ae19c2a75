#include "battrom/grid.hpp"

#include <fstream>
#include <sstream>

namespace battrom {

const char* to_token(CellLabel l) {
    switch (l) {
        case CellLabel::Electrolyte: return "elyte";
        case CellLabel::NegElectrode: return "eneg";
        case CellLabel::PosElectrode: return "epos";
        case CellLabel::NegCollector: return "ccneg";
        case CellLabel::PosCollector: return "ccpos";
    }
    throw DataError("unknown cell label");
}

CellLabel label_from_token(const std::string& token) {
    if (token == "elyte") return CellLabel::Electrolyte;
    if (token == "eneg") return CellLabel::NegElectrode;
    if (token == "epos") return CellLabel::PosElectrode;
    if (token == "ccneg") return CellLabel::NegCollector;
    if (token == "ccpos") return CellLabel::PosCollector;
    throw DataError("unknown label token '" + token + "'");
}

void VoxelGrid::validate_layout() const {
    if (static_cast<int>(labels.size()) != cell_count())
        throw DimensionError("VoxelGrid: label array does not match dims");
    // Collectors must form contiguous x-slab regions at the two ends.
    int neg_max_layer = -1, pos_min_layer = dims[0];
    for (int c = 0; c < cell_count(); ++c) {
        const int i = coords(c)[0];
        if (labels[c] == CellLabel::NegCollector) neg_max_layer = std::max(neg_max_layer, i);
        if (labels[c] == CellLabel::PosCollector) pos_min_layer = std::min(pos_min_layer, i);
    }
    for (int c = 0; c < cell_count(); ++c) {
        const int i = coords(c)[0];
        const CellLabel l = labels[c];
        if (i <= neg_max_layer && l != CellLabel::NegCollector)
            throw AssemblyError("cell layout: non-collector cell inside negative collector slab");
        if (i >= pos_min_layer && l != CellLabel::PosCollector)
            throw AssemblyError("cell layout: non-collector cell inside positive collector slab");
        if (i > neg_max_layer && i < pos_min_layer && is_collector(l))
            throw AssemblyError("cell layout: collector cell in the interior region");
    }
}

int FaceSet::count(FaceClass c) const {
    int n = 0;
    for (const auto& f : interior)
        if (f.cls == c) ++n;
    return n;
}

namespace {

FaceClass classify_pair(CellLabel a, CellLabel b) {
    if (a == b) return FaceClass::Bulk;
    const bool a_el = (a == CellLabel::Electrolyte), b_el = (b == CellLabel::Electrolyte);
    if ((a_el && is_electrode(b)) || (b_el && is_electrode(a))) return FaceClass::ButlerVolmer;
    if ((a_el && is_collector(b)) || (b_el && is_collector(a))) return FaceClass::NoCoupling;
    // Remaining mixed pairs (electrode|collector, and the degenerate
    // electrode|electrode / collector|collector of unlike sign) carry
    // conduction for phi only.
    return FaceClass::PhiContinuity;
}

} // namespace

FaceSet classify_faces(const VoxelGrid& grid) {
    grid.validate_layout();
    FaceSet fs;
    const auto& d = grid.dims;
    fs.interior.reserve(static_cast<size_t>(grid.cell_count()) * 3);

    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                const int c = grid.index(i, j, k);
                const std::array<int, 3> pos{i, j, k};
                for (int axis = 0; axis < 3; ++axis) {
                    const int n = d[axis];
                    InteriorFace f;
                    f.axis = static_cast<std::int8_t>(axis);
                    if (pos[axis] + 1 < n) {
                        std::array<int, 3> q = pos;
                        q[axis] += 1;
                        f.cell_a = c;
                        f.cell_b = grid.index(q[0], q[1], q[2]);
                    } else if (grid.periodic(axis) && n >= 2) {
                        // wrap face: neighbor at coordinate 0 has the lower index
                        std::array<int, 3> q = pos;
                        q[axis] = 0;
                        f.cell_a = grid.index(q[0], q[1], q[2]);
                        f.cell_b = c;
                        f.wrap = true;
                    } else {
                        continue;
                    }
                    f.cls = classify_pair(grid.labels[f.cell_a], grid.labels[f.cell_b]);
                    fs.interior.push_back(f);
                }
            }

    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                const int c = grid.index(i, j, k);
                if (i == 0) fs.boundary.push_back({c, 0});
                if (i == d[0] - 1) fs.boundary.push_back({c, 1});
                if (!grid.periodic(1) || d[1] < 2) {
                    if (j == 0) fs.boundary.push_back({c, 2});
                    if (j == d[1] - 1) fs.boundary.push_back({c, 3});
                }
                if (!grid.periodic(2) || d[2] < 2) {
                    if (k == 0) fs.boundary.push_back({c, 4});
                    if (k == d[2] - 1) fs.boundary.push_back({c, 5});
                }
            }
    return fs;
}

MacroPartition build_macro_partition(const VoxelGrid& grid, std::array<int, 3> macro_dims) {
    for (int a = 0; a < 3; ++a) {
        if (macro_dims[a] < 1)
            throw PartitionError("macro dims must be positive");
        if (grid.dims[a] % macro_dims[a] != 0)
            throw PartitionError("macro dimension " + std::to_string(macro_dims[a]) +
                                 " does not divide grid dimension " +
                                 std::to_string(grid.dims[a]));
    }
    MacroPartition p;
    p.macro_dims = macro_dims;
    p.subdomain_count = macro_dims[0] * macro_dims[1] * macro_dims[2];
    p.cell_to_subdomain.resize(grid.cell_count());
    const std::array<int, 3> bs{grid.dims[0] / macro_dims[0], grid.dims[1] / macro_dims[1],
                                grid.dims[2] / macro_dims[2]};
    for (int c = 0; c < grid.cell_count(); ++c) {
        const auto xyz = grid.coords(c);
        const int mi = xyz[0] / bs[0], mj = xyz[1] / bs[1], mk = xyz[2] / bs[2];
        p.cell_to_subdomain[c] = mi + macro_dims[0] * (mj + macro_dims[1] * mk);
    }
    return p;
}

void write_labels(std::ostream& out, const VoxelGrid& grid) {
    out << grid.dims[0] << ' ' << grid.dims[1] << ' ' << grid.dims[2] << ' ';
    out.precision(17);
    out << grid.voxel_size[0] << ' ' << grid.voxel_size[1] << ' ' << grid.voxel_size[2] << '\n';
    for (int c = 0; c < grid.cell_count(); ++c) {
        out << to_token(grid.labels[c]);
        out << (((c + 1) % grid.dims[0] == 0) ? '\n' : ' ');
    }
}

void write_labels_file(const std::string& path, const VoxelGrid& grid) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    write_labels(f, grid);
}

VoxelGrid read_labels(std::istream& in) {
    VoxelGrid g;
    if (!(in >> g.dims[0] >> g.dims[1] >> g.dims[2] >> g.voxel_size[0] >> g.voxel_size[1] >>
          g.voxel_size[2]))
        throw IoError("voxel label file: bad header");
    if (g.dims[0] < 1 || g.dims[1] < 1 || g.dims[2] < 1)
        throw IoError("voxel label file: non-positive dims");
    g.labels.resize(g.cell_count());
    std::string tok;
    for (int c = 0; c < g.cell_count(); ++c) {
        if (!(in >> tok)) throw IoError("voxel label file: truncated label data");
        g.labels[c] = label_from_token(tok);
    }
    return g;
}

VoxelGrid read_labels_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "'");
    return read_labels(f);
}

} // namespace battrom
