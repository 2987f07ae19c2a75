#include "battrom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

namespace battrom {

namespace {

constexpr double kUmToCm = 1e-4;

// Portable uniform double in [0,1) from a 64-bit engine; avoids the
// implementation-defined std::uniform_real_distribution.
double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Region {
    int x_begin, x_end;  // voxel layers [begin, end)
};

// Marks electrode voxels inside randomly placed spheres until the solid
// fraction target is reached. Distances wrap in periodic y/z.
void fill_particles(VoxelGrid& g, const Region& region, CellLabel electrode, double porosity,
                    double r_min_vox, double r_max_vox, std::mt19937_64& rng) {
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const int region_cells = (region.x_end - region.x_begin) * ny * nz;
    if (region_cells <= 0) return;

    int solid = 0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = region.x_begin; i < region.x_end; ++i)
                if (g.labels[g.index(i, j, k)] == electrode) ++solid;

    const int target_solid =
        static_cast<int>(std::ceil((1.0 - porosity) * static_cast<double>(region_cells)));
    const int max_spheres = 64 * region_cells;

    for (int s = 0; solid < target_solid && s < max_spheres; ++s) {
        const double cx = region.x_begin + next_unit(rng) * (region.x_end - region.x_begin);
        const double cy = next_unit(rng) * ny;
        const double cz = next_unit(rng) * nz;
        const double r = r_min_vox + next_unit(rng) * (r_max_vox - r_min_vox);
        const int ir = static_cast<int>(std::ceil(r)) + 1;

        const int i_lo = std::max(region.x_begin, static_cast<int>(std::floor(cx)) - ir);
        const int i_hi = std::min(region.x_end - 1, static_cast<int>(std::floor(cx)) + ir);
        for (int i = i_lo; i <= i_hi; ++i)
            for (int dj = -ir; dj <= ir; ++dj)
                for (int dk = -ir; dk <= ir; ++dk) {
                    int j = static_cast<int>(std::floor(cy)) + dj;
                    int k = static_cast<int>(std::floor(cz)) + dk;
                    const double yj = j + 0.5, zk = k + 0.5;
                    if (g.periodic(1)) j = ((j % ny) + ny) % ny;
                    if (g.periodic(2)) k = ((k % nz) + nz) % nz;
                    if (j < 0 || j >= ny || k < 0 || k >= nz) continue;
                    const double dx = (i + 0.5) - cx, dy = yj - cy, dz = zk - cz;
                    if (dx * dx + dy * dy + dz * dz > r * r) continue;
                    CellLabel& l = g.labels[g.index(i, j, k)];
                    if (l == CellLabel::Electrolyte) {
                        l = electrode;
                        ++solid;
                    }
                }
    }
}

// Relabels electrolyte pockets that are not connected (through faces,
// with periodic wrap) to the separator slab. Pocket cells become the
// electrode material of their region.
void fill_sealed_pockets(VoxelGrid& g, int sep_begin, int sep_end, CellLabel neg, CellLabel pos) {
    if (sep_begin >= sep_end) return;  // no separator slab to anchor the pore network
    const int n = g.cell_count();
    std::vector<std::uint8_t> reach(n, 0);
    std::queue<int> q;
    for (int c = 0; c < n; ++c) {
        const int i = g.coords(c)[0];
        if (i >= sep_begin && i < sep_end && g.labels[c] == CellLabel::Electrolyte) {
            reach[c] = 1;
            q.push(c);
        }
    }
    const auto push_if = [&](int i, int j, int k) {
        const int c = g.index(i, j, k);
        if (!reach[c] && g.labels[c] == CellLabel::Electrolyte) {
            reach[c] = 1;
            q.push(c);
        }
    };
    while (!q.empty()) {
        const int c = q.front();
        q.pop();
        const auto [i, j, k] = g.coords(c);
        if (i > 0) push_if(i - 1, j, k);
        if (i + 1 < g.dims[0]) push_if(i + 1, j, k);
        if (j > 0) push_if(i, j - 1, k);
        else if (g.periodic(1) && g.dims[1] >= 2) push_if(i, g.dims[1] - 1, k);
        if (j + 1 < g.dims[1]) push_if(i, j + 1, k);
        else if (g.periodic(1) && g.dims[1] >= 2) push_if(i, 0, k);
        if (k > 0) push_if(i, j, k - 1);
        else if (g.periodic(2) && g.dims[2] >= 2) push_if(i, j, g.dims[2] - 1);
        if (k + 1 < g.dims[2]) push_if(i, j, k + 1);
        else if (g.periodic(2) && g.dims[2] >= 2) push_if(i, j, 0);
    }
    for (int c = 0; c < n; ++c) {
        if (g.labels[c] == CellLabel::Electrolyte && !reach[c]) {
            const int i = g.coords(c)[0];
            g.labels[c] = (i < sep_begin) ? neg : pos;
        }
    }
}

} // namespace

VoxelGrid build_demo_geometry(const GeometrySpec& spec) {
    if (spec.voxel_um <= 0.0) throw ConfigError("voxel edge length must be positive");
    std::array<int, 3> dims{};
    for (int a = 0; a < 3; ++a) {
        const double ratio = spec.lengths_um[a] / spec.voxel_um;
        const int n = static_cast<int>(std::lround(ratio));
        if (n < 1 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
            throw DimensionError("voxel edge does not divide domain length along axis " +
                                 std::to_string(a));
        dims[a] = n;
    }
    if (dims[0] * dims[1] * dims[2] < 8)
        throw DimensionError("domain too small: fewer than 8 cells");
    if (spec.collector_layers < 1) throw ConfigError("collector slabs need at least one layer");
    if (spec.separator_layers < 0) throw ConfigError("separator layer count must be >= 0");
    if (spec.porosity < 0.0 || spec.porosity > 1.0)
        throw ConfigError("porosity must lie in [0, 1]");
    if (spec.particle_radius_min <= 0.0 || spec.particle_radius_max < spec.particle_radius_min)
        throw ConfigError("particle radius range is empty or non-positive");

    const int interior = dims[0] - 2 * spec.collector_layers - spec.separator_layers;
    if (interior < 2)
        throw ConfigError("degenerate electrode region: interior has fewer than 2 layers");
    const int neg_layers = interior / 2;
    const int pos_layers = interior - neg_layers;

    VoxelGrid g;
    g.dims = dims;
    const double h = spec.voxel_um * kUmToCm;
    g.voxel_size = {h, h, h};
    g.periodic_yz = spec.periodic_yz;
    g.labels.assign(g.cell_count(), CellLabel::Electrolyte);

    const int neg_begin = spec.collector_layers;
    const int neg_end = neg_begin + neg_layers;
    const int sep_end = neg_end + spec.separator_layers;
    const int pos_end = sep_end + pos_layers;

    for (int c = 0; c < g.cell_count(); ++c) {
        const int i = g.coords(c)[0];
        if (i < spec.collector_layers) g.labels[c] = CellLabel::NegCollector;
        else if (i >= pos_end) g.labels[c] = CellLabel::PosCollector;
    }

    // Contact layer: the electrode layer touching each collector stays
    // fully solid so the collectors are never electrically floating.
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j) {
            g.labels[g.index(neg_begin, j, k)] = CellLabel::NegElectrode;
            g.labels[g.index(pos_end - 1, j, k)] = CellLabel::PosElectrode;
        }

    std::mt19937_64 rng(spec.seed);
    fill_particles(g, {neg_begin + 1, neg_end}, CellLabel::NegElectrode, spec.porosity,
                   spec.particle_radius_min, spec.particle_radius_max, rng);
    fill_particles(g, {sep_end, pos_end - 1}, CellLabel::PosElectrode, spec.porosity,
                   spec.particle_radius_min, spec.particle_radius_max, rng);

    fill_sealed_pockets(g, neg_end, sep_end, CellLabel::NegElectrode, CellLabel::PosElectrode);

    g.validate_layout();
    return g;
}

} // namespace battrom
