#include "battrom/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace battrom {

namespace fs = std::filesystem;

namespace {

double wall_now() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double next_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

} // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file '" + path + "'");
    return parse(f);
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            std::istringstream probe(line);
            std::string tok;
            if (probe >> tok)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        c.set_key(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

void ExperimentConfig::set_key(const std::string& key, const std::string& value) {
    std::istringstream v(value);
    const auto want = [&](auto&... x) {
        if (!((v >> x) && ...))
            throw ConfigError("config key '" + key + "': cannot parse value '" + value + "'");
    };
    if (key == "geometry.lengths_um")
        want(geometry.lengths_um[0], geometry.lengths_um[1], geometry.lengths_um[2]);
    else if (key == "geometry.voxel_um") want(geometry.voxel_um);
    else if (key == "geometry.seed") want(geometry.seed);
    else if (key == "geometry.collector_layers") want(geometry.collector_layers);
    else if (key == "geometry.separator_layers") want(geometry.separator_layers);
    else if (key == "geometry.porosity") want(geometry.porosity);
    else if (key == "geometry.particle_radius")
        want(geometry.particle_radius_min, geometry.particle_radius_max);
    else if (key == "geometry.periodic") {
        int y, z;
        want(y, z);
        geometry.periodic_yz = {y != 0, z != 0};
    } else if (key == "time.dt") want(dt);
    else if (key == "time.t_end") want(t_end);
    else if (key == "train.count") want(train_count);
    else if (key == "train.capture_stages") {
        int b;
        want(b);
        capture_stages = b != 0;
    } else if (key == "param.min") want(mu_min);
    else if (key == "param.max") want(mu_max);
    else if (key == "test.count") want(test_count);
    else if (key == "test.seed") want(test_seed);
    else if (key == "tol.pod") want(pod_tol);
    else if (key == "tol.ei") want(ei_tol);
    else if (key == "newton.atol") want(newton_atol);
    else if (key == "newton.rtol") want(newton_rtol);
    else if (key == "newton.max_iter") want(newton_max_iter);
    else if (key == "partition.macro") want(macro_dims[0], macro_dims[1], macro_dims[2]);
    else if (key == "partition.min_voxels") want(min_subdomain_voxels);
    else if (key == "sweep.dims") {
        sweep_dims.clear();
        int x;
        while (v >> x) sweep_dims.push_back(x);
    } else if (key == "sweep.ms") {
        sweep_ms.clear();
        int x;
        while (v >> x) sweep_ms.push_back(x);
    } else if (key == "sweep.dim_points") want(sweep_dim_points);
    else if (key == "sweep.m_points") want(sweep_m_points);
    else if (key == "out") want(out_dir);
    else if (key == "threads") want(threads);
    else throw ConfigError("unknown config key '" + key + "'");
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream s;
    s << "geometry.lengths_um = " << fmt(geometry.lengths_um[0]) << ' '
      << fmt(geometry.lengths_um[1]) << ' ' << fmt(geometry.lengths_um[2]) << '\n'
      << "geometry.voxel_um = " << fmt(geometry.voxel_um) << '\n'
      << "geometry.seed = " << geometry.seed << '\n'
      << "geometry.collector_layers = " << geometry.collector_layers << '\n'
      << "geometry.separator_layers = " << geometry.separator_layers << '\n'
      << "geometry.porosity = " << fmt(geometry.porosity) << '\n'
      << "geometry.particle_radius = " << fmt(geometry.particle_radius_min) << ' '
      << fmt(geometry.particle_radius_max) << '\n'
      << "geometry.periodic = " << geometry.periodic_yz[0] << ' ' << geometry.periodic_yz[1]
      << '\n'
      << "time.dt = " << fmt(dt) << '\n'
      << "time.t_end = " << fmt(t_end) << '\n'
      << "train.count = " << train_count << '\n'
      << "train.capture_stages = " << (capture_stages ? 1 : 0) << '\n'
      << "param.min = " << fmt(mu_min) << '\n'
      << "param.max = " << fmt(mu_max) << '\n'
      << "test.count = " << test_count << '\n'
      << "test.seed = " << test_seed << '\n'
      << "tol.pod = " << fmt(pod_tol) << '\n'
      << "tol.ei = " << fmt(ei_tol) << '\n'
      << "newton.atol = " << fmt(newton_atol) << '\n'
      << "newton.rtol = " << fmt(newton_rtol) << '\n'
      << "newton.max_iter = " << newton_max_iter << '\n'
      << "partition.macro = " << macro_dims[0] << ' ' << macro_dims[1] << ' ' << macro_dims[2]
      << '\n'
      << "partition.min_voxels = " << min_subdomain_voxels << '\n';
    return s.str();
}

std::uint64_t ExperimentConfig::hash() const { return hash_string(canonical()); }

TrajectoryOptions ExperimentConfig::trajectory_options() const {
    TrajectoryOptions o;
    o.newton.atol = newton_atol;
    o.newton.rtol = newton_rtol;
    o.newton.max_iter = newton_max_iter;
    o.mu_min = mu_min;
    o.mu_max = mu_max;
    return o;
}

std::vector<double> ExperimentConfig::training_parameters() const {
    std::vector<double> mus(train_count);
    for (int s = 0; s < train_count; ++s)
        mus[s] = train_count == 1
                     ? mu_min
                     : mu_min + (mu_max - mu_min) * static_cast<double>(s) / (train_count - 1);
    return mus;
}

std::vector<double> ExperimentConfig::test_parameters() const {
    std::mt19937_64 rng(test_seed);
    std::vector<double> mus(test_count);
    for (auto& m : mus) m = mu_min + (mu_max - mu_min) * next_unit(rng);
    return mus;
}

const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Global: return "global";
        case Scheme::LocalizedProjected: return "localized-projected";
        case Scheme::LocalizedFluxSplit: return "localized-fluxsplit";
    }
    return "?";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "global") return Scheme::Global;
    if (name == "localized-projected") return Scheme::LocalizedProjected;
    if (name == "localized-fluxsplit") return Scheme::LocalizedFluxSplit;
    throw ConfigError("unknown scheme '" + name + "'");
}

namespace {

// Table/result file prefixes per scheme, matching the plot data names.
const char* scheme_prefix(Scheme s) {
    switch (s) {
        case Scheme::Global: return "rb";
        case Scheme::LocalizedProjected: return "lrb_simple";
        case Scheme::LocalizedFluxSplit: return "lrb_improved";
    }
    return "?";
}

struct ArtifactFiles {
    fs::path dir;
    std::vector<std::string> names;

    fs::path path(const std::string& name) const { return dir / name; }
    void add(const std::string& name) { names.push_back(name); }
};

void write_eidata_block(std::vector<BlockSection>& out, const EIData& ei) {
    BlockSection interp{1, {}, ei.interp_dofs};
    BlockSection support{1, {}, ei.support_rows};
    BlockSection coll{0, ei.collateral, {}};
    BlockSection errs{0, Matrix(), {}};
    errs.m.resize(static_cast<Eigen::Index>(ei.greedy_errors.size()), 1);
    for (size_t i = 0; i < ei.greedy_errors.size(); ++i) errs.m(i, 0) = ei.greedy_errors[i];
    out.push_back(std::move(interp));
    out.push_back(std::move(support));
    out.push_back(std::move(coll));
    out.push_back(std::move(errs));
}

EIData read_eidata_block(const OperatorSplit& split, NonlinearPart part,
                         const std::vector<BlockSection>& in, size_t& pos,
                         std::optional<FaceSubset> faces) {
    if (pos + 4 > in.size()) throw IoError("EI block file: truncated section list");
    const auto& interp = in[pos].idx;
    const auto& support = in[pos + 1].idx;
    const Matrix& coll = in[pos + 2].m;
    const Matrix& errs = in[pos + 3].m;
    pos += 4;

    EIData ei;
    ei.part = part;
    ei.interp_dofs = interp;
    ei.support_rows = support;
    ei.collateral = coll;
    ei.faces = std::move(faces);
    ei.greedy_errors.resize(errs.rows());
    for (Eigen::Index i = 0; i < errs.rows(); ++i) ei.greedy_errors[i] = errs(i, 0);

    const int m = static_cast<int>(interp.size());
    ei.tri = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        const auto it = std::lower_bound(support.begin(), support.end(), interp[i]);
        if (it == support.end() || *it != interp[i])
            throw IoError("EI block file: interpolation DOF missing from support");
        const auto row = static_cast<Eigen::Index>(it - support.begin());
        for (int j = 0; j <= i; ++j) ei.tri(i, j) = coll(row, j);
    }
    const FaceSubset* sub = ei.faces ? &*ei.faces : nullptr;
    ei.evaluator = RestrictedPartEvaluator(split, part, ei.interp_dofs, sub);
    ei.source_dofs = ei.evaluator.source_dofs();
    return ei;
}

std::string train_name(int s) { return "train_" + std::to_string(s) + ".traj"; }
std::string stage_name(int s) { return "train_" + std::to_string(s) + "_stages.vec"; }
std::string summary_name(int s) { return "train_" + std::to_string(s) + "_summary.txt"; }
std::string test_name(int t) { return "test_" + std::to_string(t) + ".traj"; }

std::vector<std::string> artifact_names(const ExperimentConfig& c) {
    std::vector<std::string> names{"geometry.labels", "basis_c.vec", "basis_phi.vec",
                                   "ei_bv.blk",       "ei_invc.blk", "loc_space.blk",
                                   "lei_projected.blk", "lei_fluxsplit.blk"};
    for (int s = 0; s < c.train_count; ++s) {
        names.push_back(train_name(s));
        names.push_back(stage_name(s));
    }
    for (int t = 0; t < c.test_count; ++t) names.push_back(test_name(t));
    return names;
}

void write_manifest(const ExperimentConfig& c, const std::vector<std::string>& names) {
    std::ofstream f(fs::path(c.out_dir) / "manifest.txt");
    if (!f) throw IoError("cannot write manifest");
    f << "config " << hash_hex(c.hash()) << '\n';
    for (const auto& n : names)
        f << n << ' ' << hash_hex(hash_file((fs::path(c.out_dir) / n).string())) << '\n';
}

// Returns true when the manifest matches the config and every listed
// artifact is present with an unchanged content hash.
bool manifest_valid(const ExperimentConfig& c) {
    std::ifstream f(fs::path(c.out_dir) / "manifest.txt");
    if (!f) return false;
    std::string key, hash;
    if (!(f >> key >> hash) || key != "config" || hash != hash_hex(c.hash())) return false;
    std::vector<std::string> expected = artifact_names(c);
    size_t seen = 0;
    while (f >> key >> hash) {
        const fs::path p = fs::path(c.out_dir) / key;
        if (!fs::exists(p) || hash_hex(hash_file(p.string())) != hash) return false;
        ++seen;
    }
    return seen == expected.size();
}

std::uint64_t combined_artifact_hash(const ExperimentConfig& c) {
    std::uint64_t h = c.hash();
    for (const auto& n : artifact_names(c)) {
        const std::string file_hash = hash_hex(hash_file((fs::path(c.out_dir) / n).string()));
        h = fnv1a(file_hash.data(), file_hash.size(), h);
    }
    return h;
}

} // namespace

OfflineSummary run_offline(const ExperimentConfig& config) {
    OfflineSummary summary;
    const double t0 = wall_now();
    fs::create_directories(config.out_dir);

    if (manifest_valid(config)) {
        summary.cache_hit = true;
        std::fprintf(stderr, "[offline] cache hit, nothing to do\n");
        return summary;
    }

    const VoxelGrid grid = build_demo_geometry(config.geometry);
    const FaceSet faces = classify_faces(grid);
    const OperatorSplit split = assemble_operator(grid, faces, MaterialData{});
    const MacroPartition partition = build_macro_partition(grid, config.macro_dims);
    check_partition_granularity(grid, partition, config.min_subdomain_voxels);
    const TimeGrid tg = config.time_grid();
    const TrajectoryOptions topts = config.trajectory_options();

    write_labels_file((fs::path(config.out_dir) / "geometry.labels").string(), grid);

    // training trajectories with Newton-stage capture
    std::vector<Vector> columns;
    const auto train_mus = config.training_parameters();
    for (int s = 0; s < config.train_count; ++s) {
        TrajectoryOptions to = topts;
        to.capture_stages = config.capture_stages;
        Trajectory traj = solve_trajectory(split, tg, train_mus[s], to);
        write_trajectory_file((fs::path(config.out_dir) / train_name(s)).string(), traj);
        write_trajectory_summary((fs::path(config.out_dir) / summary_name(s)).string(), traj);
        Matrix stages(split.dof.n_dof, traj.newton_stages.size());
        for (size_t k = 0; k < traj.newton_stages.size(); ++k)
            stages.col(k) = traj.newton_stages[k];
        write_matrix_file((fs::path(config.out_dir) / stage_name(s)).string(), stages,
                          train_mus[s]);
        for (Eigen::Index c = 0; c < traj.states.cols(); ++c) columns.push_back(traj.states.col(c));
        summary.snapshot_count += static_cast<int>(traj.states.cols());
        for (auto& st : traj.newton_stages) columns.push_back(std::move(st));
        summary.stage_count += static_cast<int>(traj.newton_stages.size());
        std::fprintf(stderr, "[offline] training %d/%d done (mu = %g)\n", s + 1,
                     config.train_count, train_mus[s]);
    }

    Matrix snapshots(split.dof.n_dof, columns.size());
    for (size_t c = 0; c < columns.size(); ++c) {
        snapshots.col(static_cast<Eigen::Index>(c)) = columns[c];
        columns[c].resize(0);
    }
    columns.clear();
    columns.shrink_to_fit();

    // test trajectories (no stage capture)
    const auto test_mus = config.test_parameters();
    for (int t = 0; t < config.test_count; ++t) {
        Trajectory traj = solve_trajectory(split, tg, test_mus[t], topts);
        write_trajectory_file((fs::path(config.out_dir) / test_name(t)).string(), traj);
        std::fprintf(stderr, "[offline] test %d/%d done (mu = %g)\n", t + 1, config.test_count,
                     test_mus[t]);
    }

    // global separate-variable PODs
    const GlobalBases bases = pod_separate_variables(split.dof, snapshots, config.pod_tol);
    write_matrix_file((fs::path(config.out_dir) / "basis_c.vec").string(), bases.c.modes,
                      config.pod_tol);
    write_matrix_file((fs::path(config.out_dir) / "basis_phi.vec").string(), bases.phi.modes,
                      config.pod_tol);
    std::fprintf(stderr, "[offline] global POD: dim c = %d, dim phi = %d\n",
                 static_cast<int>(bases.c.size()), static_cast<int>(bases.phi.size()));

    // global EI on evaluations of the two nonlinear parts
    for (NonlinearPart part : {NonlinearPart::ButlerVolmer, NonlinearPart::InverseC}) {
        const auto support = part_support_rows(split, part);
        const Matrix training = part_training_matrix(split, part, snapshots, support);
        const EIData ei = ei_greedy(split, part, training, support, config.ei_tol, 0);
        std::vector<BlockSection> sections;
        write_eidata_block(sections, ei);
        const char* name = part == NonlinearPart::ButlerVolmer ? "ei_bv.blk" : "ei_invc.blk";
        write_block_file((fs::path(config.out_dir) / name).string(), sections);
        std::fprintf(stderr, "[offline] global EI %s: M = %d, M' = %d\n",
                     part == NonlinearPart::ButlerVolmer ? "bv" : "1/c", ei.size(),
                     static_cast<int>(ei.source_dofs.size()));
    }

    // localized space
    const ReducedSpace loc_space =
        build_localized_space(split, partition, snapshots, config.pod_tol);
    {
        std::vector<BlockSection> sections;
        for (const auto& blk : loc_space.blocks) sections.push_back({0, blk.modes, {}});
        write_block_file((fs::path(config.out_dir) / "loc_space.blk").string(), sections);
        std::fprintf(stderr, "[offline] localized space: max subdomain dim = %d, total = %d\n",
                     loc_space.max_subdomain_dim(), loc_space.total_dim());
    }

    // localized EI, both variants
    {
        const LocalEIData lp =
            build_local_ei_projected(split, partition, snapshots, config.ei_tol, 0);
        std::vector<BlockSection> sections;
        for (int p = 0; p < 2; ++p)
            for (const auto& ei : lp.blocks[p]) write_eidata_block(sections, ei);
        write_block_file((fs::path(config.out_dir) / "lei_projected.blk").string(), sections);
        std::fprintf(stderr, "[offline] localized EI (projected): M_loc = %d\n", lp.max_local_m());
    }
    {
        const FluxSplitOperator fsop = build_flux_split(split, partition);
        const LocalEIData lf = build_local_ei_fluxsplit(split, fsop, snapshots, config.ei_tol, 0);
        std::vector<BlockSection> sections;
        for (int p = 0; p < 2; ++p)
            for (const auto& ei : lf.blocks[p]) write_eidata_block(sections, ei);
        write_block_file((fs::path(config.out_dir) / "lei_fluxsplit.blk").string(), sections);
        std::fprintf(stderr, "[offline] localized EI (flux-split): M_loc = %d, M'_loc = %d\n",
                     lf.max_local_m(), lf.max_local_m_prime());
    }

    write_manifest(config, artifact_names(config));
    summary.wall_seconds = wall_now() - t0;
    return summary;
}

OfflineArtifacts load_offline(const ExperimentConfig& config) {
    if (!manifest_valid(config))
        throw IoError("offline artifacts missing or stale in '" + config.out_dir +
                      "': run the offline command first");

    OfflineArtifacts art;
    const VoxelGrid grid = build_demo_geometry(config.geometry);
    art.split = assemble_operator(grid, classify_faces(grid), MaterialData{});
    art.partition = build_macro_partition(grid, config.macro_dims);
    art.train_mus = config.training_parameters();
    art.test_mus = config.test_parameters();

    art.bases.c.modes = read_matrix_file((fs::path(config.out_dir) / "basis_c.vec").string());
    art.bases.phi.modes = read_matrix_file((fs::path(config.out_dir) / "basis_phi.vec").string());

    {
        const auto sections =
            read_block_file((fs::path(config.out_dir) / "ei_bv.blk").string());
        size_t pos = 0;
        art.ei_bv = read_eidata_block(art.split, NonlinearPart::ButlerVolmer, sections, pos,
                                      std::nullopt);
    }
    {
        const auto sections =
            read_block_file((fs::path(config.out_dir) / "ei_invc.blk").string());
        size_t pos = 0;
        art.ei_invc =
            read_eidata_block(art.split, NonlinearPart::InverseC, sections, pos, std::nullopt);
    }

    {
        const auto sections = read_block_file((fs::path(config.out_dir) / "loc_space.blk").string());
        std::vector<Matrix> modes;
        modes.reserve(sections.size());
        for (const auto& s : sections) modes.push_back(s.m);
        art.localized_space = assemble_localized_space(art.split, art.partition, modes);
    }

    const FluxSplitOperator fsop = build_flux_split(art.split, art.partition);
    const auto read_lei = [&](const char* file, LocalEIData::Variant variant) {
        LocalEIData lei;
        lei.variant = variant;
        lei.subdomain_count = art.partition.subdomain_count;
        const auto sections = read_block_file((fs::path(config.out_dir) / file).string());
        size_t pos = 0;
        for (int p = 0; p < 2; ++p) {
            const NonlinearPart part = static_cast<NonlinearPart>(p);
            for (int i = 0; i < art.partition.subdomain_count; ++i) {
                std::optional<FaceSubset> sub;
                if (variant == LocalEIData::Variant::FluxSplit) sub = fsop.subset(part, i);
                lei.blocks[p].push_back(
                    read_eidata_block(art.split, part, sections, pos, std::move(sub)));
            }
        }
        return lei;
    };
    art.lei_projected = read_lei("lei_projected.blk", LocalEIData::Variant::Projected);
    art.lei_fluxsplit = read_lei("lei_fluxsplit.blk", LocalEIData::Variant::FluxSplit);

    art.test_states.reserve(config.test_count);
    for (int t = 0; t < config.test_count; ++t)
        art.test_states.push_back(
            read_trajectory_file((fs::path(config.out_dir) / test_name(t)).string()).states);

    art.artifact_hash = combined_artifact_hash(config);
    return art;
}

namespace {

std::vector<int> auto_caps(int max_val, int points) {
    if (max_val <= 0) return {0};
    const int lo = std::min(2, max_val);
    std::vector<int> caps;
    for (int p = 0; p < points; ++p) {
        const double t = points <= 1 ? 1.0 : static_cast<double>(p) / (points - 1);
        caps.push_back(std::max(
            lo, static_cast<int>(std::lround(lo * std::pow(static_cast<double>(max_val) / lo, t)))));
    }
    caps.push_back(max_val);
    std::sort(caps.begin(), caps.end());
    caps.erase(std::unique(caps.begin(), caps.end()), caps.end());
    return caps;
}

struct SweepSetup {
    std::vector<int> dim_caps;
    std::vector<int> m_caps;
};

SweepSetup sweep_setup(const ExperimentConfig& config, Scheme scheme,
                       const OfflineArtifacts& art) {
    SweepSetup s;
    int dim_max = 0, m_max = 0;
    if (scheme == Scheme::Global) {
        dim_max = std::max<int>(art.bases.c.modes.cols(), art.bases.phi.modes.cols());
        m_max = std::max(art.ei_bv.size(), art.ei_invc.size());
    } else {
        for (const auto& blk : art.localized_space.blocks) dim_max = std::max(dim_max, blk.dim());
        const LocalEIData& lei =
            scheme == Scheme::LocalizedProjected ? art.lei_projected : art.lei_fluxsplit;
        m_max = lei.max_local_m();
    }
    s.dim_caps = config.sweep_dims.empty() ? auto_caps(dim_max, config.sweep_dim_points)
                                           : config.sweep_dims;
    s.m_caps = config.sweep_ms.empty() ? auto_caps(m_max, config.sweep_m_points) : config.sweep_ms;
    return s;
}

SweepRecord eval_sweep_point(const ExperimentConfig& config, Scheme scheme,
                             const OfflineArtifacts& art, int dim_cap, int m_cap) {
    SweepRecord rec;
    rec.dim_cap = dim_cap;
    rec.m_cap = m_cap;
    const double t0 = wall_now();

    const OperatorSplit& split = art.split;
    ReducedSpace space;
    std::vector<const EIData*> ei_list;
    EIData g_bv, g_invc;     // truncated copies (global)
    LocalEIData lei;         // truncated copies (localized)

    if (scheme == Scheme::Global) {
        space = make_global_space(split.dof, art.bases.c, art.bases.phi).truncated(dim_cap);
        g_bv = art.ei_bv.truncated(split, m_cap);
        g_invc = art.ei_invc.truncated(split, m_cap);
        ei_list = {&g_bv, &g_invc};
        rec.m_bv = g_bv.size();
        rec.m_invc = g_invc.size();
        rec.m_prime = std::max<int>(g_bv.source_dofs.size(), g_invc.source_dofs.size());
        rec.y_m = std::max(rec.m_bv, rec.m_invc);
    } else {
        space = art.localized_space.truncated(dim_cap);
        lei = (scheme == Scheme::LocalizedProjected ? art.lei_projected : art.lei_fluxsplit)
                  .truncated(split, m_cap);
        ei_list = lei.all_blocks();
        for (const auto& per_part : lei.blocks)
            for (const auto& ei : per_part) {
                if (ei.part == NonlinearPart::ButlerVolmer) rec.m_bv = std::max(rec.m_bv, ei.size());
                else rec.m_invc = std::max(rec.m_invc, ei.size());
            }
        rec.m_prime = lei.max_local_m_prime();
        rec.y_m = scheme == Scheme::LocalizedFluxSplit ? rec.m_prime
                                                       : std::max(rec.m_bv, rec.m_invc);
    }

    if (scheme == Scheme::Global) {
        rec.dim_c = space.blocks[0].dim();
        rec.dim_phi = space.blocks[1].dim();
        rec.x_dim = rec.dim_c + rec.dim_phi;
    } else {
        for (const auto& blk : space.blocks) {
            if (blk.var == Var::C) rec.dim_c = std::max(rec.dim_c, blk.dim());
            else rec.dim_phi = std::max(rec.dim_phi, blk.dim());
        }
        rec.x_dim = space.max_subdomain_dim();
    }

    if (space.total_dim() == 0 || dim_cap == 0) {
        // zero reduced space convention: relative error 1
        rec.err_c = 1.0;
        rec.err_phi = 1.0;
        rec.newton_failures = static_cast<int>(art.test_mus.size());
        rec.wall_seconds = wall_now() - t0;
        return rec;
    }

    const ReducedOperator rop = build_reduced_operator(split, space, ei_list);
    const TimeGrid tg = config.time_grid();
    const TrajectoryOptions topts = config.trajectory_options();

    double err_c = 0.0, err_phi = 0.0;
    for (size_t t = 0; t < art.test_mus.size(); ++t) {
        double ec = 1.0, ep = 1.0;
        try {
            const ReducedTrajectory rt =
                solve_reduced_trajectory(rop, split, tg, art.test_mus[t], topts);
            const Matrix recon = rop.space.reconstruct_all(rt.coords);
            const ReductionError re = reduction_error(art.test_states[t], recon, split.dof.n_c);
            ec = std::isfinite(re.c) ? re.c : 1.0;
            ep = std::isfinite(re.phi) ? re.phi : 1.0;
        } catch (const Error&) {
            ++rec.newton_failures;
        }
        err_c = std::max(err_c, ec);
        err_phi = std::max(err_phi, ep);
    }
    rec.err_c = err_c;
    rec.err_phi = err_phi;
    rec.wall_seconds = wall_now() - t0;
    return rec;
}

void write_sweep_results(const ExperimentConfig& config, const SweepResult& res) {
    const fs::path p =
        fs::path(config.out_dir) / (std::string(scheme_prefix(res.scheme)) + "_results.txt");
    std::ofstream f(p);
    if (!f) throw IoError("cannot write sweep results '" + p.string() + "'");
    f << "# scheme " << scheme_name(res.scheme) << '\n';
    f << "# config " << hash_hex(res.config_hash) << '\n';
    f << "# artifacts " << hash_hex(res.artifact_hash) << '\n';
    f << "# columns: dim_cap m_cap x_dim y_m dim_c dim_phi m_bv m_invc m_prime err_c err_phi "
         "newton_failures wall_seconds\n";
    for (const auto& r : res.records)
        f << r.dim_cap << ' ' << r.m_cap << ' ' << fmt(r.x_dim) << ' ' << fmt(r.y_m) << ' '
          << r.dim_c << ' ' << r.dim_phi << ' ' << r.m_bv << ' ' << r.m_invc << ' ' << r.m_prime
          << ' ' << fmt(r.err_c) << ' ' << fmt(r.err_phi) << ' ' << r.newton_failures << ' '
          << fmt(r.wall_seconds) << '\n';
}

} // namespace

SweepResult run_sweep(const ExperimentConfig& config, Scheme scheme,
                      const OfflineArtifacts* preloaded) {
    std::optional<OfflineArtifacts> own;
    const OfflineArtifacts& art = preloaded ? *preloaded : own.emplace(load_offline(config));

    const SweepSetup setup = sweep_setup(config, scheme, art);
    SweepResult res;
    res.scheme = scheme;
    res.config_hash = config.hash();
    res.artifact_hash = art.artifact_hash;

    struct Task {
        int dim_cap, m_cap;
    };
    std::vector<Task> tasks;
    for (int d : setup.dim_caps)
        for (int m : setup.m_caps) tasks.push_back({d, m});
    res.records.resize(tasks.size());

    std::atomic<size_t> next{0};
    std::mutex log_mutex;
    const int n_threads = std::max(1, config.threads);
    const auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            res.records[i] =
                eval_sweep_point(config, scheme, art, tasks[i].dim_cap, tasks[i].m_cap);
            std::lock_guard<std::mutex> lock(log_mutex);
            std::fprintf(stderr,
                         "[sweep %s] point %zu/%zu (dim<=%d, M<=%d): err_c = %.3e (%.1fs)\n",
                         scheme_name(scheme), i + 1, tasks.size(), tasks[i].dim_cap,
                         tasks[i].m_cap, res.records[i].err_c, res.records[i].wall_seconds);
        }
    };
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    write_sweep_results(config, res);
    return res;
}

SweepResult read_sweep_results(const ExperimentConfig& config, Scheme scheme) {
    const fs::path p =
        fs::path(config.out_dir) / (std::string(scheme_prefix(scheme)) + "_results.txt");
    std::ifstream f(p);
    if (!f)
        throw IoError("sweep results '" + p.string() + "' not found: run the sweep command for "
                      "scheme '" + std::string(scheme_name(scheme)) + "' first");
    SweepResult res;
    res.scheme = scheme;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream h(line.substr(1));
            std::string key, value;
            h >> key >> value;
            if (key == "config") res.config_hash = std::stoull(value, nullptr, 16);
            if (key == "artifacts") res.artifact_hash = std::stoull(value, nullptr, 16);
            continue;
        }
        std::istringstream row(line);
        SweepRecord r;
        if (!(row >> r.dim_cap >> r.m_cap >> r.x_dim >> r.y_m >> r.dim_c >> r.dim_phi >> r.m_bv >>
              r.m_invc >> r.m_prime >> r.err_c >> r.err_phi >> r.newton_failures >>
              r.wall_seconds))
            throw IoError("sweep results '" + p.string() + "': malformed row");
        res.records.push_back(r);
    }
    return res;
}

std::vector<std::string> emit_tables(const ExperimentConfig& config) {
    std::vector<std::string> written;
    for (Scheme scheme :
         {Scheme::Global, Scheme::LocalizedProjected, Scheme::LocalizedFluxSplit}) {
        SweepResult res;
        try {
            res = read_sweep_results(config, scheme);
        } catch (const IoError&) {
            continue;  // scheme not swept yet
        }
        for (int var = 0; var < 2; ++var) {
            const std::string name =
                std::string(scheme_prefix(scheme)) + (var == 0 ? "_c.dat" : "_phi.dat");
            const fs::path p = fs::path(config.out_dir) / name;
            std::ofstream f(p);
            if (!f) throw IoError("cannot write table '" + p.string() + "'");
            f << "# " << name << ": relative model order reduction error, "
              << (var == 0 ? "concentration" : "potential") << " variable\n";
            f << "# scheme " << scheme_name(scheme) << '\n';
            f << "# config " << hash_hex(res.config_hash) << '\n';
            f << "# artifacts " << hash_hex(res.artifact_hash) << '\n';
            f << "# columns: dim m error\n";
            char buf[128];
            for (size_t i = 0; i < res.records.size(); ++i) {
                const auto& r = res.records[i];
                if (i > 0 && res.records[i - 1].dim_cap != r.dim_cap) f << '\n';
                std::snprintf(buf, sizeof(buf), "%.17g %.17g %.16e\n", r.x_dim, r.y_m,
                              var == 0 ? r.err_c : r.err_phi);
                f << buf;
            }
            written.push_back(name);
        }
    }
    if (written.empty())
        throw IoError("no sweep results found in '" + config.out_dir + "': run sweeps first");
    return written;
}

} // namespace battrom
