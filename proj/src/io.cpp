#include "battrom/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "binary artifact formats assume a little-endian host");

namespace battrom {

namespace {

constexpr char kVecMagic[8] = {'B', 'A', 'T', 'T', 'V', 'E', 'C', '\0'};
constexpr char kTrajMagic[8] = {'B', 'A', 'T', 'T', 'R', 'A', 'J', '\0'};
constexpr char kIdxMagic[8] = {'B', 'A', 'T', 'T', 'I', 'D', 'X', '\0'};

void write_header(std::ofstream& f, const char magic[8], std::uint64_t a, std::uint64_t b,
                  double meta) {
    f.write(magic, 8);
    f.write(reinterpret_cast<const char*>(&a), 8);
    f.write(reinterpret_cast<const char*>(&b), 8);
    f.write(reinterpret_cast<const char*>(&meta), 8);
}

void read_header(std::ifstream& f, const char magic[8], std::uint64_t& a, std::uint64_t& b,
                 double& meta, const std::string& path) {
    char m[8];
    f.read(m, 8);
    if (!f || std::memcmp(m, magic, 8) != 0)
        throw IoError("'" + path + "': wrong or missing file magic");
    f.read(reinterpret_cast<char*>(&a), 8);
    f.read(reinterpret_cast<char*>(&b), 8);
    f.read(reinterpret_cast<char*>(&meta), 8);
    if (!f) throw IoError("'" + path + "': truncated header");
}

void write_payload(std::ofstream& f, const Matrix& m) {
    f.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Matrix read_payload(std::ifstream& f, std::uint64_t rows, std::uint64_t cols,
                    const std::string& path) {
    if (rows > (1ull << 32) || cols > (1ull << 32))
        throw IoError("'" + path + "': implausible matrix shape");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    f.read(reinterpret_cast<char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!f) throw IoError("'" + path + "': truncated payload");
    return m;
}

} // namespace

void write_matrix_file(const std::string& path, const Matrix& m, double meta) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    write_header(f, kVecMagic, static_cast<std::uint64_t>(m.rows()),
                 static_cast<std::uint64_t>(m.cols()), meta);
    write_payload(f, m);
    if (!f) throw IoError("write failed on '" + path + "'");
}

Matrix read_matrix_file(const std::string& path, double* meta) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::uint64_t rows, cols;
    double m;
    read_header(f, kVecMagic, rows, cols, m, path);
    if (meta) *meta = m;
    return read_payload(f, rows, cols, path);
}

void write_trajectory_file(const std::string& path, const Trajectory& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    write_header(f, kTrajMagic, static_cast<std::uint64_t>(t.states.rows()),
                 static_cast<std::uint64_t>(t.states.cols()), t.mu);
    const double dt = t.tg.dt;
    f.write(reinterpret_cast<const char*>(&dt), 8);
    write_payload(f, t.states);
    if (!f) throw IoError("write failed on '" + path + "'");
}

Trajectory read_trajectory_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::uint64_t rows, cols;
    double mu;
    read_header(f, kTrajMagic, rows, cols, mu, path);
    Trajectory t;
    t.mu = mu;
    double dt;
    f.read(reinterpret_cast<char*>(&dt), 8);
    if (!f) throw IoError("'" + path + "': truncated header");
    t.tg.dt = dt;
    t.tg.n_steps = static_cast<int>(cols) - 1;
    t.states = read_payload(f, rows, cols, path);
    return t;
}

void write_trajectory_summary(const std::string& path, const Trajectory& t) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "# mu " << t.mu << " dt " << t.tg.dt << " steps " << t.tg.n_steps << "\n";
    f << "# step newton_iterations final_scaled_residual halvings\n";
    for (size_t s = 0; s < t.diagnostics.size(); ++s)
        f << (s + 1) << ' ' << t.diagnostics[s].newton_iterations << ' '
          << t.diagnostics[s].final_residual << ' ' << t.diagnostics[s].halvings << '\n';
    for (const auto& w : t.warnings) f << "# warning: " << w << '\n';
}

void write_index_file(const std::string& path, const std::vector<int>& idx) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    write_header(f, kIdxMagic, idx.size(), 0, 0.0);
    for (int v : idx) {
        const std::int64_t x = v;
        f.write(reinterpret_cast<const char*>(&x), 8);
    }
    if (!f) throw IoError("write failed on '" + path + "'");
}

std::vector<int> read_index_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::uint64_t count, zero;
    double meta;
    read_header(f, kIdxMagic, count, zero, meta, path);
    std::vector<int> idx(count);
    for (auto& v : idx) {
        std::int64_t x;
        f.read(reinterpret_cast<char*>(&x), 8);
        v = static_cast<int>(x);
    }
    if (!f) throw IoError("'" + path + "': truncated index data");
    return idx;
}

namespace {
constexpr char kBlkMagic[8] = {'B', 'A', 'T', 'T', 'B', 'L', 'K', '\0'};
}

void write_block_file(const std::string& path, const std::vector<BlockSection>& sections) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(kBlkMagic, 8);
    const std::uint64_t count = sections.size();
    f.write(reinterpret_cast<const char*>(&count), 8);
    for (const auto& s : sections) {
        const std::uint64_t kind = static_cast<std::uint64_t>(s.kind);
        f.write(reinterpret_cast<const char*>(&kind), 8);
        if (s.kind == 0) {
            const std::uint64_t rows = s.m.rows(), cols = s.m.cols();
            f.write(reinterpret_cast<const char*>(&rows), 8);
            f.write(reinterpret_cast<const char*>(&cols), 8);
            write_payload(f, s.m);
        } else {
            const std::uint64_t n = s.idx.size();
            f.write(reinterpret_cast<const char*>(&n), 8);
            for (int v : s.idx) {
                const std::int64_t x = v;
                f.write(reinterpret_cast<const char*>(&x), 8);
            }
        }
    }
    if (!f) throw IoError("write failed on '" + path + "'");
}

std::vector<BlockSection> read_block_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    char m[8];
    f.read(m, 8);
    if (!f || std::memcmp(m, kBlkMagic, 8) != 0)
        throw IoError("'" + path + "': wrong or missing file magic");
    std::uint64_t count;
    f.read(reinterpret_cast<char*>(&count), 8);
    if (!f || count > (1ull << 24)) throw IoError("'" + path + "': bad section count");
    std::vector<BlockSection> sections(count);
    for (auto& s : sections) {
        std::uint64_t kind;
        f.read(reinterpret_cast<char*>(&kind), 8);
        if (!f) throw IoError("'" + path + "': truncated section header");
        s.kind = static_cast<int>(kind);
        if (s.kind == 0) {
            std::uint64_t rows, cols;
            f.read(reinterpret_cast<char*>(&rows), 8);
            f.read(reinterpret_cast<char*>(&cols), 8);
            if (!f) throw IoError("'" + path + "': truncated section header");
            s.m = read_payload(f, rows, cols, path);
        } else if (s.kind == 1) {
            std::uint64_t n;
            f.read(reinterpret_cast<char*>(&n), 8);
            if (!f || n > (1ull << 32)) throw IoError("'" + path + "': bad index count");
            s.idx.resize(n);
            for (auto& v : s.idx) {
                std::int64_t x;
                f.read(reinterpret_cast<char*>(&x), 8);
                v = static_cast<int>(x);
            }
            if (!f) throw IoError("'" + path + "': truncated index section");
        } else {
            throw IoError("'" + path + "': unknown section kind");
        }
    }
    return sections;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t hash_string(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::uint64_t hash_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for hashing");
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof(buf));
        h = fnv1a(buf, static_cast<std::size_t>(f.gcount()), h);
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace battrom
