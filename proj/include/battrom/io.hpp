#ifndef BATTROM_IO_HPP
#define BATTROM_IO_HPP

#include <cstdint>
#include <string>

#include "battrom/linalg.hpp"
#include "battrom/timestepper.hpp"

namespace battrom {

/// Shared binary format for vector collections (bases, snapshot blocks,
/// EI collateral data): 8-byte magic "BATTVEC\0", u64 rows, u64 cols,
/// f64 meta, then column-major little-endian doubles.
void write_matrix_file(const std::string& path, const Matrix& m, double meta = 0.0);
Matrix read_matrix_file(const std::string& path, double* meta = nullptr);

/// Trajectory file: magic "BATTRAJ\0", u64 dof count, u64 state count,
/// f64 mu, then the states in time order (same payload encoding).
void write_trajectory_file(const std::string& path, const Trajectory& t);
Trajectory read_trajectory_file(const std::string& path);

/// Plain-text per-step Newton summary next to a trajectory.
void write_trajectory_summary(const std::string& path, const Trajectory& t);

/// Index list as little-endian 64-bit integers: magic "BATTIDX\0",
/// u64 count, then the values.
void write_index_file(const std::string& path, const std::vector<int>& idx);
std::vector<int> read_index_file(const std::string& path);

/// Container of tagged sections for block-structured artifacts
/// (localized bases, per-subdomain interpolation data): magic
/// "BATTBLK\0", u64 section count, then per section a u64 kind
/// (0 = matrix, 1 = index list) followed by the section payload.
struct BlockSection {
    int kind = 0;          // 0: matrix, 1: index list
    Matrix m;              // kind 0
    std::vector<int> idx;  // kind 1
};
void write_block_file(const std::string& path, const std::vector<BlockSection>& sections);
std::vector<BlockSection> read_block_file(const std::string& path);

/// FNV-1a 64-bit content hashes, used for artifact provenance.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t hash_string(const std::string& s);
std::uint64_t hash_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

} // namespace battrom

#endif
