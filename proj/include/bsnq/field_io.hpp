/// @file field_io.hpp
/// @brief Field snapshot files.
///
/// Binary layout (little-endian): 16-byte magic "BSNQFLD1" zero-padded,
/// u64 Nx, u64 Nz, f64 Lx, f64 h, then Nx*Nz f64 values in x-major order.
#pragma once

#include <filesystem>
#include <iosfwd>

#include "bsnq/grid.hpp"

namespace bsnq {

inline constexpr char kSnapshotMagic[16] = {'B', 'S', 'N', 'Q', 'F', 'L', 'D', '1', 0, 0, 0, 0, 0, 0, 0, 0};

void write_snapshot(std::ostream& os, const ScalarField& f);
ScalarField read_snapshot(std::istream& is);
void write_snapshot(const std::filesystem::path& path, const ScalarField& f);
ScalarField read_snapshot(const std::filesystem::path& path);

/// Rows "x,z,value" with a header line.
void write_csv(std::ostream& os, const ScalarField& f);
void write_csv(const std::filesystem::path& path, const ScalarField& f);

}  // namespace bsnq
