#include "bsnq/field_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "bsnq/error.hpp"
#include "bsnq/format.hpp"

namespace bsnq {

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    std::array<char, 8> bytes;
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    os.write(bytes.data(), 8);
}

template <typename T>
T get_le(std::istream& is) {
    std::array<unsigned char, 8> bytes;
    is.read(reinterpret_cast<char*>(bytes.data()), 8);
    if (!is) throw IoError("snapshot truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    T value;
    std::memcpy(&value, &bits, 8);
    return value;
}

}  // namespace

void write_snapshot(std::ostream& os, const ScalarField& f) {
    const Grid& g = f.grid();
    os.write(kSnapshotMagic, sizeof(kSnapshotMagic));
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(g.Nx));
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(g.Nz));
    put_le<double>(os, g.Lx);
    put_le<double>(os, g.h);
    for (double v : f.values()) put_le<double>(os, v);
    if (!os) throw IoError("failed writing snapshot");
}

ScalarField read_snapshot(std::istream& is) {
    char magic[16];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) throw IoError("bad snapshot magic");
    const auto nx = get_le<std::uint64_t>(is);
    const auto nz = get_le<std::uint64_t>(is);
    const double lx = get_le<double>(is);
    const double h = get_le<double>(is);
    if (nx > (1u << 20) || nz > (1u << 20)) throw IoError("snapshot dimensions out of range");
    const Grid g = build_grid(lx, h, static_cast<int>(nx), static_cast<int>(nz));
    std::vector<double> values(g.size());
    for (double& v : values) v = get_le<double>(is);
    return ScalarField(g, std::move(values));
}

void write_snapshot(const std::filesystem::path& path, const ScalarField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string());
    write_snapshot(os, f);
}

ScalarField read_snapshot(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return read_snapshot(is);
}

void write_csv(std::ostream& os, const ScalarField& f) {
    const Grid& g = f.grid();
    os << "x,z,value\n";
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nz; ++j) os << fmt_double(g.x(i)) << ',' << fmt_double(g.z(j)) << ',' << fmt_double(f(i, j)) << '\n';
}

void write_csv(const std::filesystem::path& path, const ScalarField& f) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string());
    write_csv(os, f);
}

}  // namespace bsnq
