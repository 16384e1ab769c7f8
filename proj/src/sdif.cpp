#include "ajscc/sdif.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ajscc {

namespace {

static_assert(std::endian::native == std::endian::little, "SDIF writer assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

}  // namespace

void write_sdif(std::ostream& out, const ComplexGrid& grid) {
    out.write("SDIF", 4);
    put_u32(out, kSdifVersion);
    put_u32(out, static_cast<std::uint32_t>(grid.rows()));
    put_u32(out, static_cast<std::uint32_t>(grid.cols()));
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid.cols(); ++c) {
            const std::array<double, 2> v{grid(r, c).real(), grid(r, c).imag()};
            out.write(reinterpret_cast<const char*>(v.data()), sizeof v);
        }
    }
}

ComplexGrid read_sdif(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (!in || std::memcmp(magic.data(), "SDIF", 4) != 0) throw IoError("bad SDIF magic");
    const auto version = get_u32(in);
    if (version != kSdifVersion) throw IoError("unsupported SDIF version " + std::to_string(version));
    const auto rows = get_u32(in);
    const auto cols = get_u32(in);
    if (!in) throw IoError("truncated SDIF header");
    ComplexGrid grid(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            std::array<double, 2> v{};
            in.read(reinterpret_cast<char*>(v.data()), sizeof v);
            grid(r, c) = {v[0], v[1]};
        }
    }
    if (!in) throw IoError("truncated SDIF payload");
    return grid;
}

void save_reception(const std::string& path, const OfdmReception& rx) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_sdif(out, rx.pilot_grid);
    write_sdif(out, rx.data_grid);
    write_sdif(out, rx.pilot_ref);
    if (!out) throw IoError("write failed: " + path);
}

OfdmReception load_reception(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    try {
        OfdmReception rx;
        rx.pilot_grid = read_sdif(in);
        rx.data_grid = read_sdif(in);
        rx.pilot_ref = read_sdif(in);
        if (rx.pilot_grid.cols() != rx.data_grid.cols() || rx.pilot_ref.rows() != rx.pilot_grid.rows() ||
            rx.pilot_ref.cols() != rx.pilot_grid.cols())
            throw IoError("inconsistent grid shapes");
        return rx;
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

void save_grid(const std::string& path, const ComplexGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_sdif(out, grid);
    if (!out) throw IoError("write failed: " + path);
}

ComplexGrid load_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    try {
        return read_sdif(in);
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

}  // namespace ajscc
