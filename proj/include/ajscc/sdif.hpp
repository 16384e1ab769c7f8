#pragma once

// SDIF: a minimal binary container for complex grids used as test fixtures and
// CLI inputs. Layout, little-endian:
//   bytes 0..3   magic "SDIF"
//   bytes 4..7   version (u32, currently 1)
//   bytes 8..11  rows (u32)
//   bytes 12..15 cols (u32)
//   then rows*cols row-major samples as interleaved (re, im) float64.
// A reception file is three consecutive blocks: pilot grid, data grid, pilot reference.

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "ajscc/common.hpp"
#include "ajscc/ofdm_channel.hpp"

namespace ajscc {

inline constexpr std::uint32_t kSdifVersion = 1;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_sdif(std::ostream& out, const ComplexGrid& grid);
ComplexGrid read_sdif(std::istream& in);

void save_reception(const std::string& path, const OfdmReception& rx);
OfdmReception load_reception(const std::string& path);

void save_grid(const std::string& path, const ComplexGrid& grid);
ComplexGrid load_grid(const std::string& path);

}  // namespace ajscc
