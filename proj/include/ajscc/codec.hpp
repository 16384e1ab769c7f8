#pragma once

// Linear stand-in for a learned JSCC encoder/decoder pair. Real source pairs
// are packed into complex entries and mapped through a matrix with orthonormal
// columns, so the decoder is an exact left inverse.

#include <cstdint>
#include <vector>

#include "ajscc/common.hpp"

namespace ajscc {

using ComplexMatrix = Eigen::MatrixXcd;

class LinearCodec {
public:
    // source_dim n must be even; symbol_dim m >= n/2.
    LinearCodec(int source_dim, int symbol_dim, std::uint64_t seed);

    int source_dim() const { return n_; }
    int symbol_dim() const { return m_; }
    std::uint64_t seed() const { return seed_; }
    const ComplexMatrix& matrix() const { return E_; }

    // sqrt(m/n): unit average symbol power for a unit-variance source.
    double power_scale() const { return scale_; }

    ComplexVector encode(const RealVector& x) const;
    RealVector decode(const ComplexVector& symbols) const;

    // Symbol positions inside an N_s x N data grid. Symbols are split across rows
    // in order, ceil(m/N_s) per row, each row spread as an evenly spaced comb.
    struct Slot {
        int row;
        int col;
    };
    std::vector<Slot> grid_map(int num_subcarriers, int num_data_symbols) const;

    // Places symbols on the grid; every unused slot carries zero.
    ComplexGrid to_grid(const ComplexVector& symbols, int num_subcarriers, int num_data_symbols) const;
    ComplexVector from_grid(const ComplexGrid& grid) const;

    // Frequency-domain samples of a per-subcarrier vector at the used slots.
    ComplexVector gather(const ComplexVector& per_subcarrier, int num_data_symbols) const;
    // Per-subcarrier 0/1 values gathered the same way.
    RealVector gather(const RealVector& per_subcarrier, int num_data_symbols) const;

private:
    int n_;
    int m_;
    std::uint64_t seed_;
    double scale_;
    ComplexMatrix E_;
};

ComplexVector pack_pairs(const RealVector& x);
RealVector unpack_pairs(const ComplexVector& c);

}  // namespace ajscc
