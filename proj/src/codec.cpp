#include "ajscc/codec.hpp"

#include <cmath>

namespace ajscc {

ComplexVector pack_pairs(const RealVector& x) {
    require(x.size() % 2 == 0, "source dimension must be even");
    ComplexVector c(x.size() / 2);
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = {x[2 * i], x[2 * i + 1]};
    return c;
}

RealVector unpack_pairs(const ComplexVector& c) {
    RealVector x(2 * c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        x[2 * i] = c[i].real();
        x[2 * i + 1] = c[i].imag();
    }
    return x;
}

LinearCodec::LinearCodec(int source_dim, int symbol_dim, std::uint64_t seed)
    : n_(source_dim), m_(symbol_dim), seed_(seed) {
    require(n_ > 0 && n_ % 2 == 0, "source_dim must be a positive even integer");
    require(m_ >= n_ / 2, "symbol_dim must be at least source_dim / 2");
    scale_ = std::sqrt(static_cast<double>(m_) / n_);
    Rng rng(seed);
    ComplexMatrix A(m_, n_ / 2);
    for (Eigen::Index c = 0; c < A.cols(); ++c)
        for (Eigen::Index r = 0; r < A.rows(); ++r) A(r, c) = rng.complex_normal(1.0);
    Eigen::HouseholderQR<ComplexMatrix> qr(A);
    E_ = qr.householderQ() * ComplexMatrix::Identity(m_, n_ / 2);
}

ComplexVector LinearCodec::encode(const RealVector& x) const {
    require(x.size() == n_, "source vector has the wrong dimension");
    return scale_ * (E_ * pack_pairs(x));
}

RealVector LinearCodec::decode(const ComplexVector& symbols) const {
    require(symbols.size() == m_, "symbol vector has the wrong dimension");
    return unpack_pairs(E_.adjoint() * symbols) / scale_;
}

std::vector<LinearCodec::Slot> LinearCodec::grid_map(int num_subcarriers, int num_data_symbols) const {
    require(num_data_symbols >= 1, "need at least one data symbol");
    const int per_row = (m_ + num_data_symbols - 1) / num_data_symbols;
    require(per_row <= num_subcarriers, "codeword does not fit in the data grid");
    std::vector<Slot> slots(static_cast<std::size_t>(m_));
    for (int i = 0; i < m_; ++i) {
        const int row = i / per_row;
        const int j = i % per_row;
        const auto col = static_cast<int>(static_cast<long long>(j) * num_subcarriers / per_row);
        slots[static_cast<std::size_t>(i)] = {row, col};
    }
    return slots;
}

ComplexGrid LinearCodec::to_grid(const ComplexVector& symbols, int num_subcarriers, int num_data_symbols) const {
    require(symbols.size() == m_, "symbol vector has the wrong dimension");
    ComplexGrid grid = ComplexGrid::Zero(num_data_symbols, num_subcarriers);
    const auto slots = grid_map(num_subcarriers, num_data_symbols);
    for (int i = 0; i < m_; ++i) grid(slots[i].row, slots[i].col) = symbols[i];
    return grid;
}

ComplexVector LinearCodec::from_grid(const ComplexGrid& grid) const {
    const auto slots = grid_map(static_cast<int>(grid.cols()), static_cast<int>(grid.rows()));
    ComplexVector out(m_);
    for (int i = 0; i < m_; ++i) out[i] = grid(slots[i].row, slots[i].col);
    return out;
}

ComplexVector LinearCodec::gather(const ComplexVector& per_subcarrier, int num_data_symbols) const {
    const auto slots = grid_map(static_cast<int>(per_subcarrier.size()), num_data_symbols);
    ComplexVector out(m_);
    for (int i = 0; i < m_; ++i) out[i] = per_subcarrier[slots[i].col];
    return out;
}

RealVector LinearCodec::gather(const RealVector& per_subcarrier, int num_data_symbols) const {
    const auto slots = grid_map(static_cast<int>(per_subcarrier.size()), num_data_symbols);
    RealVector out(m_);
    for (int i = 0; i < m_; ++i) out[i] = per_subcarrier[slots[i].col];
    return out;
}

}  // namespace ajscc
