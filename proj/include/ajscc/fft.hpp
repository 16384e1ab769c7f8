#pragma once

#include "ajscc/common.hpp"

namespace ajscc {

// Unitary DFT pair: X[k] = N^{-1/2} sum_n x[n] e^{-i 2 pi k n / N}. Power is
// preserved across domains, so a noise variance means the same thing in both.
ComplexVector unitary_dft(const ComplexVector& x);
ComplexVector unitary_idft(const ComplexVector& X);

}  // namespace ajscc
