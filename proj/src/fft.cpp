#include "ajscc/fft.hpp"

#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace ajscc {

namespace {

Eigen::FFT<double>& engine() {
    // kissfft caches twiddles per instance; one instance per thread.
    thread_local Eigen::FFT<double> fft;
    return fft;
}

}  // namespace

ComplexVector unitary_dft(const ComplexVector& x) {
    const auto n = x.size();
    std::vector<Complex> in(x.data(), x.data() + n);
    std::vector<Complex> out;
    engine().fwd(out, in);
    ComplexVector result = Eigen::Map<ComplexVector>(out.data(), n);
    return result / std::sqrt(static_cast<double>(n));
}

ComplexVector unitary_idft(const ComplexVector& X) {
    const auto n = X.size();
    std::vector<Complex> in(X.data(), X.data() + n);
    std::vector<Complex> out;
    engine().inv(out, in);  // scales by 1/N
    ComplexVector result = Eigen::Map<ComplexVector>(out.data(), n);
    return result * std::sqrt(static_cast<double>(n));
}

}  // namespace ajscc
