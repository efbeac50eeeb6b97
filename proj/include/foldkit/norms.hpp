#pragma once

#include <cmath>

#include "error.hpp"
#include "matrix.hpp"

namespace foldkit {

// ||W - W_hat||_F^2, accumulated row-major with compensation.
inline double recon_error_sq(const Matrix& w, const Matrix& w_hat) {
    if (!same_shape(w, w_hat)) {
        throw Error(ErrorKind::shape, "reconstruction of " + w.shape_string() + " has shape " +
                                          w_hat.shape_string());
    }
    CompensatedSum acc;
    const auto a = w.data();
    const auto b = w_hat.data();
    for (std::size_t n = 0; n < a.size(); ++n) {
        const double d = a[n] - b[n];
        acc += d * d;
    }
    return acc.value();
}

inline double frobenius(const Matrix& w) { return std::sqrt(frobenius_sq(w)); }

}  // namespace foldkit
