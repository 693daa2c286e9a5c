#pragma once

// Batch (column-major, one sample per column) and single-sample forward and
// backward passes shared by the autoencoder module and the kernels.

#include "hqsat/autoencoder.hpp"

#include <vector>

namespace hqsat::detail {

struct ForwardCache {
    /// act[0] is the input, act[l] the output of layer l.
    std::vector<Matrix> act;
};

Matrix forward_cols(const MlpParams& net, const Matrix& in_cols, ForwardCache* cache);

/// Adds d loss / d params into `grad` given d loss / d output. Returns
/// d loss / d input when `want_input`, an empty matrix otherwise.
Matrix backward_cols(const MlpParams& net, const ForwardCache& cache, Matrix grad_out, MlpGrad& grad,
                     bool want_input);

struct VectorCache {
    std::vector<Vector> act;
};

Vector forward_vec(const MlpParams& net, const Vector& x, VectorCache* cache);
Vector backward_vec(const MlpParams& net, const VectorCache& cache, Vector grad_out, MlpGrad& grad);

}  // namespace hqsat::detail
