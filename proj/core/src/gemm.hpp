#pragma once

#include <cstddef>
#include <vector>

namespace lddr::detail {

inline constexpr int kPanelWidth = 16;

/// Repacks the k x n row-major matrix `b` (leading dimension ldb) into
/// zero-padded 16-column panels: panel q holds k rows of 16 values at q * k * 16.
std::vector<double> pack_panels(const double* b, int k, int n, int ldb);

/// C (m x n, leading dimension ldc) = A (m x k, leading dimension lda) * B,
/// with B given as pack_panels output.
///
/// Every element of C is accumulated over k in ascending order by the same
/// instruction sequence whatever m is, so a row's result does not depend on
/// which other rows are computed alongside it.
void gemm(const double* a, int m, int lda, const double* panels, int k, int n, double* c,
          int ldc);

}  // namespace lddr::detail
