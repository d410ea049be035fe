#include "gemm.hpp"

#include <algorithm>
#include <cstring>

namespace lddr::detail {

namespace {

using v8 = double __attribute__((vector_size(64)));

constexpr int kMr = 6;    // rows per micro tile
constexpr int kNr = kPanelWidth;
constexpr int kKc = 256;  // depth block; fixed, so accumulation order is too
constexpr int kMc = 192;  // rows per cache block

inline v8 load(const double* p) {
  v8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(double* p, v8 v) { std::memcpy(p, &v, sizeof v); }

// c[r][0..15] (+)= sum over kk of a[kk][r] * b[kk][0..15], kk ascending.
// `a` is a packed micro panel: kc steps of kMr values.
inline void micro_tile(const double* a, const double* b, int kc, double* c, int ldc,
                       bool accumulate) {
  v8 acc[kMr][2];
  for (int r = 0; r < kMr; ++r) {
    if (accumulate) {
      acc[r][0] = load(c + r * ldc);
      acc[r][1] = load(c + r * ldc + 8);
    } else {
      acc[r][0] = v8{};
      acc[r][1] = v8{};
    }
  }
  for (int kk = 0; kk < kc; ++kk) {
    const v8 b0 = load(b + kk * kNr);
    const v8 b1 = load(b + kk * kNr + 8);
#pragma GCC unroll 6
    for (int r = 0; r < kMr; ++r) {
      const double s = a[kk * kMr + r];
      acc[r][0] += s * b0;
      acc[r][1] += s * b1;
    }
  }
  for (int r = 0; r < kMr; ++r) {
    store(c + r * ldc, acc[r][0]);
    store(c + r * ldc + 8, acc[r][1]);
  }
}

// Packs rows [i0, i1) x columns [k0, k0 + kc) of A into kMr-row micro panels,
// zero-padding the last one.
void pack_rows(const double* a, int lda, int i0, int i1, int k0, int kc, double* out) {
  for (int i = i0; i < i1; i += kMr) {
    const int rows = std::min(kMr, i1 - i);
    for (int r = 0; r < kMr; ++r) {
      if (r < rows) {
        const double* src = a + static_cast<std::size_t>(i + r) * lda + k0;
        for (int kk = 0; kk < kc; ++kk) out[kk * kMr + r] = src[kk];
      } else {
        for (int kk = 0; kk < kc; ++kk) out[kk * kMr + r] = 0.0;
      }
    }
    out += static_cast<std::size_t>(kc) * kMr;
  }
}

}  // namespace

std::vector<double> pack_panels(const double* b, int k, int n, int ldb) {
  const int panels = (n + kNr - 1) / kNr;
  std::vector<double> p(static_cast<std::size_t>(panels) * k * kNr, 0.0);
  for (int q = 0; q < panels; ++q) {
    double* dst = p.data() + static_cast<std::size_t>(q) * k * kNr;
    const int cols = std::min(kNr, n - q * kNr);
    for (int kk = 0; kk < k; ++kk) {
      std::copy_n(b + static_cast<std::size_t>(kk) * ldb + q * kNr, cols, dst + kk * kNr);
    }
  }
  return p;
}

void gemm(const double* a, int m, int lda, const double* panels, int k, int n, double* c,
          int ldc) {
  const int panel_count = (n + kNr - 1) / kNr;
  std::vector<double> a_block(static_cast<std::size_t>(kMc) * kKc);
  double c_tile[kMr * kNr];

  for (int k0 = 0; k0 < k; k0 += kKc) {
    const int kc = std::min(kKc, k - k0);
    const bool accumulate = k0 > 0;
    for (int i0 = 0; i0 < m; i0 += kMc) {
      const int i1 = std::min(m, i0 + kMc);
      pack_rows(a, lda, i0, i1, k0, kc, a_block.data());
      for (int q = 0; q < panel_count; ++q) {
        const double* bp = panels + (static_cast<std::size_t>(q) * k + k0) * kNr;
        const int cols = std::min(kNr, n - q * kNr);
        const double* ap = a_block.data();
        for (int i = i0; i < i1; i += kMr, ap += static_cast<std::size_t>(kc) * kMr) {
          const int rows = std::min(kMr, i1 - i);
          double* ct = c + static_cast<std::size_t>(i) * ldc + q * kNr;
          if (rows == kMr && cols == kNr) {
            micro_tile(ap, bp, kc, ct, ldc, accumulate);
            continue;
          }
          // Ragged tile: same micro kernel through a scratch tile.
          std::fill(c_tile, c_tile + kMr * kNr, 0.0);
          if (accumulate) {
            for (int r = 0; r < rows; ++r) {
              std::copy_n(ct + static_cast<std::size_t>(r) * ldc, cols, c_tile + r * kNr);
            }
          }
          micro_tile(ap, bp, kc, c_tile, kNr, accumulate);
          for (int r = 0; r < rows; ++r) {
            std::copy_n(c_tile + r * kNr, cols, ct + static_cast<std::size_t>(r) * ldc);
          }
        }
      }
    }
  }
}

}  // namespace lddr::detail
