#include "geomopt/recon.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#if defined(__AVX2__) || defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "geomopt/parallel.hpp"

namespace geomopt {

namespace {

constexpr int kLanes = 8;

std::size_t fft_length(int n) {
  std::size_t len = 1;
  while (len < static_cast<std::size_t>(2 * n - 1)) len <<= 1;
  return len;
}

void check_stack(const ProjectionMatrixStack& P, const ScanGeometry& geom) {
  if (P.size() != static_cast<std::size_t>(geom.num_projections))
    throw ShapeError("projection stack has " + std::to_string(P.size()) + " views, sinogram has " +
                     std::to_string(geom.num_projections));
}

std::vector<double> pixel_centres(const GridSpec& grid) {
  std::vector<double> c(static_cast<std::size_t>(grid.size));
  for (int j = 0; j < grid.size; ++j) c[static_cast<std::size_t>(j)] = (j - 0.5 * (grid.size - 1)) * grid.spacing;
  return c;
}

// One view's affine ray parameters along an image row: s = a0 x + s_row,
// w = b0 x + w_row, u = s / w.
struct RowLine {
  double a0, s_row, b0, w_row;
};

struct DetectorRow {
  const double* values;
  double u_max;
  double d_si2;
};

struct Sample {
  double inv, u, f0, slope, frac;
  bool inside;
};

inline Sample sample_scalar(const RowLine& line, const DetectorRow& det, double x) {
  const double s = line.a0 * x + line.s_row;
  const double w = line.b0 * x + line.w_row;
  const bool front = w > 0.0;
  Sample out;
  out.inv = 1.0 / (front ? w : 1.0);
  out.u = s * out.inv;
  out.inside = front && out.u >= 0.0 && out.u <= det.u_max;
  const double uc = std::clamp(out.u, 0.0, det.u_max);
  const int k = static_cast<int>(std::min(uc, det.u_max - 1.0));
  out.frac = uc - k;
  out.f0 = det.values[k];
  out.slope = det.values[k + 1] - out.f0;
  return out;
}

void backproject_row_scalar(const RowLine& line, const DetectorRow& det, const double* xs, int begin, int end,
                            double* acc) {
  for (int j = begin; j < end; ++j) {
    const Sample t = sample_scalar(line, det, xs[j]);
    if (t.inside) acc[j] += det.d_si2 * t.inv * t.inv * (t.f0 + t.frac * t.slope);
  }
}

// Partial sums of alpha * x, alpha, beta * x, beta in kLanes interleaved lanes.
struct LaneSums {
  alignas(64) double ax[kLanes] = {};
  alignas(64) double a1[kLanes] = {};
  alignas(64) double bx[kLanes] = {};
  alignas(64) double b1[kLanes] = {};
};

void vjp_row_scalar(const RowLine& line, const DetectorRow& det, const double* xs, const double* cot, int begin,
                    int end, LaneSums& sums) {
  for (int j = begin; j < end; ++j) {
    const Sample t = sample_scalar(line, det, xs[j]);
    if (!t.inside) continue;
    const double x = xs[j];
    const double c = cot[j];
    const double weight = det.d_si2 * t.inv * t.inv;
    const double alpha = c * weight * t.slope * t.inv;
    const double beta = -alpha * t.u - 2.0 * c * (t.f0 + t.frac * t.slope) * weight * t.inv;
    const int l = j % kLanes;
    sums.ax[l] += alpha * x;
    sums.a1[l] += alpha;
    sums.bx[l] += beta * x;
    sums.b1[l] += beta;
  }
}

#if defined(__AVX512F__)

constexpr int kVector = 8;

// Returns the number of leading pixels handled; the caller finishes the tail.
int backproject_row_simd(const RowLine& line, const DetectorRow& det, const double* xs, int n, double* acc) {
  const __m512d zero = _mm512_setzero_pd();
  const __m512d one = _mm512_set1_pd(1.0);
  const __m512d u_max = _mm512_set1_pd(det.u_max);
  const __m512d k_max = _mm512_set1_pd(det.u_max - 1.0);
  const __m512d d_si2 = _mm512_set1_pd(det.d_si2);
  const __m512d a0 = _mm512_set1_pd(line.a0), s_row = _mm512_set1_pd(line.s_row);
  const __m512d b0 = _mm512_set1_pd(line.b0), w_row = _mm512_set1_pd(line.w_row);
  int j = 0;
  for (; j + kVector <= n; j += kVector) {
    const __m512d x = _mm512_loadu_pd(xs + j);
    const __m512d s = _mm512_fmadd_pd(a0, x, s_row);
    const __m512d w = _mm512_fmadd_pd(b0, x, w_row);
    const __mmask8 front = _mm512_cmp_pd_mask(w, zero, _CMP_GT_OQ);
    const __m512d inv = _mm512_div_pd(one, _mm512_mask_blend_pd(front, one, w));
    const __m512d u = _mm512_mul_pd(s, inv);
    const __mmask8 inside =
        front & _mm512_cmp_pd_mask(u, zero, _CMP_GE_OQ) & _mm512_cmp_pd_mask(u, u_max, _CMP_LE_OQ);
    const __m512d uc = _mm512_min_pd(_mm512_max_pd(u, zero), u_max);
    const __m256i k = _mm512_cvttpd_epi32(_mm512_min_pd(uc, k_max));
    const __m512d f0 = _mm512_i32gather_pd(k, det.values, 8);
    const __m512d f1 = _mm512_i32gather_pd(k, det.values + 1, 8);
    const __m512d frac = _mm512_sub_pd(uc, _mm512_cvtepi32_pd(k));
    const __m512d q = _mm512_fmadd_pd(frac, _mm512_sub_pd(f1, f0), f0);
    const __m512d value = _mm512_mul_pd(_mm512_mul_pd(d_si2, _mm512_mul_pd(inv, inv)), q);
    const __m512d old = _mm512_loadu_pd(acc + j);
    _mm512_storeu_pd(acc + j, _mm512_mask_add_pd(old, inside, old, value));
  }
  return j;
}

int vjp_row_simd(const RowLine& line, const DetectorRow& det, const double* xs, const double* cot, int n,
                 LaneSums& sums) {
  const __m512d zero = _mm512_setzero_pd();
  const __m512d one = _mm512_set1_pd(1.0);
  const __m512d two = _mm512_set1_pd(2.0);
  const __m512d u_max = _mm512_set1_pd(det.u_max);
  const __m512d k_max = _mm512_set1_pd(det.u_max - 1.0);
  const __m512d d_si2 = _mm512_set1_pd(det.d_si2);
  const __m512d a0 = _mm512_set1_pd(line.a0), s_row = _mm512_set1_pd(line.s_row);
  const __m512d b0 = _mm512_set1_pd(line.b0), w_row = _mm512_set1_pd(line.w_row);
  __m512d ax = _mm512_load_pd(sums.ax), a1 = _mm512_load_pd(sums.a1);
  __m512d bx = _mm512_load_pd(sums.bx), b1 = _mm512_load_pd(sums.b1);
  int j = 0;
  for (; j + kVector <= n; j += kVector) {
    const __m512d x = _mm512_loadu_pd(xs + j);
    const __m512d s = _mm512_fmadd_pd(a0, x, s_row);
    const __m512d w = _mm512_fmadd_pd(b0, x, w_row);
    const __mmask8 front = _mm512_cmp_pd_mask(w, zero, _CMP_GT_OQ);
    const __m512d inv = _mm512_div_pd(one, _mm512_mask_blend_pd(front, one, w));
    const __m512d u = _mm512_mul_pd(s, inv);
    const __mmask8 inside =
        front & _mm512_cmp_pd_mask(u, zero, _CMP_GE_OQ) & _mm512_cmp_pd_mask(u, u_max, _CMP_LE_OQ);
    const __m512d uc = _mm512_min_pd(_mm512_max_pd(u, zero), u_max);
    const __m256i k = _mm512_cvttpd_epi32(_mm512_min_pd(uc, k_max));
    const __m512d f0 = _mm512_i32gather_pd(k, det.values, 8);
    const __m512d f1 = _mm512_i32gather_pd(k, det.values + 1, 8);
    const __m512d slope = _mm512_sub_pd(f1, f0);
    const __m512d frac = _mm512_sub_pd(uc, _mm512_cvtepi32_pd(k));
    const __m512d q = _mm512_fmadd_pd(frac, slope, f0);
    const __m512d c = _mm512_loadu_pd(cot + j);
    const __m512d weight = _mm512_mul_pd(d_si2, _mm512_mul_pd(inv, inv));
    const __m512d cw_inv = _mm512_mul_pd(_mm512_mul_pd(c, weight), inv);
    const __m512d alpha = _mm512_mul_pd(cw_inv, slope);
    const __m512d beta = _mm512_sub_pd(_mm512_sub_pd(zero, _mm512_mul_pd(alpha, u)),
                                       _mm512_mul_pd(two, _mm512_mul_pd(cw_inv, q)));
    ax = _mm512_mask_add_pd(ax, inside, ax, _mm512_mul_pd(alpha, x));
    a1 = _mm512_mask_add_pd(a1, inside, a1, alpha);
    bx = _mm512_mask_add_pd(bx, inside, bx, _mm512_mul_pd(beta, x));
    b1 = _mm512_mask_add_pd(b1, inside, b1, beta);
  }
  _mm512_store_pd(sums.ax, ax);
  _mm512_store_pd(sums.a1, a1);
  _mm512_store_pd(sums.bx, bx);
  _mm512_store_pd(sums.b1, b1);
  return j;
}

#elif defined(__AVX2__) && defined(__FMA__)

constexpr int kVector = 4;

int backproject_row_simd(const RowLine& line, const DetectorRow& det, const double* xs, int n, double* acc) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d u_max = _mm256_set1_pd(det.u_max);
  const __m256d k_max = _mm256_set1_pd(det.u_max - 1.0);
  const __m256d d_si2 = _mm256_set1_pd(det.d_si2);
  const __m256d a0 = _mm256_set1_pd(line.a0), s_row = _mm256_set1_pd(line.s_row);
  const __m256d b0 = _mm256_set1_pd(line.b0), w_row = _mm256_set1_pd(line.w_row);
  int j = 0;
  for (; j + kVector <= n; j += kVector) {
    const __m256d x = _mm256_loadu_pd(xs + j);
    const __m256d s = _mm256_fmadd_pd(a0, x, s_row);
    const __m256d w = _mm256_fmadd_pd(b0, x, w_row);
    const __m256d front = _mm256_cmp_pd(w, zero, _CMP_GT_OQ);
    const __m256d inv = _mm256_div_pd(one, _mm256_blendv_pd(one, w, front));
    const __m256d u = _mm256_mul_pd(s, inv);
    const __m256d inside = _mm256_and_pd(
        front, _mm256_and_pd(_mm256_cmp_pd(u, zero, _CMP_GE_OQ), _mm256_cmp_pd(u, u_max, _CMP_LE_OQ)));
    const __m256d uc = _mm256_min_pd(_mm256_max_pd(u, zero), u_max);
    const __m128i k = _mm256_cvttpd_epi32(_mm256_min_pd(uc, k_max));
    const __m256d f0 = _mm256_i32gather_pd(det.values, k, 8);
    const __m256d f1 = _mm256_i32gather_pd(det.values + 1, k, 8);
    const __m256d frac = _mm256_sub_pd(uc, _mm256_cvtepi32_pd(k));
    const __m256d q = _mm256_fmadd_pd(frac, _mm256_sub_pd(f1, f0), f0);
    const __m256d value = _mm256_mul_pd(_mm256_mul_pd(d_si2, _mm256_mul_pd(inv, inv)), q);
    _mm256_storeu_pd(acc + j, _mm256_add_pd(_mm256_loadu_pd(acc + j), _mm256_and_pd(inside, value)));
  }
  return j;
}

// Two 4-wide halves cover the kLanes lanes, so lane l still sums j = l mod 8.
int vjp_row_simd(const RowLine& line, const DetectorRow& det, const double* xs, const double* cot, int n,
                 LaneSums& sums) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d u_max = _mm256_set1_pd(det.u_max);
  const __m256d k_max = _mm256_set1_pd(det.u_max - 1.0);
  const __m256d d_si2 = _mm256_set1_pd(det.d_si2);
  const __m256d a0 = _mm256_set1_pd(line.a0), s_row = _mm256_set1_pd(line.s_row);
  const __m256d b0 = _mm256_set1_pd(line.b0), w_row = _mm256_set1_pd(line.w_row);
  __m256d ax[2], a1[2], bx[2], b1[2];
  for (int h = 0; h < 2; ++h) {
    ax[h] = _mm256_load_pd(sums.ax + 4 * h);
    a1[h] = _mm256_load_pd(sums.a1 + 4 * h);
    bx[h] = _mm256_load_pd(sums.bx + 4 * h);
    b1[h] = _mm256_load_pd(sums.b1 + 4 * h);
  }
  int j = 0;
  for (; j + kLanes <= n; j += kVector) {
    const int h = (j / kVector) % 2;
    const __m256d x = _mm256_loadu_pd(xs + j);
    const __m256d s = _mm256_fmadd_pd(a0, x, s_row);
    const __m256d w = _mm256_fmadd_pd(b0, x, w_row);
    const __m256d front = _mm256_cmp_pd(w, zero, _CMP_GT_OQ);
    const __m256d inv = _mm256_div_pd(one, _mm256_blendv_pd(one, w, front));
    const __m256d u = _mm256_mul_pd(s, inv);
    const __m256d inside = _mm256_and_pd(
        front, _mm256_and_pd(_mm256_cmp_pd(u, zero, _CMP_GE_OQ), _mm256_cmp_pd(u, u_max, _CMP_LE_OQ)));
    const __m256d uc = _mm256_min_pd(_mm256_max_pd(u, zero), u_max);
    const __m128i k = _mm256_cvttpd_epi32(_mm256_min_pd(uc, k_max));
    const __m256d f0 = _mm256_i32gather_pd(det.values, k, 8);
    const __m256d f1 = _mm256_i32gather_pd(det.values + 1, k, 8);
    const __m256d slope = _mm256_sub_pd(f1, f0);
    const __m256d frac = _mm256_sub_pd(uc, _mm256_cvtepi32_pd(k));
    const __m256d q = _mm256_fmadd_pd(frac, slope, f0);
    const __m256d c = _mm256_loadu_pd(cot + j);
    const __m256d weight = _mm256_mul_pd(d_si2, _mm256_mul_pd(inv, inv));
    const __m256d cw_inv = _mm256_mul_pd(_mm256_mul_pd(c, weight), inv);
    const __m256d alpha = _mm256_and_pd(inside, _mm256_mul_pd(cw_inv, slope));
    const __m256d beta = _mm256_and_pd(
        inside, _mm256_sub_pd(_mm256_sub_pd(zero, _mm256_mul_pd(alpha, u)), _mm256_mul_pd(two, _mm256_mul_pd(cw_inv, q))));
    ax[h] = _mm256_add_pd(ax[h], _mm256_mul_pd(alpha, x));
    a1[h] = _mm256_add_pd(a1[h], alpha);
    bx[h] = _mm256_add_pd(bx[h], _mm256_mul_pd(beta, x));
    b1[h] = _mm256_add_pd(b1[h], beta);
  }
  for (int h = 0; h < 2; ++h) {
    _mm256_store_pd(sums.ax + 4 * h, ax[h]);
    _mm256_store_pd(sums.a1 + 4 * h, a1[h]);
    _mm256_store_pd(sums.bx + 4 * h, bx[h]);
    _mm256_store_pd(sums.b1 + 4 * h, b1[h]);
  }
  return j;
}

#else

int backproject_row_simd(const RowLine&, const DetectorRow&, const double*, int, double*) { return 0; }
int vjp_row_simd(const RowLine&, const DetectorRow&, const double*, const double*, int, LaneSums&) { return 0; }

#endif

}  // namespace

Eigen::VectorXd ram_lak_kernel(int n, double spacing) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(2 * n - 1);
  const double inv_d2 = 1.0 / (spacing * spacing);
  for (int k = -(n - 1); k <= n - 1; ++k) {
    double value = 0.0;
    if (k == 0) {
      value = 0.25 * inv_d2;
    } else if (k % 2 != 0) {
      value = -inv_d2 / (std::numbers::pi * std::numbers::pi * static_cast<double>(k) * k);
    }
    h[k + n - 1] = value;
  }
  return h;
}

FilteredSinogram weight_and_filter(const Sinogram& sino) {
  sino.geometry.validate();
  sino.validate();
  const ScanGeometry& geom = sino.geometry;
  const int n = geom.num_detector_pixels;
  const double du = geom.detector_spacing;
  const double d_sd = geom.source_detector_distance;
  const double c_u = geom.principal_point();

  std::vector<double> cos_weight(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double u = (j - c_u) * du;
    cos_weight[static_cast<std::size_t>(j)] = d_sd / std::sqrt(d_sd * d_sd + u * u);
  }

  const std::size_t len = fft_length(n);
  const Eigen::VectorXd h = ram_lak_kernel(n, du);
  std::vector<double> kernel(len, 0.0);
  for (int k = -(n - 1); k <= n - 1; ++k) {
    const auto idx = static_cast<std::size_t>((k + static_cast<long>(len)) % static_cast<long>(len));
    kernel[idx] = h[k + n - 1];
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> kernel_hat;
  fft.fwd(kernel_hat, kernel);

  FilteredSinogram out{Grid::Zero(sino.values.rows(), n), geom};
  parallel_for(static_cast<std::size_t>(sino.values.rows()), [&](std::size_t begin, std::size_t end) {
    Eigen::FFT<double> local_fft;
    std::vector<double> row(len);
    std::vector<double> filtered;
    std::vector<std::complex<double>> spectrum;
    for (std::size_t p = begin; p < end; ++p) {
      std::fill(row.begin(), row.end(), 0.0);
      for (int j = 0; j < n; ++j)
        row[static_cast<std::size_t>(j)] = sino.values(static_cast<Eigen::Index>(p), j) * cos_weight[static_cast<std::size_t>(j)];
      local_fft.fwd(spectrum, row);
      for (std::size_t k = 0; k < len; ++k) spectrum[k] *= kernel_hat[k];
      local_fft.inv(filtered, spectrum);
      for (int j = 0; j < n; ++j) out.values(static_cast<Eigen::Index>(p), j) = du * filtered[static_cast<std::size_t>(j)];
    }
  });
  return out;
}

double backprojection_scale(const ScanGeometry& geom) {
  return std::numbers::pi / geom.num_projections * geom.magnification();
}

Image backproject(const FilteredSinogram& fsino, const ProjectionMatrixStack& P, const GridSpec& grid) {
  grid.validate();
  check_stack(P, fsino.geometry);
  if (fsino.values.rows() != fsino.geometry.num_projections || fsino.values.cols() != fsino.geometry.num_detector_pixels)
    throw ShapeError("filtered sinogram does not match its geometry");

  const int n = grid.size;
  const double d_si = fsino.geometry.source_isocenter_distance;
  const double scale = backprojection_scale(fsino.geometry);
  const std::vector<double> xs = pixel_centres(grid);

  Image image = Image::zeros(grid);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
    std::vector<double> acc(static_cast<std::size_t>(n));
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const double y = xs[i];
      for (std::size_t p = 0; p < P.size(); ++p) {
        const ProjectionMatrix& M = P[p];
        const RowLine line{M(0, 0), M(0, 1) * y + M(0, 2), M(1, 0), M(1, 1) * y + M(1, 2)};
        const DetectorRow det{fsino.values.row(static_cast<Eigen::Index>(p)).data(),
                              static_cast<double>(fsino.values.cols() - 1), d_si * d_si};
        const int done = backproject_row_simd(line, det, xs.data(), n, acc.data());
        backproject_row_scalar(line, det, xs.data(), done, n, acc.data());
      }
      for (int j = 0; j < n; ++j) image.values(static_cast<Eigen::Index>(i), j) = scale * acc[static_cast<std::size_t>(j)];
    }
  });
  return image;
}

Image reconstruct(const Sinogram& sino, const ProjectionMatrixStack& P, const GridSpec& grid) {
  return backproject(weight_and_filter(sino), P, grid);
}

GeometryGradient backproject_vjp(const FilteredSinogram& fsino, const ProjectionMatrixStack& P,
                                 const Image& cotangent) {
  check_stack(P, fsino.geometry);
  if (cotangent.rows() != cotangent.cols())
    throw ShapeError("cotangent must be a square reconstruction grid");
  const GridSpec grid{static_cast<int>(cotangent.rows()), cotangent.pixel_spacing};
  grid.validate();

  const int n = grid.size;
  const double d_si = fsino.geometry.source_isocenter_distance;
  const double scale = backprojection_scale(fsino.geometry);
  const std::vector<double> xs = pixel_centres(grid);

  GeometryGradient grad = GeometryGradient::zeros(P.size());
  parallel_for(P.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const ProjectionMatrix& M = P[p];
      const DetectorRow det{fsino.values.row(static_cast<Eigen::Index>(p)).data(),
                            static_cast<double>(fsino.values.cols() - 1), d_si * d_si};
      // Row sums of alpha (row-1 coefficient) and beta (row-2 coefficient),
      // plain and x-weighted; y-weighted totals follow from the row sums.
      double g[6] = {0, 0, 0, 0, 0, 0};
      for (int i = 0; i < n; ++i) {
        const double y = xs[static_cast<std::size_t>(i)];
        const RowLine line{M(0, 0), M(0, 1) * y + M(0, 2), M(1, 0), M(1, 1) * y + M(1, 2)};
        const double* cot = cotangent.values.row(i).data();
        LaneSums sums;
        const int done = vjp_row_simd(line, det, xs.data(), cot, n, sums);
        vjp_row_scalar(line, det, xs.data(), cot, done, n, sums);
        double sax = 0.0, sa1 = 0.0, sbx = 0.0, sb1 = 0.0;
        for (int l = 0; l < kLanes; ++l) {
          sax += sums.ax[l];
          sa1 += sums.a1[l];
          sbx += sums.bx[l];
          sb1 += sums.b1[l];
        }
        g[0] += sax;
        g[1] += y * sa1;
        g[2] += sa1;
        g[3] += sbx;
        g[4] += y * sb1;
        g[5] += sb1;
      }
      ProjectionMatrix& G = grad.values[p];
      G << g[0], g[1], g[2], g[3], g[4], g[5];
      G *= scale;
    }
  });
  return grad;
}

}  // namespace geomopt
