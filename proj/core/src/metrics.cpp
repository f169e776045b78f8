#include "gradinv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gradinv {

double mse(const NDArray& x, const NDArray& y) {
  if (x.shape() != y.shape())
    throw std::invalid_argument("mse: shape mismatch " + shape_str(x.shape()) + " vs " +
                                shape_str(y.shape()));
  if (x.numel() == 0) throw std::invalid_argument("mse: empty input");
  double acc = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    double d = x[i] - y[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.numel());
}

double psnr(const NDArray& x, const NDArray& y, double max_i) {
  if (!(max_i > 0.0)) throw std::invalid_argument("psnr: max_i must be > 0");
  double m = mse(x, y);
  if (m == 0.0) return 100.0;  // documented cap for identical images
  return 20.0 * std::log10(max_i / std::sqrt(m));
}

namespace {

std::vector<double> gaussian_window(int64_t size, double sigma) {
  std::vector<double> w(static_cast<size_t>(size * size));
  double c = static_cast<double>(size - 1) / 2.0;
  double acc = 0.0;
  for (int64_t i = 0; i < size; ++i)
    for (int64_t j = 0; j < size; ++j) {
      double di = static_cast<double>(i) - c;
      double dj = static_cast<double>(j) - c;
      double v = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      w[static_cast<size_t>(i * size + j)] = v;
      acc += v;
    }
  for (double& v : w) v /= acc;
  return w;
}

}  // namespace

double ssim(const NDArray& x, const NDArray& y, const SsimParams& params) {
  if (x.shape() != y.shape())
    throw std::invalid_argument("ssim: shape mismatch");
  if (x.rank() != 3) throw std::invalid_argument("ssim: expected [C,H,W]");
  int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  int64_t win = std::min<int64_t>(params.window, std::min(h, w));
  if (win % 2 == 0) --win;  // keep the window odd
  if (win < 1) throw std::invalid_argument("ssim: image too small for any window");

  std::vector<double> g = gaussian_window(win, params.sigma);
  double c1 = params.k1 * params.max_i;
  c1 *= c1;
  double c2 = params.k2 * params.max_i;
  c2 *= c2;

  double acc = 0.0;
  int64_t count = 0;
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* xc = x.data() + ch * h * w;
    const double* yc = y.data() + ch * h * w;
    for (int64_t i = 0; i + win <= h; ++i)
      for (int64_t j = 0; j + win <= w; ++j) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int64_t u = 0; u < win; ++u)
          for (int64_t v = 0; v < win; ++v) {
            double gw = g[static_cast<size_t>(u * win + v)];
            double xv = xc[(i + u) * w + (j + v)];
            double yv = yc[(i + u) * w + (j + v)];
            mx += gw * xv;
            my += gw * yv;
            mxx += gw * xv * xv;
            myy += gw * yv * yv;
            mxy += gw * xv * yv;
          }
        double vx = mxx - mx * mx;
        double vy = myy - my * my;
        double cov = mxy - mx * my;
        double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        double den = (mx * mx + my * my + c1) * (vx + vy + c2);
        acc += num / den;
        ++count;
      }
  }
  return acc / static_cast<double>(count);
}

MetricReport batch_match_metrics(const ImageBatch& recon, const ImageBatch& original,
                                 double max_i) {
  if (recon.data.shape() != original.data.shape())
    throw std::invalid_argument("batch_match_metrics: batch shapes differ");
  int64_t b = recon.batch();
  if (b < 1) throw std::invalid_argument("batch_match_metrics: empty batch");
  if (b > 20) throw std::invalid_argument("batch_match_metrics: batch too large for exact matching");

  std::vector<NDArray> rs, os;
  for (int64_t i = 0; i < b; ++i) {
    rs.push_back(recon.slot(i));
    os.push_back(original.slot(i));
  }
  std::vector<double> score(static_cast<size_t>(b * b));
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < b; ++j)
      score[static_cast<size_t>(i * b + j)] = psnr(rs[static_cast<size_t>(i)],
                                                   os[static_cast<size_t>(j)], max_i);

  // Exact assignment: dp over subsets of original slots; recon slot i is the
  // popcount of the mask being extended.
  size_t full = static_cast<size_t>(1) << b;
  std::vector<double> dp(full, -1e300);
  std::vector<int8_t> choice(full * static_cast<size_t>(b), -1);
  dp[0] = 0.0;
  for (size_t mask = 0; mask < full; ++mask) {
    if (dp[mask] <= -1e300) continue;
    int64_t i = static_cast<int64_t>(__builtin_popcountll(mask));
    if (i >= b) continue;
    for (int64_t j = 0; j < b; ++j) {
      if (mask & (static_cast<size_t>(1) << j)) continue;
      size_t next = mask | (static_cast<size_t>(1) << j);
      double cand = dp[mask] + score[static_cast<size_t>(i * b + j)];
      if (cand > dp[next]) {
        dp[next] = cand;
        choice[next * static_cast<size_t>(b) + static_cast<size_t>(i)] = static_cast<int8_t>(j);
      }
    }
  }

  // Recover the permutation by walking masks backwards.
  std::vector<int64_t> match(static_cast<size_t>(b), -1);
  size_t mask = full - 1;
  for (int64_t i = b - 1; i >= 0; --i) {
    int8_t j = choice[mask * static_cast<size_t>(b) + static_cast<size_t>(i)];
    match[static_cast<size_t>(i)] = j;
    mask &= ~(static_cast<size_t>(1) << j);
  }

  MetricReport rep;
  double psum = 0.0, ssum = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    int64_t j = match[static_cast<size_t>(i)];
    MetricReport::PerImage pi;
    pi.slot = i;
    pi.matched_slot = j;
    pi.psnr_db = score[static_cast<size_t>(i * b + j)];
    pi.ssim = ssim(rs[static_cast<size_t>(i)], os[static_cast<size_t>(j)],
                   SsimParams{.max_i = max_i});
    psum += pi.psnr_db;
    ssum += pi.ssim;
    rep.per_image.push_back(pi);
  }
  rep.mean_psnr_db = psum / static_cast<double>(b);
  rep.mean_ssim = ssum / static_cast<double>(b);
  return rep;
}

}  // namespace gradinv
