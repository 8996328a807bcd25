#include "cicme/hsic.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cicme/rng.hpp"

namespace cicme {

void HsicOptions::validate() const {
  if (permutations < 1) throw std::invalid_argument("HsicOptions: permutations must be >= 1");
}

double median_abs_gap(const Eigen::VectorXd& r) {
  auto n = r.size();
  if (n < 2) throw std::invalid_argument("median_abs_gap: need at least 2 values");
  std::vector<double> x(r.data(), r.data() + n);
  std::sort(x.begin(), x.end());
  double span = x.back() - x.front();
  if (span <= 0.0) return 0.0;

  // #{(i < j) : x_j - x_i <= t}, two-pointer sweep over the sorted values.
  auto count_le = [&](double t) {
    long long c = 0;
    size_t i = 0;
    for (size_t j = 0; j < x.size(); ++j) {
      while (x[j] - x[i] > t) ++i;
      c += static_cast<long long>(j - i);
    }
    return c;
  };

  long long pairs = static_cast<long long>(n) * (n - 1) / 2;
  long long k = (pairs + 1) / 2;  // lower median
  double lo = 0.0, hi = span;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (count_le(mid) >= k)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

namespace {

struct GroupIndex {
  std::vector<std::vector<int>> members;  // row indices per distinct label
  std::vector<int> label_of;              // compact label per row
  int count() const { return static_cast<int>(members.size()); }
};

GroupIndex group_rows(const Eigen::VectorXi& domain) {
  GroupIndex g;
  std::vector<int> labels(domain.data(), domain.data() + domain.size());
  std::vector<int> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  g.members.resize(distinct.size());
  g.label_of.resize(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    int c = static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), labels[i]) -
                             distinct.begin());
    g.label_of[i] = c;
    g.members[static_cast<size_t>(c)].push_back(static_cast<int>(i));
  }
  return g;
}

// Doubly centered Gaussian kernel matrix of the residuals, plus the raw
// kernel sum (needed for the null moments).
void centered_kernel(const Eigen::VectorXd& r, double sigma, Eigen::MatrixXd& kc,
                     double& raw_sum) {
  auto n = r.size();
  double inv = -1.0 / (2.0 * sigma * sigma);
  kc.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    kc.col(j) = ((r.array() - r(j)).square() * inv).exp();
  Eigen::VectorXd row_mean = kc.rowwise().mean();
  double grand_mean = row_mean.mean();
  raw_sum = grand_mean * static_cast<double>(n) * static_cast<double>(n);
  kc.colwise() -= row_mean;
  kc.rowwise() -= row_mean.transpose();
  kc.array() += grand_mean;
}

// (1/n) sum over same-domain pairs of the centered kernel — equal to
// n * HSIC_b for the delta kernel on labels.
double delta_statistic(const Eigen::MatrixXd& kc, const GroupIndex& groups) {
  double total = 0.0;
  for (const std::vector<int>& idx : groups.members) {
    for (int j : idx) {
      const double* col = kc.col(j).data();
      double s = 0.0;
      for (int i : idx) s += col[i];
      total += s;
    }
  }
  return total / static_cast<double>(kc.rows());
}

double permutation_pvalue_kc(const Eigen::MatrixXd& kc, const GroupIndex& groups,
                             double observed, int permutations, std::uint64_t seed) {
  auto n = kc.rows();
  std::vector<int> perm(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = static_cast<int>(i);
  Rng rng(seed);
  GroupIndex shuffled = groups;
  int exceed = 0;
  for (int b = 0; b < permutations; ++b) {
    for (Eigen::Index i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<size_t>(i)],
                perm[static_cast<size_t>(rng.uniform_int(0, i))]);
    for (size_t g = 0, at = 0; g < groups.members.size(); ++g)
      for (size_t s = 0; s < groups.members[g].size(); ++s, ++at)
        shuffled.members[g][s] = perm[at];
    if (delta_statistic(kc, shuffled) >= observed) ++exceed;
  }
  return (1.0 + exceed) / (permutations + 1.0);
}

// Label-major copy of the residuals so every domain is one contiguous
// segment; all the fast-path sums below run over these segments.
struct LabelSegments {
  Eigen::VectorXd r;
  std::vector<int> offset;  // G+1 bounds
  std::vector<double> share;
};

LabelSegments label_segments(const Eigen::VectorXd& residuals, const GroupIndex& groups) {
  LabelSegments ls;
  ls.r.resize(residuals.size());
  ls.offset.assign(1, 0);
  int at = 0;
  for (const std::vector<int>& idx : groups.members) {
    for (int i : idx) ls.r(at++) = residuals(i);
    ls.offset.push_back(at);
    ls.share.push_back(static_cast<double>(idx.size()) /
                       static_cast<double>(residuals.size()));
  }
  return ls;
}

struct GammaMoments {
  double statistic = 0.0, mean_h = 0.0, var_h = 0.0;
};

// Statistic and Gamma null moments from one sweep over the kernel's upper
// triangle. The centered kernel never exists in memory: doubly-centered
// block sums are rebuilt from per-block sums of K and K^2, per-row
// per-label sums, and the grand total. Scalar=float is used for large n
// (the kernel entry error ~1e-7 moves the p-value by ~1e-5, far inside
// the Gamma approximation's own error); sums accumulate in double either
// way.
template <typename Scalar>
GammaMoments triangular_moments(const LabelSegments& ls, double sigma) {
  const auto n = ls.r.size();
  const int gc = static_cast<int>(ls.share.size());
  const double nd = static_cast<double>(n);
  Eigen::Array<Scalar, Eigen::Dynamic, 1> rs = ls.r.cast<Scalar>();
  Eigen::Array<Scalar, Eigen::Dynamic, 1> buf(n);
  const Scalar inv = static_cast<Scalar>(-1.0 / (2.0 * sigma * sigma));

  // Upper-triangle accumulators; diagonal (K_jj = 1) added in closed form.
  Eigen::MatrixXd bsum = Eigen::MatrixXd::Zero(gc, gc);   // sum of K over a block
  Eigen::MatrixXd bsq = Eigen::MatrixXd::Zero(gc, gc);    // sum of K^2
  Eigen::MatrixXd rowsum = Eigen::MatrixXd::Zero(n, gc);  // per-row sum of K over one label
  for (int b = 0, j = 0; b < gc; ++b) {
    for (; j < ls.offset[static_cast<size_t>(b) + 1]; ++j) {
      if (j > 0) buf.head(j) = ((rs.head(j) - rs(j)).square() * inv).exp();
      double* rb = rowsum.col(b).data();
      for (int a = 0; a <= b; ++a) {
        int lo = ls.offset[static_cast<size_t>(a)];
        int hi = std::min(ls.offset[static_cast<size_t>(a) + 1], j);
        if (lo >= hi) continue;
        double s = 0.0, q = 0.0;
        for (int i = lo; i < hi; ++i) {
          double k = static_cast<double>(buf(i));
          s += k;
          q += k * k;
          rb[i] += k;
        }
        bsum(a, b) += s;
        bsq(a, b) += q;
        rowsum(j, a) += s;
      }
    }
  }
  std::vector<double> csize(static_cast<size_t>(gc));
  for (int a = 0; a < gc; ++a) {
    csize[static_cast<size_t>(a)] = ls.share[static_cast<size_t>(a)] * nd;
    int lo = ls.offset[static_cast<size_t>(a)], c = ls.offset[static_cast<size_t>(a) + 1] - lo;
    // Strict upper triangle covered each unordered pair once.
    bsum(a, a) = 2.0 * bsum(a, a) + c;
    bsq(a, a) = 2.0 * bsq(a, a) + c;
    rowsum.col(a).segment(lo, c).array() += 1.0;  // diagonal entries
    for (int b = a + 1; b < gc; ++b) {
      bsum(b, a) = bsum(a, b);
      bsq(b, a) = bsq(a, b);
    }
  }
  double total = bsum.sum();

  Eigen::VectorXd u = rowsum.rowwise().sum() / nd;  // row means of K
  double grand = total / (nd * nd);
  std::vector<double> psum(static_cast<size_t>(gc)), qsum(static_cast<size_t>(gc));
  for (int a = 0; a < gc; ++a) {
    int lo = ls.offset[static_cast<size_t>(a)], c = ls.offset[static_cast<size_t>(a) + 1] - lo;
    psum[static_cast<size_t>(a)] = u.segment(lo, c).sum();
    qsum[static_cast<size_t>(a)] = u.segment(lo, c).squaredNorm();
  }

  GammaMoments gm;
  for (int a = 0; a < gc; ++a) {
    double ca = csize[static_cast<size_t>(a)];
    gm.statistic += bsum(a, a) - 2.0 * ca * psum[static_cast<size_t>(a)] +
                    ca * ca * grand;
  }
  gm.statistic /= nd;

  double sum_c2 = 0.0;
  for (int a = 0; a < gc; ++a) sum_c2 += csize[static_cast<size_t>(a)] * csize[static_cast<size_t>(a)];
  double mu_x = (total - nd) / (nd * (nd - 1.0));
  double mu_y = (sum_c2 - nd) / (nd * (nd - 1.0));
  gm.mean_h = (1.0 + mu_x * mu_y - mu_x - mu_y) / nd;

  double s2sh = sum_c2 / (nd * nd);
  double prod_sum = 0.0, prod_diag = 0.0;
  for (int a = 0; a < gc; ++a) {
    int loa = ls.offset[static_cast<size_t>(a)];
    int ca_i = ls.offset[static_cast<size_t>(a) + 1] - loa;
    double ca = static_cast<double>(ca_i);
    for (int b = 0; b < gc; ++b) {
      int lob = ls.offset[static_cast<size_t>(b)];
      int cb_i = ls.offset[static_cast<size_t>(b) + 1] - lob;
      double cb = static_cast<double>(cb_i);
      double lc = (a == b ? 1.0 : 0.0) - ls.share[static_cast<size_t>(a)] -
                  ls.share[static_cast<size_t>(b)] + s2sh;
      // Sum over the block of (K_ij - u_i - u_j + grand)^2, rebuilt from
      // the sweep's accumulators.
      double cross = u.segment(loa, ca_i).dot(rowsum.col(b).segment(loa, ca_i)) +
                     u.segment(lob, cb_i).dot(rowsum.col(a).segment(lob, cb_i)) -
                     grand * bsum(a, b);
      double vterm = cb * qsum[static_cast<size_t>(a)] + ca * qsum[static_cast<size_t>(b)] +
                     2.0 * psum[static_cast<size_t>(a)] * psum[static_cast<size_t>(b)] -
                     2.0 * grand * (cb * psum[static_cast<size_t>(a)] + ca * psum[static_cast<size_t>(b)]) +
                     ca * cb * grand * grand;
      double block_c2 = bsq(a, b) - 2.0 * cross + vterm;
      prod_sum += (lc / 6.0) * (lc / 6.0) * block_c2;
    }
    double lcaa = 1.0 - 2.0 * ls.share[static_cast<size_t>(a)] + s2sh;
    for (int i = loa; i < loa + ca_i; ++i) {
      double kcd = (1.0 - 2.0 * u(i) + grand) * lcaa / 6.0;
      prod_diag += kcd * kcd;
    }
  }
  gm.var_h = 72.0 * (nd - 4.0) * (nd - 5.0) /
             (nd * (nd - 1.0) * (nd - 2.0) * (nd - 3.0)) *
             ((prod_sum - prod_diag) / (nd * (nd - 1.0)));
  return gm;
}

// Permutations need the centered kernel in memory; shared by the forced
// and degenerate-moments paths.
void dense_permutation(HsicResult& out, const Eigen::VectorXd& residuals,
                       const GroupIndex& groups, const HsicOptions& opts) {
  Eigen::MatrixXd kc;
  double raw_sum;
  centered_kernel(residuals, out.bandwidth, kc, raw_sum);
  out.statistic = delta_statistic(kc, groups);
  out.permutation_fallback = true;
  out.p_value = permutation_pvalue_kc(kc, groups, out.statistic, opts.permutations,
                                      opts.seed);
}

}  // namespace

double permutation_pvalue(const Eigen::VectorXd& residuals, const Eigen::VectorXi& domain,
                          int permutations, std::uint64_t seed) {
  if (residuals.size() != domain.size())
    throw std::invalid_argument("permutation_pvalue: size mismatch");
  if (permutations < 1) throw std::invalid_argument("permutation_pvalue: permutations >= 1");
  GroupIndex groups = group_rows(domain);
  double sigma = median_abs_gap(residuals);
  if (sigma <= 0.0) sigma = 1.0;
  Eigen::MatrixXd kc;
  double raw_sum;
  centered_kernel(residuals, sigma, kc, raw_sum);
  double observed = delta_statistic(kc, groups);
  return permutation_pvalue_kc(kc, groups, observed, permutations, seed);
}

HsicResult domain_independence_test(const Eigen::VectorXd& residuals,
                                    const Eigen::VectorXi& domain,
                                    const HsicOptions& opts) {
  opts.validate();
  auto n = residuals.size();
  if (n != domain.size())
    throw std::invalid_argument("domain_independence_test: size mismatch");
  if (n < 4) throw std::invalid_argument("domain_independence_test: need n >= 4");
  if (!residuals.allFinite())
    throw std::invalid_argument("domain_independence_test: non-finite residuals");

  GroupIndex groups = group_rows(domain);
  if (groups.count() < 2)
    throw std::invalid_argument("domain_independence_test: need at least 2 domains");

  HsicResult out;
  out.bandwidth = median_abs_gap(residuals);
  if (out.bandwidth <= 0.0) out.bandwidth = 1.0;

  if (opts.force_permutation) {
    dense_permutation(out, residuals, groups, opts);
    return out;
  }

  LabelSegments ls = label_segments(residuals, groups);
  GammaMoments gm = n >= 512 ? triangular_moments<float>(ls, out.bandwidth)
                             : triangular_moments<double>(ls, out.bandwidth);
  out.statistic = gm.statistic;

  bool moments_ok = std::isfinite(gm.mean_h) && std::isfinite(gm.var_h) &&
                    gm.mean_h > 0.0 && gm.var_h > 0.0;
  if (!moments_ok) {
    dense_permutation(out, residuals, groups, opts);
    return out;
  }

  double nd = static_cast<double>(n);
  double shape = gm.mean_h * gm.mean_h / gm.var_h;
  double scale = nd * gm.var_h / gm.mean_h;  // statistic lives on the n * HSIC_b scale
  double arg = out.statistic / scale;
  if (!(arg >= 0.0) || !std::isfinite(arg) || !std::isfinite(shape) || shape <= 0.0) {
    dense_permutation(out, residuals, groups, opts);
    return out;
  }
  out.p_value = boost::math::gamma_q(shape, arg);
  return out;
}

std::vector<int> StabilityReport::stable_set() const {
  std::vector<int> s;
  for (size_t j = 0; j < variables.size(); ++j)
    if (variables[j].stable) s.push_back(static_cast<int>(j));
  return s;
}

StabilityReport detect_stable(const ModelSet& models, const Eigen::MatrixXd& pooled_x,
                              const Eigen::VectorXi& domain, double alpha,
                              const HsicOptions& opts) {
  models.config.validate();
  if (models.models.empty()) throw std::invalid_argument("detect_stable: empty model set");
  if (pooled_x.rows() != domain.size())
    throw std::invalid_argument("detect_stable: row/domain size mismatch");
  if (pooled_x.cols() != models.dim())
    throw std::invalid_argument("detect_stable: dimension mismatch");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("detect_stable: alpha must be in (0,1)");

  StabilityReport report;
  report.alpha = alpha;
  report.variables.resize(static_cast<size_t>(models.dim()));
  for (int j = 0; j < models.dim(); ++j) {
    VariableDecision& dec = report.variables[static_cast<size_t>(j)];
    // One broken model taints its own variable, not the whole report.
    try {
      models.models[static_cast<size_t>(j)].validate();
      Eigen::VectorXd residual = pooled_x.col(j) - mlp_forward(models.models[j], pooled_x);
      HsicOptions per = opts;
      per.seed = derive_seed(opts.seed, {seed_path::hsic_perm, static_cast<std::uint64_t>(j)});
      HsicResult res = domain_independence_test(residual, domain, per);
      dec.statistic = res.statistic;
      dec.p_value = res.p_value;
      dec.bandwidth = res.bandwidth;
      dec.permutation_fallback = res.permutation_fallback;
      dec.stable = res.p_value > alpha;
    } catch (const std::exception& e) {
      dec.error = e.what();
      dec.stable = false;
    }
  }
  return report;
}

}  // namespace cicme
