#include "exflow/field.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace exflow {

namespace {
inline double dot(Cx a, Cx b) { return a.real() * b.real() + a.imag() * b.imag(); }
}  // namespace

double VortexBlobs::total_strength() const {
  double s = 0.0;
  for (double g : strengths) s += g;
  return s;
}

double VortexBlobs::l1_strength() const {
  double s = 0.0;
  for (double g : strengths) s += std::abs(g);
  return s;
}

// ---------------------------------------------------------------------------
// HarmonicExpansion

bool HarmonicExpansion::empty() const {
  for (double d : log_strengths)
    if (d != 0.0) return false;
  for (const auto& c : coeffs)
    for (const Cx& v : c)
      if (v != Cx(0, 0)) return false;
  return constant == 0.0;
}

double HarmonicExpansion::value(Cx x) const {
  double psi = constant;
  if (!maps) return psi;
  for (std::size_t l = 0; l < maps->size(); ++l) {
    const Cx w = (*maps)[l].evaluate(x);
    if (log_strengths.size() > l && log_strengths[l] != 0.0)
      psi += log_strengths[l] / kTwoPi * std::log(std::abs(w));
    if (coeffs.size() > l && !coeffs[l].empty()) {
      const Cx iw = 1.0 / w;
      Cx s(0, 0);
      for (std::size_t m = coeffs[l].size(); m-- > 0;) s = (s + coeffs[l][m]) * iw;
      psi += s.real();
    }
  }
  return psi;
}

Cx HarmonicExpansion::gradient(Cx x) const {
  if (!maps) return Cx(0, 0);
  Cx fprime(0, 0);
  for (std::size_t l = 0; l < maps->size(); ++l) {
    const bool has_log = log_strengths.size() > l && log_strengths[l] != 0.0;
    const bool has_coeffs = coeffs.size() > l && !coeffs[l].empty();
    if (!has_log && !has_coeffs) continue;
    const Cx w = (*maps)[l].evaluate(x);
    const Cx wp = (*maps)[l].derivative(x);
    if (has_log) fprime += log_strengths[l] / kTwoPi * wp / w;
    if (has_coeffs) {
      const Cx iw = 1.0 / w;
      Cx ds(0, 0);  // sum -m c_m w^{-m-1}
      for (std::size_t m = coeffs[l].size(); m-- > 0;)
        ds = (ds - (static_cast<double>(m) + 1.0) * coeffs[l][m]) * iw;
      fprime += ds * iw * wp;
    }
  }
  return std::conj(fprime);
}

Cx HarmonicExpansion::gradient_prepared(const Cx* w, const Cx* dw) const {
  if (!maps) return Cx(0, 0);
  Cx fprime(0, 0);
  for (std::size_t l = 0; l < maps->size(); ++l) {
    if (log_strengths.size() > l && log_strengths[l] != 0.0)
      fprime += log_strengths[l] / kTwoPi * dw[l] / w[l];
    if (coeffs.size() > l && !coeffs[l].empty()) {
      const Cx iw = 1.0 / w[l];
      Cx ds(0, 0);
      for (std::size_t m = coeffs[l].size(); m-- > 0;)
        ds = (ds - (static_cast<double>(m) + 1.0) * coeffs[l][m]) * iw;
      fprime += ds * iw * dw[l];
    }
  }
  return std::conj(fprime);
}

// ---------------------------------------------------------------------------
// Kernel

KernelImages KernelImages::build(const ExteriorMap& map, const VortexBlobs& blobs) {
  KernelImages img;
  const std::size_t j = blobs.size();
  img.w.resize(j);
  img.w_star.resize(j);
  img.rho2.resize(j);
  img.log_abs_w.resize(j);
  for (std::size_t i = 0; i < j; ++i) {
    const Cx w = map.evaluate(blobs.positions[i]);
    img.w[i] = w;
    img.w_star[i] = w / abs2(w);
    img.rho2[i] = sq(blobs.core) * abs2(map.derivative(blobs.positions[i]));
    img.log_abs_w[i] = std::log(std::abs(w));
  }
  return img;
}

double kernel_psi0_cached(const ExteriorMap& map, const KernelImages& img,
                          const std::vector<double>& strengths, Cx x) {
  bool any = false;
  for (double g : strengths) any = any || g != 0.0;
  if (!any) return 0.0;
  const Cx w = map.evaluate(x);
  double psi = 0.0;
  for (std::size_t j = 0; j < strengths.size(); ++j) {
    if (strengths[j] == 0.0) continue;
    const double direct2 = std::max(abs2(w - img.w[j]), img.rho2[j]);
    const double image2 = std::max(abs2(w - img.w_star[j]), 1e-30);
    psi += strengths[j] * (0.5 * std::log(direct2) - 0.5 * std::log(image2) - img.log_abs_w[j]);
  }
  return psi / kTwoPi;
}

Cx kernel_grad_prepared(Cx w, Cx dw, const KernelImages& img,
                        const std::vector<double>& strengths) {
  Cx sum(0, 0);
  for (std::size_t j = 0; j < strengths.size(); ++j) {
    if (strengths[j] == 0.0) continue;
    const Cx dd = w - img.w[j];
    const Cx di = w - img.w_star[j];
    sum += strengths[j] * (std::conj(dd) / std::max(abs2(dd), img.rho2[j]) -
                           std::conj(di) / std::max(abs2(di), 1e-30));
  }
  return std::conj(dw * sum / kTwoPi);
}

Cx kernel_grad_cached(const ExteriorMap& map, const KernelImages& img,
                      const std::vector<double>& strengths, Cx x) {
  bool any = false;
  for (double g : strengths) any = any || g != 0.0;
  if (!any) return Cx(0, 0);
  return kernel_grad_prepared(map.evaluate(x), map.derivative(x), img, strengths);
}

double kernel_psi0_single(const ExteriorMap& map, const VortexBlobs& blobs, Cx x) {
  if (std::abs(map.evaluate(x)) <= 1.0)
    throw std::invalid_argument("kernel evaluation point is inside the obstacle");
  return kernel_psi0_cached(map, KernelImages::build(map, blobs), blobs.strengths, x);
}

Cx kernel_grad_single(const ExteriorMap& map, const VortexBlobs& blobs, Cx x) {
  if (std::abs(map.evaluate(x)) <= 1.0)
    throw std::invalid_argument("kernel evaluation point is inside the obstacle");
  return kernel_grad_cached(map, KernelImages::build(map, blobs), blobs.strengths, x);
}

double harmonic_psi_single(const ExteriorMap& map, Cx x) {
  const Cx w = map.evaluate(x);
  if (std::abs(w) <= 1.0)
    throw std::invalid_argument("evaluation point is inside the obstacle");
  return std::log(std::abs(w)) / kTwoPi;
}

Cx harmonic_grad_single(const ExteriorMap& map, Cx x) {
  const Cx w = map.evaluate(x);
  if (std::abs(w) <= 1.0)
    throw std::invalid_argument("evaluation point is inside the obstacle");
  return std::conj(map.derivative(x) / w) / kTwoPi;
}

// ---------------------------------------------------------------------------
// Collocation assembly shared by the harmonic and correction solvers.

namespace {

struct Collocation {
  Eigen::MatrixXd basis;   // rows x 2*k*degree: Re/Im of T_l(x)^-m
  Eigen::MatrixXd logs;    // rows x k: (1/2pi) ln |T_l(x)|
  std::vector<int> curve_of_row;
  std::vector<Cx> row_point;
  int k = 0, degree = 0;
};

Collocation assemble(const DomainApproximation& approx,
                     const std::vector<ExteriorMap>& maps, int degree) {
  Collocation c;
  c.k = static_cast<int>(approx.curves.size());
  c.degree = degree;
  std::size_t rows = 0;
  for (const auto& cv : approx.curves) rows += cv.size();
  c.basis.resize(rows, static_cast<Eigen::Index>(2) * c.k * degree);
  c.logs.resize(rows, c.k);
  c.curve_of_row.reserve(rows);
  c.row_point.reserve(rows);
  std::size_t r = 0;
  for (int j = 0; j < c.k; ++j) {
    for (const Cx& x : approx.curves[j].points) {
      for (int l = 0; l < c.k; ++l) {
        const Cx w = maps[l].evaluate(x);
        c.logs(r, l) = std::log(std::abs(w)) / kTwoPi;
        const Cx iw = 1.0 / w;
        Cx pw(1, 0);
        for (int m = 1; m <= degree; ++m) {
          pw *= iw;
          c.basis(r, 2 * (l * degree + m - 1)) = pw.real();
          c.basis(r, 2 * (l * degree + m - 1) + 1) = -pw.imag();
        }
      }
      c.curve_of_row.push_back(j);
      c.row_point.push_back(x);
      ++r;
    }
  }
  return c;
}

struct ScaledQr {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  Eigen::VectorXd col_scale;

  void factor(Eigen::MatrixXd a, double separation) {
    col_scale.resize(a.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      col_scale(c) = a.col(c).norm();
      if (col_scale(c) == 0.0) col_scale(c) = 1.0;
      a.col(c) /= col_scale(c);
    }
    qr.compute(a);
    const auto& rd = qr.matrixR().diagonal();
    const double cond = std::abs(rd(0)) / std::max(1e-300, std::abs(rd(rd.size() - 1)));
    if (cond > 1e14) {
      std::ostringstream os;
      os << "collocation system ill conditioned (condition estimate " << cond
         << ", obstacle separation " << separation << ")";
      throw std::runtime_error(os.str());
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = qr.solve(b);
    for (Eigen::Index c = 0; c < x.size(); ++c) x(c) /= col_scale(c);
    return x;
  }
};

void unpack_coeffs(const Eigen::VectorXd& x, int k, int degree, HarmonicExpansion& out) {
  out.coeffs.assign(k, {});
  for (int l = 0; l < k; ++l) {
    out.coeffs[l].resize(degree);
    for (int m = 0; m < degree; ++m)
      out.coeffs[l][m] = Cx(x(2 * (l * degree + m)), x(2 * (l * degree + m) + 1));
  }
}

}  // namespace

HarmonicExpansion solve_harmonic_multi(const DomainApproximation& approx, int i,
                                       std::shared_ptr<const std::vector<ExteriorMap>> maps,
                                       int degree) {
  const int k = static_cast<int>(approx.curves.size());
  if (i < 0 || i >= k) throw std::invalid_argument("obstacle index out of range");
  const Collocation c = assemble(approx, *maps, degree);
  const Eigen::Index rows = c.basis.rows();
  const int nb = 2 * k * degree;
  // Unknowns: basis coefficients, the additive constant, then C^{i,j} for the
  // k-1 other boundaries. The carrier (1/2pi) ln|T_i| fixes the circulations.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, nb + 1 + (k - 1));
  a.leftCols(nb) = c.basis;
  a.col(nb).setOnes();
  Eigen::VectorXd b = -c.logs.col(i);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int j = c.curve_of_row[r];
    if (j != i) {
      const int slot = j < i ? j : j - 1;
      a(r, nb + 1 + slot) = -1.0;
    }
  }
  ScaledQr qr;
  qr.factor(std::move(a), approx.pairwise_separation);
  const Eigen::VectorXd x = qr.solve(b);

  HarmonicExpansion out;
  out.maps = std::move(maps);
  out.owner = i;
  out.log_strengths.assign(k, 0.0);
  out.log_strengths[i] = 1.0;
  unpack_coeffs(x, k, degree, out);
  out.constant = x(nb);
  out.boundary_constants.assign(k, 0.0);
  for (int j = 0; j < k; ++j)
    if (j != i) out.boundary_constants[j] = x(nb + 1 + (j < i ? j : j - 1));

  double res = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int j = c.curve_of_row[r];
    const double target = j == i ? 0.0 : out.boundary_constants[j];
    res = std::max(res, std::abs(out.value(c.row_point[r]) - target));
  }
  out.fit_residual = res;
  return out;
}

// ---------------------------------------------------------------------------
// CorrectionSolver

struct CorrectionSolver::Impl {
  std::shared_ptr<const std::vector<ExteriorMap>> maps;
  Collocation colloc;
  ScaledQr qr;
  int k = 0, degree = 0;
};

CorrectionSolver::CorrectionSolver(const DomainApproximation& approx,
                                   std::shared_ptr<const std::vector<ExteriorMap>> maps,
                                   int degree)
    : impl_(new Impl) {
  impl_->maps = std::move(maps);
  impl_->k = static_cast<int>(approx.curves.size());
  impl_->degree = degree;
  if (impl_->k < 2) return;  // correction is identically zero
  impl_->colloc = assemble(approx, *impl_->maps, degree);
  const int k = impl_->k;
  const Eigen::Index rows = impl_->colloc.basis.rows();
  const int nb = 2 * k * degree;
  // Unknowns: basis coefficients, balanced log strengths d_0..d_{k-2}
  // (d_{k-1} = -sum, keeping the field bounded at infinity), constant.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, nb + (k - 1) + 1);
  a.leftCols(nb) = impl_->colloc.basis;
  for (int l = 0; l + 1 < k; ++l)
    a.col(nb + l) = impl_->colloc.logs.col(l) - impl_->colloc.logs.col(k - 1);
  a.col(nb + k - 1).setOnes();
  impl_->qr.factor(std::move(a), approx.pairwise_separation);
}

CorrectionSolver::~CorrectionSolver() = default;
CorrectionSolver::CorrectionSolver(CorrectionSolver&&) noexcept = default;
CorrectionSolver& CorrectionSolver::operator=(CorrectionSolver&&) noexcept = default;

HarmonicExpansion CorrectionSolver::solve(const KernelImages& images,
                                          const std::vector<double>& strengths) const {
  HarmonicExpansion out;
  out.maps = impl_->maps;
  out.owner = -1;
  const int k = impl_->k;
  out.log_strengths.assign(std::max(k, 1), 0.0);
  out.coeffs.assign(std::max(k, 1), {});
  if (k < 2) return out;

  bool all_zero = true;
  for (double g : strengths)
    if (g != 0.0) all_zero = false;
  if (all_zero) return out;

  const Eigen::Index rows = impl_->colloc.basis.rows();
  Eigen::VectorXd b(rows);
  const ExteriorMap& kernel_map = impl_->maps->front();
  for (Eigen::Index r = 0; r < rows; ++r)
    b(r) = -kernel_psi0_cached(kernel_map, images, strengths, impl_->colloc.row_point[r]);
  const Eigen::VectorXd x = impl_->qr.solve(b);

  const int nb = 2 * k * impl_->degree;
  unpack_coeffs(x, k, impl_->degree, out);
  double dsum = 0.0;
  for (int l = 0; l + 1 < k; ++l) {
    out.log_strengths[l] = x(nb + l);
    dsum += x(nb + l);
  }
  out.log_strengths[k - 1] = -dsum;
  out.constant = x(nb + k - 1);

  double res = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r)
    res = std::max(res, std::abs(out.value(impl_->colloc.row_point[r]) - b(r)));
  out.fit_residual = res;
  return out;
}

HarmonicExpansion CorrectionSolver::solve(const VortexBlobs& blobs) const {
  return solve(KernelImages::build(impl_->maps->front(), blobs), blobs.strengths);
}

HarmonicExpansion solve_correction_multi(const DomainApproximation& approx,
                                         std::shared_ptr<const std::vector<ExteriorMap>> maps,
                                         const VortexBlobs& blobs, int degree) {
  return CorrectionSolver(approx, std::move(maps), degree).solve(blobs);
}

// ---------------------------------------------------------------------------
// Cutoff quadrature and alpha

CutoffQuadrature CutoffQuadrature::build(const Cutoff& cutoff, int cells_per_eps) {
  if (cells_per_eps < 4)
    throw std::invalid_argument("quadrature grid unresolved: need at least 4 cells per eps");
  const double eps = cutoff.eps();
  const double h = eps / cells_per_eps;
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const Cx& p : cutoff.obstacle().samples) {
    lo_x = std::min(lo_x, p.real());
    hi_x = std::max(hi_x, p.real());
    lo_y = std::min(lo_y, p.imag());
    hi_y = std::max(hi_y, p.imag());
  }
  lo_x -= 2.0 * eps + h;
  lo_y -= 2.0 * eps + h;
  hi_x += 2.0 * eps + h;
  hi_y += 2.0 * eps + h;
  CutoffQuadrature q;
  q.cell_area = h * h;
  const int nx = static_cast<int>(std::ceil((hi_x - lo_x) / h));
  const int ny = static_cast<int>(std::ceil((hi_y - lo_y) / h));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Cx x(lo_x + (i + 0.5) * h, lo_y + (j + 0.5) * h);
      const double d = cutoff.obstacle().distance(x);
      if (d <= eps || d >= 2.0 * eps) continue;
      q.nodes.push_back(x);
      q.grad_chi.push_back(cutoff.gradient(x));
    }
  }
  return q;
}

std::vector<double> compute_alpha(const StreamDecomposition& decomp, const VortexBlobs& blobs,
                                  const std::vector<Cutoff>& cutoffs,
                                  const std::vector<CutoffQuadrature>& quads) {
  const std::size_t k = cutoffs.size();
  if (quads.size() != k || decomp.gamma.size() != k)
    throw std::invalid_argument("compute_alpha: inconsistent obstacle counts");
  std::vector<double> alpha(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double circ = 0.0;
    for (std::size_t j = 0; j < blobs.size(); ++j)
      if (blobs.strengths[j] != 0.0) circ -= blobs.strengths[j] * cutoffs[i](blobs.positions[j]);
    const auto& q = quads[i];
    std::vector<double> partial(q.nodes.size());
    parallel_for(q.nodes.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p)
        partial[p] = dot(decomp.psi0_gradient(blobs, q.nodes[p]), q.grad_chi[p]);
    });
    double flux = 0.0;
    for (double v : partial) flux += v;
    circ -= flux * q.cell_area;
    alpha[i] = decomp.gamma[i] - circ;
  }
  return alpha;
}

std::vector<double> compute_alpha(const StreamDecomposition& decomp, const VortexBlobs& blobs,
                                  const std::vector<Cutoff>& cutoffs, int cells_per_eps) {
  std::vector<CutoffQuadrature> quads;
  quads.reserve(cutoffs.size());
  for (const auto& c : cutoffs) quads.push_back(CutoffQuadrature::build(c, cells_per_eps));
  return compute_alpha(decomp, blobs, cutoffs, quads);
}

// ---------------------------------------------------------------------------
// StreamDecomposition and velocity

double StreamDecomposition::psi0_value(const VortexBlobs& blobs, Cx x) const {
  double psi = kernel_psi0_cached(maps->front(), images, blobs.strengths, x);
  if (!correction.empty()) psi += correction.value(x);
  return psi;
}

Cx StreamDecomposition::psi0_gradient(const VortexBlobs& blobs, Cx x) const {
  Cx g = kernel_grad_cached(maps->front(), images, blobs.strengths, x);
  if (!correction.empty()) g += correction.gradient(x);
  return g;
}

double StreamDecomposition::stream_value(const VortexBlobs& blobs, Cx x) const {
  double psi = psi0_value(blobs, x);
  for (std::size_t i = 0; i < alpha.size(); ++i) psi += alpha[i] * (*harmonic_fields)[i].value(x);
  return psi;
}

Cx velocity_unchecked(const StreamDecomposition& decomp, const VortexBlobs& blobs, Cx x) {
  Cx g = decomp.psi0_gradient(blobs, x);
  for (std::size_t i = 0; i < decomp.alpha.size(); ++i)
    if (decomp.alpha[i] != 0.0) g += decomp.alpha[i] * (*decomp.harmonic_fields)[i].gradient(x);
  return perp(g);
}

Cx velocity(const StreamDecomposition& decomp, const VortexBlobs& blobs, Cx x) {
  for (const auto& m : *decomp.maps)
    if (std::abs(m.evaluate(x)) <= 1.0)
      throw std::invalid_argument("velocity evaluation point is inside an obstacle");
  return velocity_unchecked(decomp, blobs, x);
}

Cx fullplane_biot_savart(const VortexBlobs& blobs, Cx x) {
  Cx u(0, 0);
  const double c2 = sq(blobs.core);
  for (std::size_t j = 0; j < blobs.size(); ++j) {
    const Cx d = x - blobs.positions[j];
    u += blobs.strengths[j] / std::max(abs2(d), c2) * perp(d);
  }
  return u / kTwoPi;
}

}  // namespace exflow
