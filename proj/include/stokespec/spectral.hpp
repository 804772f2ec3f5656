#pragma once

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <stdexcept>

namespace stokespec {

using cplx = std::complex<double>;
using Eigen::ArrayXcd;
using Eigen::ArrayXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Uniform periodic grid on [-pi, pi), nodes u_j = -pi + 2 pi j / n.
// The crest convention places u = 0 at node j = n/2.
struct Grid {
  int n = 0;
  ArrayXd nodes;
};
using GridPtr = std::shared_ptr<const Grid>;

GridPtr build_grid(int n_modes);

// Storage order of spectra follows the DFT: entry m holds wavenumber
// k = m for m <= n/2, else m - n. The unpaired Nyquist mode sits at m = n/2.
inline int wavenumber(int m, int n) { return m <= n / 2 ? m : m - n; }

// Real 2 pi periodic field, samples and spectrum kept consistent at
// construction; instances are immutable values.
class PeriodicField {
 public:
  PeriodicField() = default;
  // Both representations supplied by module internals that already have them.
  PeriodicField(GridPtr g, ArrayXd samples, ArrayXcd coeffs);

  static PeriodicField from_samples(GridPtr g, ArrayXd samples);
  // Realness is enforced by hermitian symmetrization of the input spectrum.
  static PeriodicField from_coeffs(GridPtr g, ArrayXcd coeffs);
  static PeriodicField zero(GridPtr g);

  int n() const { return grid_ ? grid_->n : 0; }
  const GridPtr& grid() const { return grid_; }
  const ArrayXd& samples() const { return samples_; }
  const ArrayXcd& coeffs() const { return coeffs_; }
  cplx coeff(int k) const;
  double mean() const { return coeffs_[0].real(); }
  double norm() const;  // continuum L2 norm over the period

 private:
  GridPtr grid_;
  ArrayXd samples_;
  ArrayXcd coeffs_;
};

// Complex 2 pi periodic envelope f~ of a quasiperiodic f = f~ exp(i mu u).
class QuasiField {
 public:
  QuasiField() = default;
  QuasiField(GridPtr g, double mu, ArrayXcd samples, ArrayXcd coeffs);

  static QuasiField from_samples(GridPtr g, double mu, ArrayXcd samples);
  static QuasiField from_coeffs(GridPtr g, double mu, ArrayXcd coeffs);
  static QuasiField from_periodic(const PeriodicField& f, double mu);

  int n() const { return grid_ ? grid_->n : 0; }
  const GridPtr& grid() const { return grid_; }
  double mu() const { return mu_; }
  const ArrayXcd& samples() const { return samples_; }
  const ArrayXcd& coeffs() const { return coeffs_; }
  cplx coeff(int k) const;
  double norm() const;

 private:
  GridPtr grid_;
  double mu_ = 0.0;
  ArrayXcd samples_;
  ArrayXcd coeffs_;
};

// Auxiliary conformal map tan(u/2) = L tan(q/2) concentrating uniform q nodes
// near u = 0 as L -> 0. All arrays are sampled at the uniform q nodes.
struct AuxMap {
  double L = 1.0;
  ArrayXd u_of_q;
  ArrayXd u_q;  // du/dq = 2L / (1 + L^2 + (1 - L^2) cos q)
  ArrayXd q_u;  // 1 / u_q
};

AuxMap build_aux_map(double L, int n_modes);

PeriodicField apply_hilbert(const PeriodicField& f);
PeriodicField apply_k(const PeriodicField& f);
QuasiField apply_hilbert_mu(const QuasiField& f);
QuasiField apply_k_mu(const QuasiField& f);
// Pseudo-inverse at k + mu = 0: that component maps to zero.
QuasiField apply_kinv_mu(const QuasiField& f);

// Coefficients preserved, new modes zero. Shrinking is refused unless the
// truncated tail carries < 1e-13 of the total spectral energy.
PeriodicField pad_spectrum(const PeriodicField& f, int new_n);

// Trapezoid (= spectral) inner products over the period.
double dot(const PeriodicField& a, const PeriodicField& b);
cplx dot(const QuasiField& a, const QuasiField& b);

PeriodicField operator+(const PeriodicField& a, const PeriodicField& b);
PeriodicField operator-(const PeriodicField& a, const PeriodicField& b);
PeriodicField operator*(double s, const PeriodicField& a);
QuasiField operator+(const QuasiField& a, const QuasiField& b);
QuasiField operator-(const QuasiField& a, const QuasiField& b);
QuasiField operator*(cplx s, const QuasiField& a);

namespace kernels {

// 3/2 de-aliasing size for quadratic products, rounded up to even so the
// alternating-sign node twiddle stays consistent for negative wavenumbers.
inline int padded_size(int n) {
  const int m = 3 * n / 2;
  return m + (m & 1);
}

// Spectrum <-> samples on the -pi offset grid; the (-1)^m twiddle that offset
// induces is folded into these kernels. Forward includes the 1/n scale.
void coeffs_from_samples(const ArrayXcd& samples, ArrayXcd& coeffs);
void samples_from_coeffs(const ArrayXcd& coeffs, ArrayXcd& samples);
void coeffs_from_real(const ArrayXd& samples, ArrayXcd& coeffs);
void real_from_coeffs(const ArrayXcd& coeffs, ArrayXd& samples);

// In-place envelope multipliers over k + mu (k the integer wavenumber).
void mul_abs_k(ArrayXcd& c, double mu);
void mul_isign_k(ArrayXcd& c, double mu);
void mul_inv_abs_k(ArrayXcd& c, double mu);  // pseudo-inverse at k + mu = 0

// Scratch-owning engine for de-aliased products: band-limited content of
// length-n spectra is evaluated on the padded grid, multiplied pointwise,
// and truncated back with the Nyquist mode zeroed. Dropping the Nyquist of
// every factor keeps the product map exactly self-adjoint on sample space.
class Dealias {
 public:
  explicit Dealias(int n);
  int n() const { return n_; }
  int m() const { return m_; }

  // Padded complex samples of the band |k| <= n/2 - 1 of c.
  void to_padded(const ArrayXcd& c, ArrayXcd& s_out);
  // Forward transform of padded samples, truncated to the band, Nyquist zero.
  void from_padded(const ArrayXcd& s_in, ArrayXcd& c_out);
  // Convenience: c_out = band-limited product of spectra a and b.
  void product(const ArrayXcd& a, const ArrayXcd& b, ArrayXcd& c_out);

 private:
  int n_, m_;
  ArrayXcd pad_a_, pad_b_;
};

}  // namespace kernels
}  // namespace stokespec
