#include "stokespec/spectral.hpp"

#include <cmath>
#include <numbers>

#include "stokespec/fft.hpp"

namespace stokespec {

using std::numbers::pi;

GridPtr build_grid(int n_modes) {
  if (n_modes < 8 || n_modes % 2 != 0)
    throw Error("grid size must be even and >= 8, got " + std::to_string(n_modes));
  auto g = std::make_shared<Grid>();
  g->n = n_modes;
  g->nodes = ArrayXd::LinSpaced(n_modes, 0, n_modes - 1) * (2.0 * pi / n_modes) - pi;
  return g;
}

namespace kernels {

void coeffs_from_samples(const ArrayXcd& samples, ArrayXcd& coeffs) {
  const int n = static_cast<int>(samples.size());
  coeffs.resize(n);
  Fft::forward(samples.data(), coeffs.data(), n);
  const double scale = 1.0 / n;
  for (int m = 0; m < n; ++m) coeffs[m] *= (m & 1) ? -scale : scale;
}

void samples_from_coeffs(const ArrayXcd& coeffs, ArrayXcd& samples) {
  const int n = static_cast<int>(coeffs.size());
  ArrayXcd tw(n);
  for (int m = 0; m < n; ++m) tw[m] = (m & 1) ? -coeffs[m] : coeffs[m];
  samples.resize(n);
  Fft::backward(tw.data(), samples.data(), n);
}

void coeffs_from_real(const ArrayXd& samples, ArrayXcd& coeffs) {
  ArrayXcd tmp = samples.cast<cplx>();
  coeffs_from_samples(tmp, coeffs);
}

void real_from_coeffs(const ArrayXcd& coeffs, ArrayXd& samples) {
  ArrayXcd tmp;
  samples_from_coeffs(coeffs, tmp);
  samples = tmp.real();
}

void mul_abs_k(ArrayXcd& c, double mu) {
  const int n = static_cast<int>(c.size());
  for (int m = 0; m < n; ++m) c[m] *= std::abs(wavenumber(m, n) + mu);
}

void mul_isign_k(ArrayXcd& c, double mu) {
  const int n = static_cast<int>(c.size());
  for (int m = 0; m < n; ++m) {
    const double km = wavenumber(m, n) + mu;
    const double s = km > 0 ? 1.0 : (km < 0 ? -1.0 : 0.0);
    c[m] *= cplx(0.0, s);
  }
}

void mul_inv_abs_k(ArrayXcd& c, double mu) {
  const int n = static_cast<int>(c.size());
  for (int m = 0; m < n; ++m) {
    const double km = wavenumber(m, n) + mu;
    c[m] = km == 0.0 ? cplx(0.0) : c[m] / std::abs(km);
  }
}

Dealias::Dealias(int n) : n_(n), m_(padded_size(n)) {
  pad_a_.resize(m_);
  pad_b_.resize(m_);
}

void Dealias::to_padded(const ArrayXcd& c, ArrayXcd& s_out) {
  pad_a_.setZero();
  const int half = n_ / 2;  // band kept: |k| <= n/2 - 1
  pad_a_.head(half) = c.head(half);
  pad_a_.tail(half - 1) = c.tail(half - 1);
  samples_from_coeffs(pad_a_, s_out);
}

void Dealias::from_padded(const ArrayXcd& s_in, ArrayXcd& c_out) {
  Fft::forward(s_in.data(), pad_b_.data(), m_);
  c_out.resize(n_);
  c_out.setZero();
  const int half = n_ / 2;
  const double scale = 1.0 / m_;
  for (int m = 0; m < half; ++m)
    c_out[m] = pad_b_[m] * ((m & 1) ? -scale : scale);
  for (int k = -half + 1; k < 0; ++k) {
    const int src = m_ + k, dst = n_ + k;
    c_out[dst] = pad_b_[src] * ((src & 1) ? -scale : scale);
  }
}

void Dealias::product(const ArrayXcd& a, const ArrayXcd& b, ArrayXcd& c_out) {
  ArrayXcd sa, sb;
  to_padded(a, sa);
  to_padded(b, sb);
  sa *= sb;
  from_padded(sa, c_out);
}

}  // namespace kernels

namespace {

ArrayXcd hermitized(ArrayXcd c) {
  const int n = static_cast<int>(c.size());
  c[0] = c[0].real();
  for (int k = 1; k < n / 2; ++k) {
    const cplx avg = 0.5 * (c[k] + std::conj(c[n - k]));
    c[k] = avg;
    c[n - k] = std::conj(avg);
  }
  c[n / 2] = c[n / 2].real();
  return c;
}

}  // namespace

PeriodicField::PeriodicField(GridPtr g, ArrayXd samples, ArrayXcd coeffs)
    : grid_(std::move(g)), samples_(std::move(samples)), coeffs_(std::move(coeffs)) {}

PeriodicField PeriodicField::from_samples(GridPtr g, ArrayXd samples) {
  if (samples.size() != g->n) throw Error("sample count does not match grid");
  if (!samples.isFinite().all()) throw Error("non-finite samples");
  ArrayXcd c;
  kernels::coeffs_from_real(samples, c);
  return PeriodicField(std::move(g), std::move(samples), std::move(c));
}

PeriodicField PeriodicField::from_coeffs(GridPtr g, ArrayXcd coeffs) {
  if (coeffs.size() != g->n) throw Error("coefficient count does not match grid");
  ArrayXcd c = hermitized(std::move(coeffs));
  ArrayXd s;
  kernels::real_from_coeffs(c, s);
  return PeriodicField(std::move(g), std::move(s), std::move(c));
}

PeriodicField PeriodicField::zero(GridPtr g) {
  const int n = g->n;
  return PeriodicField(std::move(g), ArrayXd::Zero(n), ArrayXcd::Zero(n));
}

cplx PeriodicField::coeff(int k) const {
  const int n = this->n();
  if (k > n / 2 || k < -n / 2 + 1) return 0.0;
  return coeffs_[(k % n + n) % n];
}

double PeriodicField::norm() const {
  return std::sqrt(2.0 * pi * coeffs_.abs2().sum());
}

QuasiField::QuasiField(GridPtr g, double mu, ArrayXcd samples, ArrayXcd coeffs)
    : grid_(std::move(g)), mu_(mu), samples_(std::move(samples)), coeffs_(std::move(coeffs)) {}

QuasiField QuasiField::from_samples(GridPtr g, double mu, ArrayXcd samples) {
  if (samples.size() != g->n) throw Error("sample count does not match grid");
  if (!samples.isFinite().all()) throw Error("non-finite samples");
  ArrayXcd c;
  kernels::coeffs_from_samples(samples, c);
  return QuasiField(std::move(g), mu, std::move(samples), std::move(c));
}

QuasiField QuasiField::from_coeffs(GridPtr g, double mu, ArrayXcd coeffs) {
  if (coeffs.size() != g->n) throw Error("coefficient count does not match grid");
  ArrayXcd s;
  kernels::samples_from_coeffs(coeffs, s);
  return QuasiField(std::move(g), mu, std::move(s), std::move(coeffs));
}

QuasiField QuasiField::from_periodic(const PeriodicField& f, double mu) {
  return QuasiField(f.grid(), mu, f.samples().cast<cplx>(), f.coeffs());
}

cplx QuasiField::coeff(int k) const {
  const int n = this->n();
  if (k > n / 2 || k < -n / 2 + 1) return 0.0;
  return coeffs_[(k % n + n) % n];
}

double QuasiField::norm() const {
  return std::sqrt(2.0 * pi * coeffs_.abs2().sum());
}

PeriodicField apply_hilbert(const PeriodicField& f) {
  ArrayXcd c = f.coeffs();
  kernels::mul_isign_k(c, 0.0);
  // The unpaired Nyquist cosine has no real odd partner; it maps to zero to
  // stay inside the real subspace.
  c[f.n() / 2] = 0.0;
  return PeriodicField::from_coeffs(f.grid(), std::move(c));
}

PeriodicField apply_k(const PeriodicField& f) {
  ArrayXcd c = f.coeffs();
  kernels::mul_abs_k(c, 0.0);
  return PeriodicField::from_coeffs(f.grid(), std::move(c));
}

QuasiField apply_hilbert_mu(const QuasiField& f) {
  ArrayXcd c = f.coeffs();
  kernels::mul_isign_k(c, f.mu());
  return QuasiField::from_coeffs(f.grid(), f.mu(), std::move(c));
}

QuasiField apply_k_mu(const QuasiField& f) {
  ArrayXcd c = f.coeffs();
  kernels::mul_abs_k(c, f.mu());
  return QuasiField::from_coeffs(f.grid(), f.mu(), std::move(c));
}

QuasiField apply_kinv_mu(const QuasiField& f) {
  ArrayXcd c = f.coeffs();
  kernels::mul_inv_abs_k(c, f.mu());
  return QuasiField::from_coeffs(f.grid(), f.mu(), std::move(c));
}

AuxMap build_aux_map(double L, int n_modes) {
  if (!(L > 0.0 && L <= 1.0)) throw Error("aux map parameter L must lie in (0, 1]");
  auto grid = build_grid(n_modes);
  AuxMap map;
  map.L = L;
  const int n = n_modes;
  map.u_of_q.resize(n);
  map.u_q.resize(n);
  const double L2 = L * L;
  for (int j = 0; j < n; ++j) {
    const double q = grid->nodes[j];
    map.u_of_q[j] = j == 0 ? -pi : 2.0 * std::atan(L * std::tan(0.5 * q));
    map.u_q[j] = 2.0 * L / (1.0 + L2 + (1.0 - L2) * std::cos(q));
  }
  map.q_u = map.u_q.inverse();
  return map;
}

PeriodicField pad_spectrum(const PeriodicField& f, int new_n) {
  const int n = f.n();
  if (new_n == n) return f;
  auto g = build_grid(new_n);
  ArrayXcd c = ArrayXcd::Zero(new_n);
  if (new_n > n) {
    c.head(n / 2) = f.coeffs().head(n / 2);
    c.tail(n / 2 - 1) = f.coeffs().tail(n / 2 - 1);
    // The source Nyquist cosine splits across +-n/2 on the finer grid.
    c[n / 2] = 0.5 * f.coeffs()[n / 2];
    c[new_n - n / 2] = 0.5 * std::conj(f.coeffs()[n / 2]);
  } else {
    double tail = 0.0;
    for (int m = 0; m < n; ++m) {
      const int k = wavenumber(m, n);
      if (std::abs(k) >= new_n / 2) tail += std::norm(f.coeffs()[m]);
    }
    const double total = f.coeffs().abs2().sum();
    if (total > 0.0 && tail > 1e-13 * total)
      throw Error("pad_spectrum: shrink would discard spectral tail energy");
    c.head(new_n / 2) = f.coeffs().head(new_n / 2);
    for (int k = -new_n / 2 + 1; k < 0; ++k) c[new_n + k] = f.coeffs()[n + k];
  }
  return PeriodicField::from_coeffs(std::move(g), std::move(c));
}

double dot(const PeriodicField& a, const PeriodicField& b) {
  return (a.samples() * b.samples()).sum() * (2.0 * pi / a.n());
}

cplx dot(const QuasiField& a, const QuasiField& b) {
  return (a.samples().conjugate() * b.samples()).sum() * (2.0 * pi / a.n());
}

PeriodicField operator+(const PeriodicField& a, const PeriodicField& b) {
  return PeriodicField(a.grid(), a.samples() + b.samples(), a.coeffs() + b.coeffs());
}
PeriodicField operator-(const PeriodicField& a, const PeriodicField& b) {
  return PeriodicField(a.grid(), a.samples() - b.samples(), a.coeffs() - b.coeffs());
}
PeriodicField operator*(double s, const PeriodicField& a) {
  return PeriodicField(a.grid(), s * a.samples(), s * a.coeffs());
}
QuasiField operator+(const QuasiField& a, const QuasiField& b) {
  return QuasiField(a.grid(), a.mu(), a.samples() + b.samples(), a.coeffs() + b.coeffs());
}
QuasiField operator-(const QuasiField& a, const QuasiField& b) {
  return QuasiField(a.grid(), a.mu(), a.samples() - b.samples(), a.coeffs() - b.coeffs());
}
QuasiField operator*(cplx s, const QuasiField& a) {
  return QuasiField(a.grid(), a.mu(), s * a.samples(), s * a.coeffs());
}

}  // namespace stokespec
