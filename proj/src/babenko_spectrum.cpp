#include "stokespec/babenko_spectrum.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "stokespec/krylov.hpp"

namespace stokespec {

using std::numbers::pi;

const char* parity_name(Parity p) {
  switch (p) {
    case Parity::even: return "even";
    case Parity::odd: return "odd";
    default: return "none";
  }
}

namespace {

bool mu_has_parity(double mu) {
  return std::abs(mu) < 1e-12 || std::abs(mu - 0.5) < 1e-12;
}

// Reflection u -> -u on envelope coefficients: c_m -> c_{-m} at mu = 0,
// c_m -> c_{-1-m} at mu = 1/2 (the e^{iu/2} prefactor shifts the pairing).
int reflect_index(int m, int n, double mu) {
  const bool half = std::abs(mu - 0.5) < 1e-12;
  const int r = half ? (n - 1 - m) % n : (n - m) % n;
  return r;
}

Parity coeff_parity(const ArrayXcd& c, double mu, double ratio) {
  const int n = static_cast<int>(c.size());
  double dm = 0.0, dp = 0.0, nn = 0.0;
  for (int m = 0; m < n; ++m) {
    const cplx r = c[reflect_index(m, n, mu)];
    dm += std::norm(c[m] - r);
    dp += std::norm(c[m] + r);
    nn += std::norm(c[m]);
  }
  if (nn == 0.0) return Parity::none;
  if (std::sqrt(dm / nn) <= ratio) return Parity::even;
  if (std::sqrt(dp / nn) <= ratio) return Parity::odd;
  return Parity::none;
}

void project_parity(ArrayXcd& c, double mu, Parity p) {
  if (p == Parity::none) return;
  const int n = static_cast<int>(c.size());
  const double sgn = p == Parity::even ? 1.0 : -1.0;
  if (std::abs(mu - 0.5) < 1e-12) {
    for (int m = 0; m < n / 2; ++m) {
      const int r = n - 1 - m;
      const cplx v = 0.5 * (c[m] + sgn * c[r]);
      c[m] = v;
      c[r] = sgn * v;
    }
    return;
  }
  for (int m = 1; m < n / 2; ++m) {
    const cplx v = 0.5 * (c[m] + sgn * c[n - m]);
    c[m] = v;
    c[n - m] = sgn * v;
  }
  if (p == Parity::odd) c[0] = 0.0;
  c[n / 2] = 0.0;
}

// Operator data for the symmetrized eigenproblem on the solve grid. At L = 1
// the weight is identity and the action is S1_mu itself.
struct SymKernel {
  int n, m;
  double g, b, mu;
  bool weighted;
  ArrayXd y_p, ky_p, uq_p, sqrt_qu_p;
  kernels::Dealias de;
  ArrayXcd f, kf, sf, skf, t1, t2;

  SymKernel(const StokesWave& w, double mu_in)
      : n(w.n()), m(kernels::padded_size(w.n())), g(w.g), b(w.c * w.c), mu(mu_in),
        weighted(!w.uniform()), de(w.n()) {
    const WaveKernel& K = w.kernel();
    y_p = K.y_p;
    ky_p = K.ky_p;
    uq_p = K.uq_p;
    if (weighted) sqrt_qu_p = uq_p.inverse().sqrt();
    f.resize(n);
    kf.resize(n);
    sf.resize(m);
    skf.resize(m);
    t1.resize(n);
    t2.resize(n);
  }

  // A f = c^2 k_mu f - g u_q f - g (y k_mu f + f k y + k_mu (y f))
  void apply_A(const ArrayXcd& x, ArrayXcd& out) {
    kf = x;
    kernels::mul_abs_k(kf, mu);
    de.to_padded(x, sf);
    de.to_padded(kf, skf);
    skf = y_p * skf + (uq_p + ky_p) * sf;
    de.from_padded(skf, t1);
    sf *= y_p;
    de.from_padded(sf, t2);
    kernels::mul_abs_k(t2, mu);
    out = b * kf - g * t1 - g * t2;
  }

  void apply(const ArrayXcd& x, ArrayXcd& out) {
    if (!weighted) {
      apply_A(x, out);
      return;
    }
    de.to_padded(x, sf);
    sf *= sqrt_qu_p;
    de.from_padded(sf, f);
    apply_A(f, t1);
    de.to_padded(t1, sf);
    sf *= sqrt_qu_p;
    de.from_padded(sf, out);
  }

  // h = u_q^{1/2} f(u(q)); recover the eigenfunction from the symmetrized
  // variable through the same band-limited weight application.
  ArrayXcd h_to_f(const ArrayXcd& h) {
    if (!weighted) return h;
    ArrayXcd out(n);
    de.to_padded(h, sf);
    sf *= sqrt_qu_p;
    de.from_padded(sf, out);
    return out;
  }

  ArrayXcd f_to_h(const ArrayXcd& fc) {
    if (!weighted) return fc;
    ArrayXcd out(n);
    de.to_padded(fc, sf);
    sf *= sqrt_qu_p.inverse();
    de.from_padded(sf, out);
    return out;
  }
};

}  // namespace

QuasiField apply_S1_mu(const StokesWave& w, const QuasiField& f) {
  if (f.n() != w.n()) throw Error("field grid does not match wave");
  if (!w.uniform())
    throw Error("apply_S1_mu acts on uniform waves; use apply_symmetrized on auxiliary grids");
  SymKernel S(w, f.mu());
  ArrayXcd out;
  S.apply_A(f.coeffs(), out);
  return QuasiField::from_coeffs(w.grid, f.mu(), std::move(out));
}

QuasiField apply_symmetrized(const StokesWave& w, const AuxMap& aux, const QuasiField& h) {
  if (h.n() != w.n()) throw Error("field grid does not match wave");
  if (aux.L != w.L() || aux.u_q.size() != w.n())
    throw Error("auxiliary map is not the wave's own");
  SymKernel S(w, h.mu());
  ArrayXcd out;
  S.apply(h.coeffs(), out);
  return QuasiField::from_coeffs(w.grid, h.mu(), std::move(out));
}

namespace {

EigenPair eig_nearest_once(const StokesWave& w, double sigma, double mu, const ArrayXcd* seed_f) {
  const int n = w.n();
  const double g = w.g, b = w.c * w.c;
  auto S = std::make_shared<SymKernel>(w, mu);

  Parity par = Parity::none;
  Eigen::VectorXcd v0;
  if (seed_f && seed_f->size() == n) {
    if (mu_has_parity(mu)) par = coeff_parity(*seed_f, mu, 1e-6);
    v0 = S->f_to_h(*seed_f).matrix();
  }

  ArrayXd precond(n);
  for (int i = 0; i < n; ++i) {
    const double k = wavenumber(i, n) + mu;
    precond[i] = std::max(std::abs(b * std::abs(k) - g - sigma), 1e-3);
  }

  LinearOperator<cplx> A;
  A.dimension = n;
  A.adjoint_tag = AdjointTag::hermitian;
  A.apply = [S, sigma](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
    ArrayXcd out;
    S->apply(x.array(), out);
    y = (out - sigma * x.array()).matrix();
  };

  auto applies = std::make_shared<int>(0);
  LinearOperator<cplx> B;
  B.dimension = n;
  B.adjoint_tag = AdjointTag::hermitian;
  B.apply = [&, applies](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
    ++*applies;
    auto [sol, rep] = minres<cplx>(A, x, precond, 1e-12, 800 + 4 * n);
    if (!rep.converged)
      throw Error("resolvent solve stalled near shift " + std::to_string(sigma) + ": " +
                  (rep.diagnostic.empty() ? "max iterations" : rep.diagnostic));
    y = sol;
  };

  std::function<void(Eigen::VectorXcd&)> projector;
  if (par != Parity::none) {
    const double pmu = mu;
    const Parity pp = par;
    projector = [pmu, pp](Eigen::VectorXcd& x) {
      ArrayXcd c = x.array();
      project_parity(c, pmu, pp);
      x = c.matrix();
    };
  }

  auto pairs = arnoldi_eigs(B, 2, 10, 1e-10, 60, v0, projector);
  const ArnoldiPair* best = nullptr;
  for (const auto& p : pairs)
    if (!best || (p.converged && !best->converged) ||
        (p.converged == best->converged && std::abs(p.theta) > std::abs(best->theta)))
      best = &p;
  if (!best) throw Error("eigensolve returned no Ritz pairs");

  ArrayXcd h = best->vector.array();
  if (par != Parity::none) project_parity(h, mu, par);

  // Rayleigh quotient of the symmetrized operator; its imaginary part bounds
  // the hermiticity drift of the iteration.
  ArrayXcd Th;
  S->apply(h, Th);
  const double hh = h.abs2().sum();
  const cplx rayleigh = (h.conjugate() * Th).sum() / hh;
  if (std::abs(rayleigh.imag()) > 1e-10 * (1.0 + std::abs(rayleigh)))
    throw Error("eigenvalue drifted off the real axis");
  const double xi = rayleigh.real();
  const double residual = std::sqrt((Th - xi * h).abs2().sum() / hh);

  ArrayXcd fc = S->h_to_f(h);
  // Unit norm, positive at the crest u = 0 (grid node n/2) when resolvable.
  {
    ArrayXcd fs;
    kernels::samples_from_coeffs(fc, fs);
    const cplx crest = fs[n / 2];
    double scale = std::sqrt(fc.abs2().sum() * 2.0 * pi);
    cplx phase = std::abs(crest) > 1e-8 * scale ? crest / std::abs(crest) : cplx(1, 0);
    fc /= phase * scale;
  }
  auto field = QuasiField::from_coeffs(w.grid, mu, std::move(fc));

  EigenPair out;
  out.xi = xi;
  out.mu = mu;
  out.parity = mu_has_parity(mu) ? coeff_parity(field.coeffs(), mu, 1e-6) : Parity::none;
  out.residual = residual;
  out.iterations = *applies;
  out.converged = best->converged && residual <= 1e-9;
  out.eigenfunction = std::move(field);
  return out;
}

}  // namespace

EigenPair eig_nearest(const StokesWave& w, double sigma, double mu, const QuasiField* v0) {
  const ArrayXcd* seed = nullptr;
  ArrayXcd seed_store;
  if (v0) {
    if (std::abs(v0->mu() - mu) > 1e-12) throw Error("seed Floquet parameter does not match");
    seed_store = v0->coeffs();
    seed = &seed_store;
  }
  try {
    return eig_nearest_once(w, sigma, mu, seed);
  } catch (const Error&) {
    // Shift on top of an eigenvalue shows up as resolvent stagnation; nudge.
    return eig_nearest_once(w, sigma + 1e-6 * (1.0 + std::abs(sigma)), mu, seed);
  }
}

namespace {

// Envelope transfer between solve grids: evaluate f(u) at the target wave's
// u nodes through the source wave's q coordinate.
ArrayXcd map_envelope(const QuasiField& f, const StokesWave& from, const StokesWave& to) {
  if (from.L() == to.L() && from.n() == to.n()) return f.coeffs();
  const int n_from = from.n(), n_to = to.n();
  if (from.L() == to.L()) {
    ArrayXcd out = ArrayXcd::Zero(n_to);
    const int band = std::min(n_from, n_to) / 2;
    out.head(band) = f.coeffs().head(band);
    out.tail(band - 1) = f.coeffs().tail(band - 1);
    return out;
  }
  ArrayXcd phase(n_to);
  for (int j = 0; j < n_to; ++j) {
    const double u = to.uniform() ? to.grid->nodes[j] : to.aux->u_of_q[j];
    const double theta =
        j == 0 ? -pi : 2.0 * std::atan(std::tan(0.5 * u) / from.L());
    phase[j] = std::polar(1.0, theta);
  }
  const ArrayXcd& c = f.coeffs();
  ArrayXcd acc = ArrayXcd::Constant(n_to, c[0]);
  ArrayXcd pos = ArrayXcd::Ones(n_to), neg = ArrayXcd::Ones(n_to);
  for (int m = 1; m < n_from / 2; ++m) {
    pos *= phase;
    neg *= phase.conjugate();
    acc += c[m] * pos + c[n_from - m] * neg;
  }
  ArrayXcd out;
  kernels::coeffs_from_samples(acc, out);
  return out;
}

}  // namespace

std::vector<std::pair<double, double>> track_eigenvalue_branch(const BranchState& branch,
                                                               const EigenPair& seed, double mu) {
  if (branch.waves.empty()) throw Error("empty branch");
  std::vector<std::pair<double, double>> out;

  EigenPair cur = seed;
  if (cur.eigenfunction.n() != branch.waves.front().n() || !cur.converged)
    cur = eig_nearest(branch.waves.front(), seed.xi, mu, &seed.eigenfunction);
  out.emplace_back(branch.waves.front().s, cur.xi);

  double dxi = 0.0;
  const StokesWave* prev_wave = &branch.waves.front();

  std::function<EigenPair(const StokesWave&, const StokesWave&, const EigenPair&, int)> advance =
      [&](const StokesWave& from_wave, const StokesWave& to_wave, const EigenPair& from,
          int depth) -> EigenPair {
    const double sigma = from.xi - 0.1 * std::abs(dxi);
    ArrayXcd mapped = map_envelope(from.eigenfunction, from_wave, to_wave);
    QuasiField v0 = QuasiField::from_coeffs(to_wave.grid, mu, mapped);
    EigenPair next = eig_nearest(to_wave, sigma, mu, &v0);
    const cplx ov = (v0.coeffs().conjugate() * next.eigenfunction.coeffs()).sum();
    const double overlap = std::abs(ov) / (std::sqrt(v0.coeffs().abs2().sum()) *
                                           std::sqrt(next.eigenfunction.coeffs().abs2().sum()));
    if (overlap >= 0.5) return next;
    if (depth >= 4) throw Error("eigenvalue branch jump persisted through refinement");
    // Refine in steepness: march through an intermediate wave between the two.
    auto [wm, repm] =
        solve_newton(from_wave, Steepness{0.5 * (from_wave.s + to_wave.s)}, NewtonOptions{});
    if (!repm.converged) throw Error("intermediate wave solve failed during branch tracking");
    EigenPair mid = advance(from_wave, wm, from, depth + 1);
    return advance(wm, to_wave, mid, depth + 1);
  };

  for (size_t i = 1; i < branch.waves.size(); ++i) {
    EigenPair next = advance(*prev_wave, branch.waves[i], cur, 0);
    dxi = next.xi - cur.xi;
    cur = next;
    prev_wave = &branch.waves[i];
    out.emplace_back(branch.waves[i].s, cur.xi);
  }
  return out;
}

BranchPoint find_branch_point(const BranchState& branch, double mu,
                              std::pair<double, double> bracket, double tol_s) {
  if (branch.waves.empty()) throw Error("empty branch");
  auto [lo, hi] = bracket;
  if (!(lo < hi)) throw Error("invalid bracket");
  if (!(tol_s > 0)) throw Error("invalid bracket tolerance");

  auto wave_at = [&](double s) -> StokesWave {
    const StokesWave* seed = &branch.waves.front();
    for (const auto& w : branch.waves)
      if (std::abs(w.s - s) < std::abs(seed->s - s)) seed = &w;
    auto [w, rep] = solve_newton(*seed, Steepness{s}, NewtonOptions{});
    if (!rep.converged) throw Error("wave solve failed at steepness " + std::to_string(s));
    return w;
  };

  // Parity-confined eigenvalue nearest zero; the shift keeps a fixed offset
  // from zero so the resolvent remains bounded as the crossing is approached.
  EigenPair carry;
  StokesWave carry_wave;
  auto xi_with_carry = [&](const StokesWave& w) -> EigenPair {
    const double sigma = carry.xi + (carry.xi >= 0 ? 2e-3 : -2e-3);
    ArrayXcd mapped = map_envelope(carry.eigenfunction, carry_wave, w);
    QuasiField v0 = QuasiField::from_coeffs(w.grid, mu, mapped);
    return eig_nearest(w, sigma, mu, &v0);
  };

  StokesWave w_lo = wave_at(lo), w_hi = wave_at(hi);
  EigenPair e_lo;
  {
    ArrayXcd c = random_vector<cplx>(w_lo.n(), 20240817).array();
    project_parity(c, mu, Parity::even);
    QuasiField v0 = QuasiField::from_coeffs(w_lo.grid, mu, std::move(c));
    e_lo = eig_nearest(w_lo, 2e-3, mu, &v0);
  }
  carry = e_lo;
  carry_wave = w_lo;
  EigenPair e_hi = xi_with_carry(w_hi);
  if (e_lo.xi == 0.0 || e_hi.xi == 0.0 || (e_lo.xi > 0) == (e_hi.xi > 0))
    throw Error("tracked eigenvalue does not change sign across the bracket");

  while (hi - lo > tol_s) {
    const double mid = 0.5 * (lo + hi);
    StokesWave wm = wave_at(mid);
    // seed from the nearer bracket end
    carry = (mid - lo < hi - mid) ? e_lo : e_hi;
    carry_wave = (mid - lo < hi - mid) ? w_lo : w_hi;
    EigenPair em = xi_with_carry(wm);
    if ((em.xi > 0) == (e_lo.xi > 0)) {
      lo = mid;
      w_lo = std::move(wm);
      e_lo = std::move(em);
    } else {
      hi = mid;
      w_hi = std::move(wm);
      e_hi = std::move(em);
    }
  }

  BranchPoint bp;
  bp.s_star = 0.5 * (lo + hi);
  bp.mu = mu;
  bp.kind = std::abs(mu) < 1e-12 ? BranchPoint::Kind::turning_point
                                 : BranchPoint::Kind::secondary_bifurcation;
  bp.bracket_width = hi - lo;
  return bp;
}

Parity eigenfunction_parity(const QuasiField& f) {
  if (!mu_has_parity(f.mu())) return Parity::none;
  return coeff_parity(f.coeffs(), f.mu(), 1e-6);
}

void write_spectrum(const std::string& path, const std::vector<SpectrumRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open spectrum file for writing: " + path);
  out << "s\tmu\txi\tparity\tresidual\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g\t%.17g\t%.17g\t%s\t%.3e\n", r.s, r.mu, r.xi,
                  parity_name(r.parity), r.residual);
    out << buf;
  }
  if (!out) throw Error("short write on spectrum file: " + path);
}

}  // namespace stokespec
