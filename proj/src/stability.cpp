#include "stokespec/stability.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "stokespec/krylov.hpp"

namespace stokespec {

namespace {

// Padded-sample operator data for the stability family about a uniform wave.
// All products run on the dealiased grid; multipliers act on the kept band.
struct StabKernel {
  int n, m;
  double g, b, c, mu;
  ArrayXd y_p, ky_p, xu_p, yu_p, W_p;
  kernels::Dealias de;
  ArrayXcd hx, kx, t1, t2, t3, sx, shx;

  StabKernel(const StokesWave& w, double mu_in)
      : n(w.n()), m(kernels::padded_size(w.n())), g(w.g), b(w.c * w.c), c(w.c), mu(mu_in),
        de(w.n()) {
    const WaveKernel& K = w.kernel();
    if (!K.uniform)
      throw Error("stability operators need a uniform wave; resample_to_uniform first");
    if (K.min_W < 1e-8)
      throw Error("wave too close to limiting: |z_u|^2 reaches " + std::to_string(K.min_W));
    y_p = K.y_p;
    ky_p = K.ky_p;
    xu_p = K.xu_p;
    yu_p = K.yu_p;
    W_p = K.W_p;
    hx.resize(n);
    kx.resize(n);
    t1.resize(n);
    t2.resize(n);
    t3.resize(n);
    sx.resize(m);
    shx.resize(m);
  }

  void omega21(const ArrayXcd& x, ArrayXcd& out) {
    hx = x;
    kernels::mul_isign_k(hx, mu);
    de.to_padded(x, sx);
    de.to_padded(hx, shx);
    shx = xu_p * sx + yu_p * shx;
    de.from_padded(shx, out);
  }

  void omega21_dagger(const ArrayXcd& x, ArrayXcd& out) {
    de.to_padded(x, sx);
    shx = yu_p * sx;
    de.from_padded(shx, t1);
    kernels::mul_isign_k(t1, mu);
    shx = xu_p * sx;
    de.from_padded(shx, out);
    out -= t1;
  }

  void r12_dagger(const ArrayXcd& x, ArrayXcd& out) {
    de.to_padded(x, sx);
    shx = yu_p * sx;
    de.from_padded(shx, t1);
    kernels::mul_isign_k(t1, mu);
    de.to_padded(t1, shx);
    shx = (xu_p * sx + shx) / W_p;
    de.from_padded(shx, out);
  }

  // strict: enforce the mu = 0 zero-mode condition on Omega21 f; the lenient
  // path projects the mean out (used inside the resolvent where roundoff
  // would otherwise accumulate in the defective direction).
  void q_apply(const ArrayXcd& x, ArrayXcd& out, bool strict) {
    omega21(x, t2);
    if (std::abs(mu) < 1e-12) {
      const double xn = std::sqrt(x.abs2().sum());
      if (strict && std::abs(t2[0]) > 1e-10 * (xn + 1e-300))
        throw Error("zero-mode violation: Omega21 f has mean " + std::to_string(std::abs(t2[0])));
      t2[0] = 0.0;
    }
    kernels::mul_inv_abs_k(t2, mu);
    omega21_dagger(t2, out);
  }

  void s1_apply(const ArrayXcd& x, ArrayXcd& out) {
    kx = x;
    kernels::mul_abs_k(kx, mu);
    de.to_padded(x, sx);
    de.to_padded(kx, shx);
    shx = y_p * shx + (1.0 + ky_p) * sx;
    de.from_padded(shx, out);
    sx *= y_p;
    de.from_padded(sx, t1);
    kernels::mul_abs_k(t1, mu);
    out = b * kx - g * out - g * t1;
  }

  void s2_apply(const ArrayXcd& x, ArrayXcd& out, double sigma) {
    s1_apply(x, out);
    if (sigma == 0.0) return;
    hx = x;
    kernels::mul_isign_k(hx, mu);
    out += cplx(0.0, 2.0 * c * sigma) * hx;
    q_apply(x, t3, false);
    out += sigma * sigma * t3;
  }

  ArrayXd s2_precond(double sigma) const {
    ArrayXd d(n);
    for (int i = 0; i < n; ++i) {
      const double k = wavenumber(i, n) + mu;
      const double sgn = k > 0 ? 1.0 : (k < 0 ? -1.0 : 0.0);
      const double sym =
          b * std::abs(k) - g - 2.0 * c * sigma * sgn + sigma * sigma / std::max(std::abs(k), 1e-6);
      d[i] = std::max(std::abs(sym), 1e-3);
    }
    return d;
  }
};

void check_state(const StokesWave& w, const QuasiField& f) {
  if (f.n() != w.n()) throw Error("field grid does not match wave");
}

}  // namespace

QuasiField apply_omega21_mu(const StokesWave& w, const QuasiField& f) {
  check_state(w, f);
  StabKernel K(w, f.mu());
  ArrayXcd out;
  K.omega21(f.coeffs(), out);
  return QuasiField::from_coeffs(w.grid, f.mu(), std::move(out));
}

QuasiField apply_omega21_dagger_mu(const StokesWave& w, const QuasiField& f) {
  check_state(w, f);
  StabKernel K(w, f.mu());
  ArrayXcd out;
  K.omega21_dagger(f.coeffs(), out);
  return QuasiField::from_coeffs(w.grid, f.mu(), std::move(out));
}

QuasiField apply_R12_dagger_mu(const StokesWave& w, const QuasiField& f) {
  check_state(w, f);
  StabKernel K(w, f.mu());
  ArrayXcd out;
  K.r12_dagger(f.coeffs(), out);
  return QuasiField::from_coeffs(w.grid, f.mu(), std::move(out));
}

QuasiField apply_Q_mu(const StokesWave& w, const QuasiField& f) {
  check_state(w, f);
  StabKernel K(w, f.mu());
  ArrayXcd out;
  K.q_apply(f.coeffs(), out, true);
  return QuasiField::from_coeffs(w.grid, f.mu(), std::move(out));
}

QuasiField apply_S2_mu(const StokesWave& w, const QuasiField& f, double sigma) {
  check_state(w, f);
  StabKernel K(w, f.mu());
  ArrayXcd out;
  K.s2_apply(f.coeffs(), out, sigma);
  return QuasiField::from_coeffs(w.grid, f.mu(), std::move(out));
}

PerturbationState apply_J_mu(const StokesWave& w, const PerturbationState& state) {
  check_state(w, state.delta_phi);
  check_state(w, state.delta_y);
  const double mu = state.mu;
  ArrayXcd w2h = state.delta_y.coeffs();
  kernels::mul_isign_k(w2h, mu);
  ArrayXcd second = state.delta_phi.coeffs() - 2.0 * w.c * w2h;
  PerturbationState out;
  out.mu = mu;
  out.delta_phi = state.delta_y;
  out.delta_y = QuasiField::from_coeffs(w.grid, mu, std::move(second));
  return out;
}

namespace {

struct Resolvent {
  std::shared_ptr<StabKernel> K;
  double sigma;
  ArrayXd precond;
  int max_inner;
  mutable long inner_iters = 0;

  Resolvent(std::shared_ptr<StabKernel> k, double sg)
      : K(std::move(k)), sigma(sg), precond(K->s2_precond(sg)), max_inner(800 + 4 * K->n) {}

  // (G - i sigma J)^{-1} [f; g] = [Q(f + i sigma y2); y2],
  // y2 = S2^{-1}(g + i sigma Q f)
  void apply(const ArrayXcd& f, const ArrayXcd& gg, ArrayXcd& out1, ArrayXcd& out2) const {
    ArrayXcd qf;
    K->q_apply(f, qf, false);
    LinearOperator<cplx> A;
    A.dimension = K->n;
    A.adjoint_tag = AdjointTag::hermitian;
    A.apply = [this](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
      ArrayXcd r;
      K->s2_apply(x.array(), r, sigma);
      y = r.matrix();
    };
    Eigen::VectorXcd rhs = (gg + cplx(0.0, sigma) * qf).matrix();
    auto [sol, rep] = minres<cplx>(A, rhs, precond, 1e-11, max_inner);
    if (!rep.converged)
      throw Error("S2 solve stalled at shift " + std::to_string(sigma) + ": " +
                  (rep.diagnostic.empty() ? "max iterations" : rep.diagnostic));
    inner_iters += rep.iterations;
    out2 = sol.array();
    K->q_apply(f + cplx(0.0, sigma) * out2, out1, false);
  }
};

}  // namespace

PerturbationState block_shift_invert(const StokesWave& w, const PerturbationState& state,
                                     double sigma) {
  check_state(w, state.delta_phi);
  check_state(w, state.delta_y);
  Resolvent R(std::make_shared<StabKernel>(w, state.mu), sigma);
  ArrayXcd out1, out2;
  R.apply(state.delta_phi.coeffs(), state.delta_y.coeffs(), out1, out2);
  PerturbationState out;
  out.mu = state.mu;
  out.delta_phi = QuasiField::from_coeffs(w.grid, state.mu, std::move(out1));
  out.delta_y = QuasiField::from_coeffs(w.grid, state.mu, std::move(out2));
  return out;
}

namespace {

std::vector<StabilityEigenPair> qep_eigs_once(const StokesWave& w, double mu, double sigma,
                                              int nev) {
  const int n = w.n();
  auto K = std::make_shared<StabKernel>(w, mu);
  Resolvent R(K, sigma);

  LinearOperator<cplx> B;
  B.dimension = 2 * n;
  B.adjoint_tag = AdjointTag::general;
  B.apply = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
    ArrayXcd p = x.head(n).array(), q = x.tail(n).array();
    // J: (p, q) -> (q, p - 2 c H q)
    ArrayXcd hq = q;
    kernels::mul_isign_k(hq, mu);
    ArrayXcd jf = q, jg = p - 2.0 * K->c * hq;
    ArrayXcd o1, o2;
    R.apply(jf, jg, o1, o2);
    y.resize(2 * n);
    y.head(n) = o1.matrix();
    y.tail(n) = o2.matrix();
  };

  const int ncv = std::min(2 * n, std::max(2 * nev + 8, 20));
  Eigen::VectorXcd v0 = random_vector<cplx>(2 * n, 977);
  auto pairs = arnoldi_eigs(B, nev, ncv, 1e-9, 60, v0);

  std::vector<StabilityEigenPair> out;
  for (const auto& pr : pairs) {
    if (std::abs(pr.theta) < 1e-14) continue;
    const cplx lambda = cplx(0.0, sigma) + 1.0 / pr.theta;
    ArrayXcd pvec = pr.vector.head(n).array();
    ArrayXcd yvec = pr.vector.tail(n).array();
    const double ynorm = std::sqrt(yvec.abs2().sum());
    if (ynorm < 1e-12) continue;  // pure-momentum artifact
    // Deterministic gauge: unit delta_y with real positive crest value.
    {
      ArrayXcd ys;
      kernels::samples_from_coeffs(yvec, ys);
      const cplx crest = ys[n / 2];
      cplx phase = std::abs(crest) > 1e-10 * ynorm ? crest / std::abs(crest) : cplx(1.0, 0.0);
      const cplx scale = 1.0 / (phase * ynorm);
      yvec *= scale;
      pvec *= scale;
    }
    // Quadratic-pencil residual on delta_y.
    ArrayXcd qy, hy, s1y;
    K->q_apply(yvec, qy, false);
    hy = yvec;
    kernels::mul_isign_k(hy, mu);
    K->s1_apply(yvec, s1y);
    const ArrayXcd res = lambda * lambda * qy - 2.0 * K->c * lambda * hy - s1y;
    const double rnorm = std::sqrt(res.abs2().sum());

    StabilityEigenPair sp;
    sp.lambda = lambda;
    sp.mu = mu;
    sp.residual = rnorm;
    sp.converged = pr.converged && rnorm <= 1e-8;
    sp.canonical_momentum = QuasiField::from_coeffs(w.grid, mu, pvec);
    ArrayXcd phi;
    K->r12_dagger(pvec, phi);
    sp.state.mu = mu;
    sp.state.delta_phi = QuasiField::from_coeffs(w.grid, mu, std::move(phi));
    sp.state.delta_y = QuasiField::from_coeffs(w.grid, mu, std::move(yvec));
    if (sp.residual <= 1e-6) out.push_back(std::move(sp));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.lambda.real() != b.lambda.real()) return a.lambda.real() > b.lambda.real();
    return a.lambda.imag() < b.lambda.imag();
  });
  return out;
}

}  // namespace

std::vector<StabilityEigenPair> qep_eigs_near(const StokesWave& w, double mu, double sigma,
                                              int nev) {
  try {
    return qep_eigs_once(w, mu, sigma, nev);
  } catch (const Error&) {
    // A shift sitting on the spectrum stalls the inner solve; nudge once.
    return qep_eigs_once(w, mu, sigma + 1e-6 * (1.0 + std::abs(sigma)), nev);
  }
}

int thread_count() {
  const char* env = std::getenv("STOKESPEC_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  return v >= 1 ? v : 1;
}

std::vector<double> log_spaced_mu(double lo, double hi, int count) {
  if (!(lo > 0) || !(hi > lo) || count < 2) throw Error("invalid log schedule");
  std::vector<double> out(count);
  const double r = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) out[i] = lo * std::exp(r * i);
  out.back() = hi;
  return out;
}

FloquetSweep floquet_sweep(const StokesWave& w, const std::vector<double>& mu_schedule,
                           const ShiftPolicy& policy, int nev) {
  for (double mu : mu_schedule)
    if (!(mu >= 0.0 && mu < 1.0)) throw Error("Floquet parameter must lie in [0, 1)");
  w.kernel();  // build once before any worker touches it

  FloquetSweep sweep;
  sweep.mu_values = mu_schedule;
  sweep.spectra.resize(mu_schedule.size());
  sweep.errors.resize(mu_schedule.size());

  auto merge = [](std::vector<StabilityEigenPair>& into,
                  std::vector<StabilityEigenPair>&& more) {
    for (auto& p : more) {
      bool dup = false;
      for (const auto& q : into)
        if (std::abs(p.lambda - q.lambda) <= 1e-9 * (1.0 + std::abs(p.lambda))) {
          dup = true;
          break;
        }
      if (!dup) into.push_back(std::move(p));
    }
  };

  auto run_mu = [&](size_t i, const std::vector<double>& sigmas) {
    try {
      std::vector<StabilityEigenPair> acc;
      for (double s : sigmas) merge(acc, qep_eigs_near(w, mu_schedule[i], s, nev));
      std::sort(acc.begin(), acc.end(), [](const auto& a, const auto& b) {
        if (a.lambda.real() != b.lambda.real()) return a.lambda.real() > b.lambda.real();
        return a.lambda.imag() < b.lambda.imag();
      });
      sweep.spectra[i] = std::move(acc);
    } catch (const std::exception& e) {
      sweep.errors[i] = e.what();
    }
  };

  if (policy.kind == ShiftPolicy::Kind::track) {
    double sigma = 0.0;
    for (size_t i = 0; i < mu_schedule.size(); ++i) {
      run_mu(i, {sigma});
      // Follow the dominant frequency to keep the resolvent focused.
      double best = 0.0, gmax = -1.0;
      for (const auto& p : sweep.spectra[i])
        if (p.lambda.real() > gmax) {
          gmax = p.lambda.real();
          best = p.lambda.imag();
        }
      if (gmax > -1.0) sigma = best;
    }
  } else {
    const std::vector<double> sigmas =
        policy.kind == ShiftPolicy::Kind::zero ? std::vector<double>{0.0} : policy.ladder;
    if (sigmas.empty()) throw Error("empty shift ladder");
    const int nthreads = std::min<int>(thread_count(), static_cast<int>(mu_schedule.size()));
    if (nthreads <= 1) {
      for (size_t i = 0; i < mu_schedule.size(); ++i) run_mu(i, sigmas);
    } else {
      std::atomic<size_t> next{0};
      std::vector<std::thread> pool;
      for (int t = 0; t < nthreads; ++t)
        pool.emplace_back([&] {
          for (size_t i = next.fetch_add(1); i < mu_schedule.size(); i = next.fetch_add(1))
            run_mu(i, sigmas);
        });
      for (auto& th : pool) th.join();
    }
  }

  double gmax = 0.0, mustar = 0.0;
  bool any = false;
  for (size_t i = 0; i < sweep.spectra.size(); ++i)
    for (const auto& p : sweep.spectra[i])
      if (!any || p.lambda.real() > gmax) {
        any = true;
        gmax = p.lambda.real();
        mustar = sweep.mu_values[i];
      }
  sweep.max_growth = {mustar, any ? gmax : 0.0};
  return sweep;
}

void write_sweep(const std::string& path, const StokesWave& w, const FloquetSweep& sweep) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open sweep file for writing: " + path);
  char buf[200];
  out << "# stokespec-sweep v1\n";
  std::snprintf(buf, sizeof buf, "# n %d\n# c %.17g\n# s %.17g\n# g %.17g\n# L %.17g\n", w.n(),
                w.c, w.s, w.g, w.L());
  out << buf;
  out << "mu\tre_lambda\tim_lambda\tresidual\tconverged\n";
  for (size_t i = 0; i < sweep.mu_values.size(); ++i)
    for (const auto& p : sweep.spectra[i]) {
      std::snprintf(buf, sizeof buf, "%.17g\t%.17g\t%.17g\t%.3e\t%d\n", sweep.mu_values[i],
                    p.lambda.real(), p.lambda.imag(), p.residual, p.converged ? 1 : 0);
      out << buf;
    }
  if (!out) throw Error("short write on sweep file: " + path);
}

}  // namespace stokespec
