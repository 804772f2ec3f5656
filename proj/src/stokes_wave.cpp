#include "stokespec/stokes_wave.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "stokespec/krylov.hpp"

namespace stokespec {

using std::numbers::pi;

ArrayXcd spectrum_from_cosine(const ArrayXd& y_hat, int n) {
  ArrayXcd c = ArrayXcd::Zero(n);
  c[0] = y_hat[0];
  for (int k = 1; k < n / 2; ++k) {
    c[k] = 0.5 * y_hat[k];
    c[n - k] = 0.5 * y_hat[k];
  }
  c[n / 2] = y_hat[n / 2];
  return c;
}

ArrayXd cosine_from_spectrum(const ArrayXcd& yc) {
  const int n = static_cast<int>(yc.size());
  ArrayXd a(n / 2 + 1);
  a[0] = yc[0].real();
  for (int k = 1; k < n / 2; ++k) a[k] = (yc[k] + yc[n - k]).real();
  a[n / 2] = yc[n / 2].real();
  return a;
}

namespace {

// Scrub roundoff leakage out of the even real-cosine subspace; the Nyquist
// mode stays pinned at zero.
void project_even_real(ArrayXcd& c) {
  const int n = static_cast<int>(c.size());
  c[0] = c[0].real();
  for (int k = 1; k < n / 2; ++k) {
    const double v = 0.5 * (c[k] + c[n - k]).real();
    c[k] = v;
    c[n - k] = v;
  }
  c[n / 2] = 0.0;
}

ArrayXd padded_uq(const std::optional<AuxMap>& aux, int m) {
  if (!aux || aux->L == 1.0) return ArrayXd::Ones(m);
  const double L2 = aux->L * aux->L;
  ArrayXd uq(m);
  for (int j = 0; j < m; ++j) {
    const double q = -pi + 2.0 * pi * j / m;
    uq[j] = 2.0 * aux->L / (1.0 + L2 + (1.0 - L2) * std::cos(q));
  }
  return uq;
}

// Trial-point operator data for the Newton iteration: residual and Jacobian
// action in the solve coordinate at a given (spectrum, c^2).
struct IterKernel {
  int n, m;
  double g, b;
  ArrayXd uq_p;
  kernels::Dealias de;
  ArrayXcd yc, kyc;
  ArrayXd y_p, ky_p;
  // scratch
  ArrayXcd sv, skv, t1, t2, kv;

  IterKernel(int n_, double g_, const std::optional<AuxMap>& aux)
      : n(n_), m(kernels::padded_size(n_)), g(g_), b(0), uq_p(padded_uq(aux, m)), de(n_) {
    sv.resize(m);
    skv.resize(m);
    t1.resize(n);
    t2.resize(n);
    kv.resize(n);
  }

  void set_point(const ArrayXcd& yc_in, double b_in) {
    yc = yc_in;
    b = b_in;
    kyc = yc;
    kernels::mul_abs_k(kyc, 0.0);
    ArrayXcd tmp;
    de.to_padded(yc, tmp);
    y_p = tmp.real();
    de.to_padded(kyc, tmp);
    ky_p = tmp.real();
  }

  // F = c^2 k y - g u_q y - g y k y - (g/2) k (y^2)
  void residual(ArrayXcd& out) {
    ArrayXcd lin(m);
    lin = (uq_p * y_p + y_p * ky_p).cast<cplx>();
    de.from_padded(lin, t1);
    lin = (y_p * y_p).cast<cplx>();
    de.from_padded(lin, t2);
    kernels::mul_abs_k(t2, 0.0);
    out = b * kyc - g * t1 - 0.5 * g * t2;
  }

  // A v = c^2 k v - g u_q v - g (y k v + v k y + k (y v))
  void jacobian(const ArrayXcd& v, ArrayXcd& out) {
    kv = v;
    kernels::mul_abs_k(kv, 0.0);
    de.to_padded(v, sv);
    de.to_padded(kv, skv);
    skv = y_p * skv + (uq_p + ky_p) * sv;
    de.from_padded(skv, t1);
    sv *= y_p;
    de.from_padded(sv, t2);
    kernels::mul_abs_k(t2, 0.0);
    out = b * kv - g * t1 - g * t2;
  }
};

double ctrl_dot(const ArrayXd& r_cos, const ArrayXcd& v) {
  double acc = r_cos[0] * v[0].real();
  const int n = static_cast<int>(v.size());
  const int kmax = std::min<int>(static_cast<int>(r_cos.size()) - 1, n / 2 - 1);
  for (int k = 1; k <= kmax; ++k) acc += r_cos[k] * 2.0 * v[k].real();
  return acc;
}

struct ControlEval {
  ArrayXd row;     // cosine-space functional coefficients
  double rb = 0;   // d(control)/d(c^2)
  double value = 0;
};

ControlEval eval_control(const Control& ctrl, const ArrayXcd& yc, double b, int n) {
  ControlEval ev;
  ev.row = ArrayXd::Zero(n / 2);
  if (const auto* fh = std::get_if<FirstHarmonic>(&ctrl)) {
    ev.row[1] = 1.0;
    ev.value = 2.0 * yc[1].real() - fh->a1;
  } else if (const auto* st = std::get_if<Steepness>(&ctrl)) {
    double sum = 0;
    for (int k = 1; k < n / 2; k += 2) {
      ev.row[k] = 1.0;
      sum += 2.0 * yc[k].real();
    }
    ev.value = sum - pi * st->s;
  } else {
    const auto& al = std::get<Arclength>(ctrl);
    const int kb = std::min<int>(static_cast<int>(al.t_cos.size()), n / 2);
    ev.row.head(kb) = al.t_cos.head(kb);
    ev.rb = al.t_b;
    double acc = al.t_b * (b - al.base_b) - al.ds;
    ArrayXd a = cosine_from_spectrum(yc);
    const int ka = std::min<int>(static_cast<int>(al.base_cos.size()), static_cast<int>(a.size()));
    for (int k = 0; k < ka && k < kb; ++k) acc += al.t_cos[k] * (a[k] - al.base_cos[k]);
    ev.value = acc;
  }
  return ev;
}

// u-metric norms: ||S y||^2 = (2 pi / n) sum F^2 q_u, ||y||^2 likewise with u_q.
double residual_norm_u(IterKernel& K, const ArrayXcd& F, const std::optional<AuxMap>& aux) {
  ArrayXcd fs;
  kernels::samples_from_coeffs(F, fs);
  ArrayXd f2 = fs.real().square();
  double num;
  if (aux && aux->L != 1.0)
    num = (f2 * aux->q_u).sum();
  else
    num = f2.sum();
  return std::sqrt(num * 2.0 * pi / K.n);
}

double field_norm_u(const ArrayXcd& yc, const std::optional<AuxMap>& aux) {
  ArrayXcd ys;
  kernels::samples_from_coeffs(yc, ys);
  ArrayXd y2 = ys.real().square();
  const int n = static_cast<int>(yc.size());
  double num;
  if (aux && aux->L != 1.0)
    num = (y2 * aux->u_q).sum();
  else
    num = y2.sum();
  return std::sqrt(num * 2.0 * pi / n);
}

}  // namespace

const WaveKernel& StokesWave::kernel() const {
  static std::mutex kmutex;
  std::lock_guard<std::mutex> lock(kmutex);
  // Copies of a wave share the cached kernel, so a later in-place edit of the
  // wave data can leave the pointer stale; validate before trusting it. The
  // cosine reconstruction is exact in IEEE arithmetic (halves and doubles).
  if (kernel_ && kernel_->n == n() && kernel_->c == c && kernel_->g == g) {
    const ArrayXd a = cosine_from_spectrum(kernel_->yc);
    if (a.size() == y_hat.size() && (a == y_hat).all()) return *kernel_;
  }
  kernel_.reset();
  auto K = std::make_shared<WaveKernel>();
  const int n = this->n();
  K->n = n;
  K->m = kernels::padded_size(n);
  K->c = c;
  K->g = g;
  K->b = c * c;
  K->uniform = uniform();
  K->yc = spectrum_from_cosine(y_hat, n);
  K->kyc = K->yc;
  kernels::mul_abs_k(K->kyc, 0.0);
  kernels::Dealias de(n);
  ArrayXcd tmp;
  de.to_padded(K->yc, tmp);
  K->y_p = tmp.real();
  de.to_padded(K->kyc, tmp);
  K->ky_p = tmp.real();
  K->uq_p = padded_uq(aux, K->m);
  if (K->uniform) {
    ArrayXcd yuc = K->yc;
    const int nn = n;
    for (int mm = 0; mm < nn; ++mm) yuc[mm] *= cplx(0.0, wavenumber(mm, nn));
    de.to_padded(yuc, tmp);
    K->yu_p = tmp.real();
    K->xu_p = 1.0 + K->ky_p;
    K->W_p = K->xu_p.square() + K->yu_p.square();
    K->min_W = K->W_p.minCoeff();
  }
  kernel_ = std::move(K);
  return *kernel_;
}

StokesWave flat_wave(int n_modes, double g) {
  StokesWave w;
  w.grid = build_grid(n_modes);
  w.y_hat = ArrayXd::Zero(n_modes / 2 + 1);
  w.g = g;
  w.c = std::sqrt(g);
  w.s = 0.0;
  w.converged = true;
  return w;
}

PeriodicField babenko_residual(const StokesWave& w) {
  IterKernel K(w.n(), w.g, w.aux);
  K.set_point(spectrum_from_cosine(w.y_hat, w.n()), w.c * w.c);
  ArrayXcd F;
  K.residual(F);
  ArrayXcd fs;
  kernels::samples_from_coeffs(F, fs);
  ArrayXd samples = fs.real();
  if (w.aux && w.aux->L != 1.0) samples *= w.aux->q_u;  // S y = q_u F
  return PeriodicField::from_samples(w.grid, std::move(samples));
}

double babenko_residual_norm(const StokesWave& w) {
  IterKernel K(w.n(), w.g, w.aux);
  const ArrayXcd yc = spectrum_from_cosine(w.y_hat, w.n());
  K.set_point(yc, w.c * w.c);
  ArrayXcd F;
  K.residual(F);
  const double ny = field_norm_u(yc, w.aux);
  return residual_norm_u(K, F, w.aux) / (ny > 0 ? ny : 1.0);
}

PeriodicField apply_S1(const StokesWave& w, const PeriodicField& v) {
  if (!w.uniform()) throw Error("apply_S1 needs a uniform wave; use apply_symmetrized for auxiliary grids");
  IterKernel K(w.n(), w.g, w.aux);
  K.set_point(spectrum_from_cosine(w.y_hat, w.n()), w.c * w.c);
  ArrayXcd out;
  K.jacobian(v.coeffs(), out);
  return PeriodicField::from_coeffs(w.grid, std::move(out));
}

std::pair<StokesWave, NewtonReport> solve_newton(const StokesWave& initial, const Control& target,
                                                 const NewtonOptions& opt) {
  const int n = initial.n();
  const double g = initial.g;
  StokesWave w;
  w.grid = initial.grid;
  w.aux = initial.aux;
  w.g = g;
  NewtonReport rep;

  IterKernel K(n, g, w.aux);
  ArrayXcd yc = spectrum_from_cosine(initial.y_hat, n);
  double b = initial.c * initial.c;

  // Jacobi similarity scaling by the flat symbol keeps the inner solver the
  // plain conjugate residual while collapsing the spread of |c^2 k - g|.
  ArrayXd dscale(n);
  auto build_scale = [&](double bb) {
    for (int m = 0; m < n; ++m)
      dscale[m] = std::sqrt(std::max(std::abs(bb * std::abs(wavenumber(m, n)) - g), 0.3 * g));
  };

  const int max_inner = opt.max_inner > 0 ? opt.max_inner : 4000 + 2 * n;
  ArrayXcd F(n), rhs(n), z1(n), z2(n), wb(n);

  // The Jacobian has the odd translational null vector y_u; confining the
  // solve to the even-real subspace keeps the system nonsingular and scrubs
  // the roundoff that would otherwise leak into that direction.
  auto inner_solve = [&](const ArrayXcd& rhs_in, double tol, ArrayXcd& out) -> bool {
    LinearOperator<cplx> A;
    A.dimension = n;
    A.adjoint_tag = AdjointTag::hermitian;
    A.apply = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
      ArrayXcd xin = x.array() / dscale;
      project_even_real(xin);
      ArrayXcd yout;
      K.jacobian(xin, yout);
      project_even_real(yout);
      y = (yout / dscale).matrix();
    };
    ArrayXcd rhs_proj = rhs_in;
    project_even_real(rhs_proj);
    Eigen::VectorXcd bvec = (rhs_proj / dscale).matrix();
    auto [x, r] = conjugate_residual<cplx>(A, bvec, tol, max_inner);
    if (!r.converged) {
      auto [x2, r2] = minres<cplx>(A, bvec, ArrayXd::Ones(n), tol, max_inner);
      if (!r2.converged) return false;
      x = x2;
    }
    out = x.array() / dscale;
    project_even_real(out);
    return true;
  };

  double resv = 0.0;
  for (int it = 0; it <= opt.max_newton; ++it) {
    K.set_point(yc, b);
    K.residual(F);
    const double ny = std::max(field_norm_u(yc, w.aux), 1e-30);
    resv = residual_norm_u(K, F, w.aux) / ny;
    const ControlEval ctrl = eval_control(target, yc, b, n);
    rep.residual_history.push_back(resv);
    rep.iterations = it;
    const bool eq_ok = resv <= opt.tol && std::abs(ctrl.value) <= 1e-12 * (1.0 + std::abs(b));
    if (eq_ok) {
      rep.converged = true;
      if (!opt.polish) break;
    }
    if (it == opt.max_newton) break;
    // After convergence, polish pushes the residual to the roundoff floor.
    if (rep.converged) {
      const double prev = rep.residual_history[rep.residual_history.size() - 2];
      if (rep.residual_history.size() >= 2 && resv > 0.5 * prev) break;
      if (resv < 1e-15) break;
    }

    build_scale(b);
    double itol = resv <= 1e2 * opt.tol ? opt.inner_tol_final : opt.inner_tol;
    if (rep.converged) itol = 1e-10;
    rhs = -F;
    if (!inner_solve(rhs, itol, z1)) break;
    wb = K.kyc;
    if (!inner_solve(wb, itol, z2)) break;

    const double denom = ctrl.rb - ctrl_dot(ctrl.row, z2);
    if (denom == 0.0) break;
    const double db = -(ctrl.value + ctrl_dot(ctrl.row, z1)) / denom;
    yc += z1 - db * z2;
    project_even_real(yc);
    b += db;
    if (!(b > 0.0) || !yc.isFinite().all()) {
      rep.converged = false;
      break;
    }
  }

  rep.residual = resv;
  w.y_hat = cosine_from_spectrum(yc);
  w.y_hat[n / 2] = 0.0;
  w.c = std::sqrt(b);
  w.s = compute_steepness(w);
  w.converged = rep.converged;
  return {w, rep};
}

double compute_steepness(const StokesWave& w) {
  // s = (y(0) - y(pi)) / (2 pi); the aux map fixes q = 0 <-> u = 0 and
  // q = pi <-> u = pi, so cosine sums in the solve coordinate apply directly.
  double odd = 0.0;
  for (int k = 1; k < w.n() / 2; k += 2) odd += w.y_hat[k];
  return odd / pi;
}

std::pair<double, double> compute_hamiltonian(const StokesWave& w) {
  const WaveKernel& K = w.kernel();
  double kin = 0.0;
  for (int k = 1; k < w.n() / 2; ++k) kin += k * w.y_hat[k] * w.y_hat[k];
  kin *= 0.5 * pi * K.b;
  const double pot = 0.5 * w.g * (2.0 * pi / K.m) * (K.y_p.square() * (K.uq_p + K.ky_p)).sum();
  return {kin, pot};
}

std::pair<ArrayXd, ArrayXd> surface_from_wave(const StokesWave& w) {
  const ArrayXcd yc = spectrum_from_cosine(w.y_hat, w.n());
  ArrayXcd hc = yc;
  kernels::mul_isign_k(hc, 0.0);
  hc[w.n() / 2] = 0.0;
  ArrayXd h;
  kernels::real_from_coeffs(hc, h);
  ArrayXd y;
  {
    ArrayXcd ys;
    kernels::samples_from_coeffs(yc, ys);
    y = ys.real();
  }
  if (w.uniform()) {
    return {w.grid->nodes - h, y};
  }
  // x(u(q)) = u(q) - H_q y + (1/2pi) \int H_q y u_q dq  (zero u-mean gauge)
  const double corr = (h * w.aux->u_q).sum() / w.n();
  return {w.aux->u_of_q - h + corr, y};
}

StokesWave resample_wave(const StokesWave& w, double L_new, int n_new) {
  const int n2 = n_new > 0 ? n_new : w.n();
  const double L_old = w.L();
  auto grid2 = build_grid(n2);
  std::optional<AuxMap> aux2;
  if (L_new != 1.0) aux2 = build_aux_map(L_new, n2);

  // theta_j = q_old(u_new(q'_j)); endpoints map to themselves.
  ArrayXd theta(n2);
  for (int j = 0; j < n2; ++j) {
    const double q2 = grid2->nodes[j];
    const double u = aux2 ? aux2->u_of_q[j] : q2;
    theta[j] = j == 0 ? -pi : 2.0 * std::atan(std::tan(0.5 * u) / L_old);
  }
  // Clenshaw-style accumulation of sum_k a_k cos(k theta).
  ArrayXd ck = ArrayXd::Ones(n2), ckm1(n2), cth = theta.cos();
  ArrayXd acc = ArrayXd::Constant(n2, w.y_hat[0]);
  ckm1 = ck;
  ck = cth;
  for (int k = 1; k <= w.n() / 2; ++k) {
    if (w.y_hat[k] != 0.0) acc += w.y_hat[k] * ck;
    ArrayXd next = 2.0 * cth * ck - ckm1;
    ckm1 = ck;
    ck = next;
  }

  StokesWave out;
  out.grid = grid2;
  out.aux = aux2;
  ArrayXcd cc;
  kernels::coeffs_from_real(acc, cc);
  out.y_hat = cosine_from_spectrum(cc);
  out.y_hat[n2 / 2] = 0.0;
  out.c = w.c;
  out.g = w.g;
  out.s = compute_steepness(out);
  out.converged = false;
  return out;
}

StokesWave resample_to_uniform(const StokesWave& w, int n_new) {
  if (w.uniform()) return n_new > 0 && n_new != w.n() ? pad_wave(w, n_new) : w;
  return resample_wave(w, 1.0, n_new > 0 ? n_new : 2 * w.n());
}

StokesWave pad_wave(const StokesWave& w, int n_new) {
  if (n_new == w.n()) return w;
  StokesWave out;
  out.grid = build_grid(n_new);
  if (w.aux && w.aux->L != 1.0) out.aux = build_aux_map(w.aux->L, n_new);
  out.y_hat = ArrayXd::Zero(n_new / 2 + 1);
  const int kmax = std::min(w.n() / 2, n_new / 2);
  out.y_hat.head(kmax) = w.y_hat.head(kmax);
  if (n_new < w.n()) {
    double tail = 0.0, total = 0.0;
    for (int k = 0; k <= w.n() / 2; ++k) {
      const double e = w.y_hat[k] * w.y_hat[k];
      total += e;
      if (k >= n_new / 2) tail += e;
    }
    if (total > 0 && tail > 1e-13 * total)
      throw Error("pad_wave: shrink would discard spectral tail energy");
  }
  out.y_hat[n_new / 2] = 0.0;
  out.c = w.c;
  out.g = w.g;
  out.s = w.s;
  out.converged = w.converged;
  return out;
}

namespace {

// Third-order small-amplitude expansion used to enter the branch from flat.
StokesWave expansion_wave(int n, double g, double a) {
  StokesWave w = flat_wave(n, g);
  w.y_hat[0] = -0.5 * a * a;
  w.y_hat[1] = a;
  w.y_hat[2] = a * a;
  if (n / 2 > 3) w.y_hat[3] = 1.5 * a * a * a;
  w.c = std::sqrt(g * (1.0 + a * a));
  w.s = compute_steepness(w);
  w.converged = false;
  return w;
}

double tier_L_for(double s) {
  if (s >= 0.1405) return 0.005;
  if (s >= 0.138) return 0.05;
  if (s >= 0.13) return 0.25;
  return 1.0;
}

double top_quartile_tail_ratio(const StokesWave& w) {
  const int half = w.n() / 2;
  double tail = 0.0, total = 0.0;
  for (int k = 0; k <= half; ++k) {
    const double e = w.y_hat[k] * w.y_hat[k];
    total += e;
    if (k >= 3 * half / 4) tail += e;
  }
  return total > 0 ? std::sqrt(tail / total) : 0.0;
}

}  // namespace

BranchState continue_branch(const StokesWave& start, double s_target, const StepPolicy& policy) {
  if (s_target >= kLimitingSteepness)
    throw Error("target steepness exceeds the limiting wave");
  BranchState st;
  auto record = [&](const StokesWave& w) {
    if (!st.waves.empty() && w.s <= st.waves.back().s) return;
    st.waves.push_back(w);
    st.speed_curve.emplace_back(w.s, w.c);
    auto [kin, pot] = compute_hamiltonian(w);
    st.hamiltonian_curve.emplace_back(w.s, kin + pot);
  };

  StokesWave cur = start;
  NewtonOptions nopt = policy.newton;

  // Bootstrap off the flat state through the small-amplitude expansion.
  if (cur.s <= 1e-14) {
    double a = std::min(policy.da1, 0.5 * pi * s_target);
    for (;;) {
      if (a < policy.min_da1) throw Error("continuation could not leave the flat state");
      auto [w1, r1] = solve_newton(expansion_wave(cur.n(), cur.g, a), FirstHarmonic{a}, nopt);
      if (r1.converged) {
        cur = w1;
        break;
      }
      a *= 0.5;
    }
    record(cur);
  } else {
    record(cur);
  }

  double da = policy.da1;
  double ds_arc = 0.0;
  StokesWave prev;  // previous wave of the same discretization, for tangents
  bool have_prev = false;

  int guard = 0;
  while (cur.s < s_target - 1e-13) {
    if (++guard > 4000) throw Error("continuation step limit exceeded");

    // Resolution refinement: double n once the top-quartile tail emerges.
    if (top_quartile_tail_ratio(cur) > policy.tail_ratio) {
      if (2 * cur.n() > policy.max_n)
        throw Error("resolution cap reached before target steepness");
      auto padded = pad_wave(cur, 2 * cur.n());
      auto [wr, rr] = solve_newton(padded, Steepness{cur.s}, nopt);
      if (!rr.converged) throw Error("re-convergence after refinement failed");
      cur = wr;
      have_prev = false;
      record(cur);
      continue;
    }
    // Auxiliary-map tier for steep waves.
    if (policy.auto_L_tiers && tier_L_for(cur.s) != cur.L()) {
      auto res = resample_wave(cur, tier_L_for(cur.s), cur.n());
      auto [wr, rr] = solve_newton(res, Steepness{cur.s}, nopt);
      if (!rr.converged) throw Error("re-convergence after aux-map switch failed");
      cur = wr;
      have_prev = false;
      record(cur);
      continue;
    }

    const bool use_arc = cur.s >= policy.arclength_after_s && have_prev;
    StokesWave guess = cur;
    Control ctrl = FirstHarmonic{0.0};

    if (!use_arc) {
      const double a1 = cur.y_hat[1];
      if (cur.s >= policy.arclength_after_s && !have_prev) {
        // Rebuild a tangent pair after a discretization change.
        const double ds_small = std::min(1e-4, 0.5 * (s_target - cur.s));
        ctrl = Steepness{cur.s + ds_small};
      } else {
        ctrl = FirstHarmonic{a1 + da};
      }
    } else {
      ArrayXd tc = cur.y_hat.head(cur.n() / 2) - prev.y_hat.head(cur.n() / 2);
      double tb = cur.c * cur.c - prev.c * prev.c;
      const double tn = std::sqrt(tc.square().sum() + tb * tb);
      if (ds_arc == 0.0) ds_arc = tn;
      tc /= tn;
      tb /= tn;
      Arclength al;
      al.t_cos = tc;
      al.t_b = tb;
      al.base_cos = cur.y_hat.head(cur.n() / 2);
      al.base_b = cur.c * cur.c;
      al.ds = ds_arc;
      ctrl = al;
      // Tangent predictor.
      guess.y_hat.head(cur.n() / 2) += ds_arc * tc;
      guess.c = std::sqrt(cur.c * cur.c + ds_arc * tb);
    }

    auto [wn, rn] = solve_newton(guess, ctrl, nopt);
    const bool accept = rn.converged && wn.s > cur.s;
    if (!accept) {
      if (use_arc) {
        ds_arc *= 0.5;
        if (ds_arc < 1e-10) throw Error("arclength continuation stalled");
      } else {
        da *= 0.5;
        if (da < policy.min_da1) throw Error("continuation step underflow");
      }
      continue;
    }

    if (wn.s >= s_target) {
      // Land exactly on the target from the previous converged wave.
      auto [wl, rl] = solve_newton(cur, Steepness{s_target}, nopt);
      if (rl.converged) {
        cur = wl;
        record(cur);
        break;
      }
      // Fall through: tighten toward the target by halving.
      if (use_arc)
        ds_arc *= 0.5;
      else
        da *= 0.5;
      if ((use_arc && ds_arc < 1e-10) || (!use_arc && da < policy.min_da1))
        throw Error("failed to land on target steepness");
      continue;
    }

    prev = cur;
    have_prev = true;
    cur = wn;
    record(cur);
    if (rn.iterations <= 5) {
      if (use_arc)
        ds_arc = std::min(ds_arc * policy.grow, 0.05);
      else
        da = std::min(da * policy.grow, 0.08);
    }
  }

  return st;
}

}  // namespace stokespec
