#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stokespec/babenko_spectrum.hpp"
#include "stokespec/krylov.hpp"
#include "stokespec/stability.hpp"

using namespace stokespec;
using std::numbers::pi;

namespace {

StokesWave wave_at(double s, int n) {
  auto branch = continue_branch(flat_wave(n), s);
  StokesWave w = branch.waves.back();
  REQUIRE(w.converged);
  REQUIRE(w.uniform());
  return w;
}

// Probes stay well inside the retained band so that products of probe and
// wave never spill past the de-aliasing cut; identities then hold to
// roundoff rather than to the truncation tail.
ArrayXcd band_limited(int n, unsigned seed) {
  auto v = random_vector<cplx>(n, seed);
  ArrayXcd c = ArrayXcd::Zero(n);
  for (int m = 0; m < n; ++m)
    if (std::abs(wavenumber(m, n)) <= n / 8) c[m] = v[m];
  return c;
}

double rel_diff(cplx a, cplx b) { return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-300); }

// Dense exponential-basis machinery, direct summation throughout.
struct DenseOps {
  int n;
  double mu;
  Eigen::MatrixXcd E, H, Kinv, S1, Q;

  DenseOps(const StokesWave& w, double mu_in) : n(w.n()), mu(mu_in) {
    const double g = w.g, b = w.c * w.c;
    E.resize(n, n);
    Eigen::VectorXd absk(n);
    Eigen::VectorXcd isgn(n);
    for (int m = 0; m < n; ++m) {
      const double km = wavenumber(m, n) + mu;
      absk[m] = std::abs(km);
      isgn[m] = cplx(0.0, km > 0 ? 1.0 : (km < 0 ? -1.0 : 0.0));
      for (int j = 0; j < n; ++j)
        E(j, m) = std::exp(cplx(0.0, wavenumber(m, n) * (-pi + 2.0 * pi * j / n)));
    }
    H = E * isgn.asDiagonal() * E.adjoint() / double(n);
    Kinv = E * absk.cwiseMax(1e-300).cwiseInverse().asDiagonal() * E.adjoint() / double(n);
    Eigen::MatrixXcd K = E * absk.asDiagonal() * E.adjoint() / double(n);

    Eigen::VectorXd y(n), ky(n), yu(n);
    for (int j = 0; j < n; ++j) {
      const double u = -pi + 2.0 * pi * j / n;
      double sy = w.y_hat[0], sk = 0.0, su = 0.0;
      for (int k = 1; k < w.y_hat.size(); ++k) {
        sy += w.y_hat[k] * std::cos(k * u);
        sk += k * w.y_hat[k] * std::cos(k * u);
        su -= k * w.y_hat[k] * std::sin(k * u);
      }
      y[j] = sy;
      ky[j] = sk;
      yu[j] = su;
    }
    Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
    S1 = b * K - g * I - g * (y.asDiagonal() * K + Eigen::MatrixXcd(ky.asDiagonal()) +
                              K * y.asDiagonal());
    Eigen::MatrixXcd Omega =
        Eigen::MatrixXcd((1.0 + ky.array()).matrix().asDiagonal()) + yu.asDiagonal() * H;
    Q = Omega.adjoint() * Kinv * Omega;
  }
};

}  // namespace

TEST_CASE("stability operator identities hold on a solved wave") {
  StokesWave w = wave_at(0.10, 256);
  for (double mu : {0.0, 0.3, 0.5, 0.9}) {
    CAPTURE(mu);
    ArrayXcd fc = band_limited(w.n(), 11), gc = band_limited(w.n(), 12);
    if (mu == 0.0) {
      // align the probes with the zero-mode condition first
      for (ArrayXcd* c : {&fc, &gc}) {
        QuasiField t = QuasiField::from_coeffs(w.grid, mu, *c);
        (*c)[0] -= apply_omega21_mu(w, t).coeff(0);  // mean of x_u is one
      }
    }
    QuasiField f = QuasiField::from_coeffs(w.grid, mu, fc);
    QuasiField g = QuasiField::from_coeffs(w.grid, mu, gc);

    // reconstruction inverts the conjugate transfer map
    QuasiField of = apply_omega21_dagger_mu(w, f);
    QuasiField back = apply_R12_dagger_mu(w, of);
    ArrayXcd d = back.coeffs() - f.coeffs();
    CHECK(std::sqrt(d.abs2().sum() / fc.abs2().sum()) < 1e-10);

    // adjoint pairing of the transfer maps
    CHECK(rel_diff(dot(apply_omega21_mu(w, f), g), dot(f, apply_omega21_dagger_mu(w, g))) <
          1e-12);

    // hermiticity and positivity
    QuasiField Qf = apply_Q_mu(w, f);
    CHECK(rel_diff(dot(f, apply_Q_mu(w, g)), dot(Qf, g)) < 1e-12);
    cplx quad = dot(f, Qf);
    CHECK(quad.real() > 0.0);
    CHECK(std::abs(quad.imag()) < 1e-12 * quad.real());
    CHECK(rel_diff(dot(f, apply_S2_mu(w, g, 0.37)), dot(apply_S2_mu(w, f, 0.37), g)) < 1e-11);

    // sigma = 0 collapses the shifted form onto the plain linearization
    QuasiField s2 = apply_S2_mu(w, f, 0.0);
    QuasiField s1 = apply_S1_mu(w, f);
    CHECK((s2.coeffs() - s1.coeffs()).abs().maxCoeff() < 1e-12);

    // the shifted form carries both correction terms at full strength
    const double sg = 0.83;
    QuasiField s2s = apply_S2_mu(w, f, sg);
    ArrayXcd hc = f.coeffs();
    kernels::mul_isign_k(hc, mu);
    ArrayXcd want =
        s1.coeffs() + cplx(0.0, 2.0 * w.c * sg) * hc + sg * sg * Qf.coeffs();
    CHECK((s2s.coeffs() - want).abs().maxCoeff() < 1e-11 * want.abs().maxCoeff());
  }
}

TEST_CASE("mean-flow violation at mu = 0 is rejected, not silently projected") {
  StokesWave w = wave_at(0.05, 128);
  ArrayXcd c = ArrayXcd::Zero(w.n());
  c[0] = 1.0;  // constant envelope: Omega21 of it has unit mean
  CHECK_THROWS_AS((void)apply_Q_mu(w, QuasiField::from_coeffs(w.grid, 0.0, c)), Error);
}

TEST_CASE("stability operators require the uniform grid") {
  StokesWave w = resample_wave(wave_at(0.08, 128), 0.25);
  ArrayXcd c = band_limited(w.n(), 3);
  CHECK_THROWS_AS((void)apply_Q_mu(w, QuasiField::from_coeffs(w.grid, 0.3, c)), Error);
}

TEST_CASE("block resolvent matches the closed-form single-mode inverse on flat water") {
  StokesWave flat = flat_wave(64);
  const double mu = 0.3, sigma = 0.25, c = 1.0;
  for (int j : {-5, 2, 9}) {
    ArrayXcd pc = ArrayXcd::Zero(64), qc = ArrayXcd::Zero(64);
    const int m = (j % 64 + 64) % 64;
    pc[m] = cplx(0.7, -0.2);
    qc[m] = cplx(-0.1, 0.4);
    PerturbationState in;
    in.mu = mu;
    in.delta_phi = QuasiField::from_coeffs(flat.grid, mu, pc);
    in.delta_y = QuasiField::from_coeffs(flat.grid, mu, qc);
    PerturbationState out = block_shift_invert(flat, in, sigma);

    const double km = j + mu;
    Eigen::Matrix2cd M;
    const cplx isgn(0.0, km > 0 ? 1.0 : -1.0);
    M << std::abs(km), 0.0, 0.0, std::abs(km) - 1.0;  // diag(Q^-1, S1) symbols
    Eigen::Matrix2cd J;
    J << 0.0, 1.0, 1.0, -2.0 * c * isgn;
    Eigen::Vector2cd rhs(pc[m], qc[m]);
    Eigen::Vector2cd want = (M - cplx(0.0, sigma) * J).inverse() * rhs;
    CHECK(std::abs(out.delta_phi.coeff(j) - want[0]) < 1e-10);
    CHECK(std::abs(out.delta_y.coeff(j) - want[1]) < 1e-10);
    // nothing leaks into other modes
    ArrayXcd rest = out.delta_y.coeffs();
    rest[m] = 0.0;
    CHECK(rest.abs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("block pair map composes with its inverse") {
  StokesWave w = wave_at(0.06, 128);
  PerturbationState st;
  st.mu = 0.4;
  st.delta_phi = QuasiField::from_coeffs(w.grid, 0.4, band_limited(w.n(), 21));
  st.delta_y = QuasiField::from_coeffs(w.grid, 0.4, band_limited(w.n(), 22));
  PerturbationState j = apply_J_mu(w, st);
  // [[0,1],[1,d]]^-1 = [[-d,1],[1,0]]
  QuasiField h = apply_hilbert_mu(j.delta_phi);
  ArrayXcd top = j.delta_y.coeffs() + 2.0 * w.c * h.coeffs();
  CHECK((top - st.delta_phi.coeffs()).abs().maxCoeff() < 1e-13);
  CHECK((j.delta_phi.coeffs() - st.delta_y.coeffs()).abs().maxCoeff() == 0.0);
}

TEST_CASE("eigenvalues match a dense build of the quadratic pencil") {
  StokesWave w = wave_at(0.02, 48);
  const double mu = 0.3, c = w.c;
  DenseOps ops(w, mu);
  const int n = w.n();
  Eigen::MatrixXcd M2(2 * n, 2 * n);
  M2.setZero();
  M2.topRightCorner(n, n).setIdentity();
  Eigen::MatrixXcd Qinv = ops.Q.fullPivLu().inverse();
  M2.bottomLeftCorner(n, n) = Qinv * ops.S1;
  M2.bottomRightCorner(n, n) = 2.0 * c * Qinv * ops.H;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M2);

  auto pairs = qep_eigs_near(w, mu, 0.4, 6);
  REQUIRE(pairs.size() >= 4);
  for (const auto& p : pairs) {
    REQUIRE(p.converged);
    double best = 1e9;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      best = std::min(best, std::abs(p.lambda - es.eigenvalues()[i]));
    CHECK(best < 1e-8);
  }
}

TEST_CASE("unstable spectrum is closed under complex conjugation") {
  StokesWave w = wave_at(0.10, 256);
  auto pairs = qep_eigs_near(w, 0.5, 0.0, 6);
  REQUIRE(!pairs.empty());
  bool any_growth = false;
  for (const auto& p : pairs) {
    if (p.lambda.real() < 1e-6) continue;
    any_growth = true;
    double best = 1e9;
    for (const auto& q : pairs) best = std::min(best, std::abs(q.lambda - std::conj(p.lambda)));
    CHECK(best < 1e-6);
  }
  CHECK(any_growth);  // modulational instability at this steepness
}

TEST_CASE("reported residual is the true pencil defect") {
  StokesWave w = wave_at(0.08, 128);
  auto pairs = qep_eigs_near(w, 0.2, 0.1, 4);
  REQUIRE(!pairs.empty());
  const auto& p = pairs.front();
  const cplx lam = p.lambda;
  QuasiField qy = apply_Q_mu(w, p.state.delta_y);
  QuasiField hy = apply_hilbert_mu(p.state.delta_y);
  QuasiField s1y = apply_S1_mu(w, p.state.delta_y);
  ArrayXcd res =
      lam * lam * qy.coeffs() - 2.0 * w.c * lam * hy.coeffs() - s1y.coeffs();
  CHECK(std::sqrt(res.abs2().sum()) == doctest::Approx(p.residual).epsilon(1e-6));
  // the reported state is gauge-fixed: unit norm, real positive crest sample
  CHECK(std::sqrt(p.state.delta_y.coeffs().abs2().sum()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sweeps are deterministic and expose the growth summary") {
  StokesWave w = wave_at(0.08, 128);
  ShiftPolicy pol;
  std::vector<double> mus = {0.2, 0.35, 0.5};
  FloquetSweep a = floquet_sweep(w, mus, pol, 4);
  FloquetSweep b = floquet_sweep(w, mus, pol, 4);
  write_sweep("sweep_a.tsv", w, a);
  write_sweep("sweep_b.tsv", w, b);
  auto slurp = [](const char* p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp("sweep_a.tsv") == slurp("sweep_b.tsv"));
  std::remove("sweep_a.tsv");
  std::remove("sweep_b.tsv");

  double gmax = 0.0;
  for (const auto& spec : a.spectra)
    for (const auto& p : spec) gmax = std::max(gmax, p.lambda.real());
  CHECK(a.max_growth.second == gmax);
  CHECK(a.max_growth.second > 1e-3);
  for (const auto& e : a.errors) CHECK(e.empty());
}

TEST_CASE("flat water is spectrally stable") {
  StokesWave flat = flat_wave(64);
  ShiftPolicy pol;
  FloquetSweep sweep = floquet_sweep(flat, {0.1, 0.3, 0.7}, pol, 6);
  CHECK(sweep.max_growth.second <= 1e-8);
}

TEST_CASE("logarithmic schedules and thread counts") {
  auto mus = log_spaced_mu(1e-4, 0.5, 9);
  REQUIRE(mus.size() == 9);
  CHECK(mus.front() == 1e-4);
  CHECK(mus.back() == 0.5);
  for (size_t i = 1; i < mus.size(); ++i) {
    CHECK(mus[i] > mus[i - 1]);
    CHECK(mus[i] / mus[i - 1] == doctest::Approx(mus[1] / mus[0]).epsilon(1e-10));
  }
  CHECK_THROWS_AS((void)log_spaced_mu(0.0, 0.5, 5), Error);
  CHECK(thread_count() >= 1);
  CHECK_THROWS_AS((void)floquet_sweep(flat_wave(32), {1.2}, ShiftPolicy{}, 2), Error);
}
