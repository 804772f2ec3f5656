#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <string>
#include <vector>

// Matrix-free iterative solvers: MINRES and conjugate residual for hermitian
// (possibly indefinite) systems, and a Krylov-Schur Arnoldi eigensolver for
// shift-inverted operators. Complex arithmetic throughout; real problems are
// embedded. All randomness is seeded, so runs are reproducible.

namespace stokespec {

enum class AdjointTag { hermitian, skew, general };

template <class Scalar>
struct LinearOperator {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Eigen::Index dimension = 0;
  std::function<void(const Vec&, Vec&)> apply;
  AdjointTag adjoint_tag = AdjointTag::general;
};

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  std::string diagnostic;
};

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> random_vector(Eigen::Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if constexpr (std::is_same_v<Scalar, std::complex<double>>)
      v[i] = Scalar(dist(rng), dist(rng));
    else
      v[i] = dist(rng);
  }
  return v;
}

// Hermiticity probe used by property tests: max symmetry defect over pairs.
template <class Scalar>
double hermitian_defect(const LinearOperator<Scalar>& A, int probes, unsigned seed) {
  using Vec = typename LinearOperator<Scalar>::Vec;
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    Vec x = random_vector<Scalar>(A.dimension, seed + 2 * p);
    Vec y = random_vector<Scalar>(A.dimension, seed + 2 * p + 1);
    Vec Ax(A.dimension), Ay(A.dimension);
    A.apply(x, Ax);
    A.apply(y, Ay);
    const Scalar lhs = x.dot(Ay);  // x^H A y
    const Scalar rhs = Ax.dot(y);
    worst = std::max(worst, std::abs(lhs - rhs) / (1e-300 + std::abs(lhs) + std::abs(rhs)));
  }
  return worst;
}

// MINRES for hermitian A with a positive diagonal preconditioner
// (Paige-Saunders recurrence). Residual norms are measured, and guaranteed
// non-increasing, in the preconditioned norm.
template <class Scalar>
std::pair<typename LinearOperator<Scalar>::Vec, SolveReport> minres(
    const LinearOperator<Scalar>& A, const typename LinearOperator<Scalar>::Vec& b,
    const Eigen::ArrayXd& precond, double tol, int max_iter) {
  using Vec = typename LinearOperator<Scalar>::Vec;
  const Eigen::Index n = A.dimension;
  SolveReport rep;
  Vec x = Vec::Zero(n);
  if ((precond <= 0.0).any()) {
    rep.diagnostic = "preconditioner entries must be positive";
    return {x, rep};
  }
  const auto minv = (1.0 / precond).matrix().template cast<Scalar>().eval();

  Vec r1 = b;
  Vec y = minv.cwiseProduct(b);
  double beta1 = std::real(b.dot(y));
  if (beta1 < 0.0) {
    rep.diagnostic = "indefinite preconditioner";
    return {x, rep};
  }
  beta1 = std::sqrt(beta1);
  if (beta1 == 0.0) {
    rep.converged = true;
    return {x, rep};
  }

  double oldb = 0, beta = beta1, dbar = 0, epsln = 0, phibar = beta1;
  double cs = -1, sn = 0;
  Vec w = Vec::Zero(n), w2 = Vec::Zero(n), r2 = r1, v(n), tmp(n);

  for (int itn = 1; itn <= max_iter; ++itn) {
    v = y / beta;
    A.apply(v, tmp);
    y = tmp;
    if (itn >= 2) y -= (beta / oldb) * r1;
    const double alfa = std::real(v.dot(y));
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    y = minv.cwiseProduct(r2);
    oldb = beta;
    const double beta2 = std::real(r2.dot(y));
    if (beta2 < 0.0) {
      rep.diagnostic = "lanczos breakdown (preconditioner lost positivity)";
      break;
    }
    beta = std::sqrt(beta2);

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::hypot(gbar, beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;  // |sn| <= 1: the residual cannot grow

    tmp = (v - oldeps * w - delta * w2) / gamma;
    w = w2;
    w2 = tmp;
    x += phi * tmp;

    rep.iterations = itn;
    rep.relative_residual = phibar / beta1;
    if (rep.relative_residual <= tol) {
      rep.converged = true;
      break;
    }
    if (beta <= 1e-300) {  // Krylov space exhausted; x is the exact solution
      rep.converged = rep.relative_residual <= tol;
      if (!rep.converged) rep.diagnostic = "krylov space exhausted before tolerance";
      break;
    }
  }
  if (!rep.converged && rep.diagnostic.empty())
    rep.diagnostic = "max iterations reached";
  return {x, rep};
}

// Conjugate residual, the Newton inner solver. Unpreconditioned; hermitian
// indefinite A is fine, breakdown (<r, Ar> = 0 with r != 0) is surfaced as
// non-convergence. For singular consistent systems the iteration stalls at
// the least-squares solution, reported via stagnation.
template <class Scalar>
std::pair<typename LinearOperator<Scalar>::Vec, SolveReport> conjugate_residual(
    const LinearOperator<Scalar>& A, const typename LinearOperator<Scalar>::Vec& b,
    double tol, int max_iter) {
  using Vec = typename LinearOperator<Scalar>::Vec;
  const Eigen::Index n = A.dimension;
  SolveReport rep;
  Vec x = Vec::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  Vec r = b, Ar(n);
  A.apply(r, Ar);
  Scalar rho = r.dot(Ar);
  Vec p = r, Ap = Ar;
  double best = 1.0;
  int stalled = 0;
  for (int itn = 1; itn <= max_iter; ++itn) {
    const double pp = Ap.squaredNorm();
    if (pp == 0.0) {
      rep.diagnostic = "search direction annihilated (rank-deficient system)";
      break;
    }
    const Scalar alpha = rho / pp;
    x += alpha * p;
    r -= alpha * Ap;
    rep.iterations = itn;
    rep.relative_residual = r.norm() / bnorm;
    if (rep.relative_residual <= tol) {
      rep.converged = true;
      break;
    }
    if (rep.relative_residual > 0.999 * best) {
      if (++stalled >= 50) {
        rep.diagnostic = "stagnation (singular or near-singular system)";
        break;
      }
    } else {
      stalled = 0;
      best = rep.relative_residual;
    }
    A.apply(r, Ar);
    const Scalar rho_new = r.dot(Ar);
    if (std::abs(rho) == 0.0) {
      rep.diagnostic = "breakdown: <r, Ar> vanished on an indefinite system";
      break;
    }
    const Scalar beta = rho_new / rho;
    rho = rho_new;
    p = r + beta * p;
    Ap = Ar + beta * Ap;
  }
  if (!rep.converged && rep.diagnostic.empty())
    rep.diagnostic = "max iterations reached";
  return {x, rep};
}

struct ArnoldiPair {
  std::complex<double> theta;
  Eigen::VectorXcd vector;
  double residual = 0.0;
  bool converged = false;
};

namespace detail {

// Swap the adjacent diagonal entries i, i+1 of an upper-triangular T by a
// unitary similarity, accumulating it into U.
inline void schur_swap(Eigen::MatrixXcd& T, Eigen::MatrixXcd& U, int i) {
  using C = std::complex<double>;
  const C a = T(i, i), b = T(i, i + 1), d = T(i + 1, i + 1);
  const C v1 = b, v2 = d - a;
  const double r = std::sqrt(std::norm(v1) + std::norm(v2));
  if (r == 0.0) return;  // equal eigenvalues, nothing to move
  Eigen::Matrix2cd G;
  G << v1 / r, -std::conj(v2) / r, v2 / r, std::conj(v1) / r;
  T.middleRows(i, 2) = G.adjoint() * T.middleRows(i, 2);
  T.middleCols(i, 2) = T.middleCols(i, 2) * G;
  U.middleCols(i, 2) = U.middleCols(i, 2) * G;
  T(i + 1, i) = 0.0;
}

// Stable-ish eigenvector of upper-triangular T for the eigenvalue at column j.
inline Eigen::VectorXcd triangular_eigvec(const Eigen::MatrixXcd& T, int j) {
  using C = std::complex<double>;
  const int m = static_cast<int>(T.rows());
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(m);
  y[j] = 1.0;
  const C theta = T(j, j);
  const double tiny = 1e-150 + 1e-14 * T.norm();
  for (int i = j - 1; i >= 0; --i) {
    C s = 0.0;
    for (int l = i + 1; l <= j; ++l) s += T(i, l) * y[l];
    C den = T(i, i) - theta;
    if (std::abs(den) < tiny) den = tiny;  // clustered diagonal guard
    y[i] = -s / den;
  }
  y.normalize();
  return y;
}

}  // namespace detail

// Krylov-Schur Arnoldi for the dominant eigenvalues of a complex operator.
// Full re-orthogonalization (two modified Gram-Schmidt passes); residuals of
// returned pairs are recomputed from an explicit operator application. An
// optional projector, which must commute with B, confines the iteration to an
// invariant subspace (used for parity-pure eigensolves).
inline std::vector<ArnoldiPair> arnoldi_eigs(
    const LinearOperator<std::complex<double>>& B, int nev, int ncv, double tol,
    int max_restarts = 60, const Eigen::VectorXcd& v0 = Eigen::VectorXcd(),
    const std::function<void(Eigen::VectorXcd&)>& projector = nullptr) {
  using C = std::complex<double>;
  using Vec = Eigen::VectorXcd;
  using Mat = Eigen::MatrixXcd;
  const Eigen::Index n = B.dimension;
  if (!(nev >= 1 && nev < ncv && ncv <= n)) throw std::invalid_argument("need nev < ncv <= dimension");
  const int m = ncv;

  Mat V(n, m + 1);
  Mat H = Mat::Zero(m + 1, m);
  Vec w(n), start = v0.size() == n ? v0 : random_vector<C>(n, 0x5eedu);
  if (projector) projector(start);
  double nrm = start.norm();
  if (nrm == 0.0) throw std::invalid_argument("zero start vector");
  V.col(0) = start / nrm;

  int p = 0;  // locked leading block size after each restart
  std::vector<ArnoldiPair> out;

  for (int restart = 0; restart < max_restarts; ++restart) {
    for (int j = p; j < m; ++j) {
      B.apply(V.col(j), w);
      if (projector) projector(w);
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const C h = V.col(i).dot(w);
          w -= h * V.col(i);
          H(i, j) += h;
        }
      }
      const double hj = w.norm();
      H(j + 1, j) = hj;
      if (hj < 1e-300) {
        // Invariant subspace found; restart the residual direction randomly.
        Vec fresh = random_vector<C>(n, 0xf00du + restart + j);
        if (projector) projector(fresh);
        for (int pass = 0; pass < 2; ++pass)
          for (int i = 0; i <= j; ++i) fresh -= V.col(i).dot(fresh) * V.col(i);
        const double fn = fresh.norm();
        if (fn < 1e-300) break;
        V.col(j + 1) = fresh / fn;
        H(j + 1, j) = 0.0;
      } else {
        V.col(j + 1) = w / hj;
      }
    }

    Eigen::ComplexSchur<Mat> schur(H.topLeftCorner(m, m));
    Mat T = schur.matrixT();
    Mat U = schur.matrixU();
    // Order the diagonal by descending magnitude (selection via adjacent swaps).
    for (int target = 0; target < m - 1; ++target) {
      int best = target;
      for (int i = target + 1; i < m; ++i)
        if (std::abs(T(i, i)) > std::abs(T(best, best))) best = i;
      for (int i = best; i > target; --i) detail::schur_swap(T, U, i - 1);
    }

    const double hm = std::abs(H(m, m - 1));
    const Eigen::RowVectorXcd brow = hm * U.row(m - 1);

    // Convergence of the wanted pairs, residuals measured on B directly.
    out.assign(nev, {});
    int nconv = 0;
    for (int i = 0; i < nev; ++i) {
      const Vec y = detail::triangular_eigvec(T, i);
      Vec x = V.leftCols(m) * (U * y);
      x.normalize();
      Vec Bx(n);
      B.apply(x, Bx);
      const C theta = x.dot(Bx);
      const double res = (Bx - theta * x).norm();
      out[i] = {theta, x, res, res <= tol};
      if (out[i].converged) ++nconv;
    }
    if (nconv == nev || restart == max_restarts - 1) break;

    // Krylov-Schur contraction: keep the leading block plus the coupling row.
    p = std::min(nev + std::max(1, (m - nev) / 2), m - 1);
    Mat Vnew = V.leftCols(m) * U.leftCols(p);
    V.leftCols(p) = Vnew;
    V.col(p) = V.col(m);
    H.setZero();
    H.topLeftCorner(p, p) = T.topLeftCorner(p, p);
    H.row(p).head(p) = brow.head(p);
  }
  return out;
}

// Plain power iteration on a resolvent apply; the caller maps the dominant
// theta back to the original spectrum.
inline std::tuple<std::complex<double>, Eigen::VectorXcd, SolveReport> shift_invert_power(
    const std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>& B_apply,
    const Eigen::VectorXcd& v0, double tol, int max_iter) {
  using C = std::complex<double>;
  SolveReport rep;
  Eigen::VectorXcd v = v0;
  double nrm = v.norm();
  if (nrm == 0.0) throw std::invalid_argument("zero start vector");
  v /= nrm;
  Eigen::VectorXcd Bv(v.size());
  C theta = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    B_apply(v, Bv);
    theta = v.dot(Bv);
    const double res = (Bv - theta * v).norm();
    rep.iterations = it;
    rep.relative_residual = std::abs(theta) > 0 ? res / std::abs(theta) : res;
    if (rep.relative_residual <= tol) {
      rep.converged = true;
      break;
    }
    nrm = Bv.norm();
    if (nrm == 0.0) {
      rep.diagnostic = "operator annihilated the iterate";
      break;
    }
    v = Bv / nrm;
  }
  if (!rep.converged && rep.diagnostic.empty())
    rep.diagnostic = "stagnation: eigenvalue not separated at this shift";
  return {theta, v, rep};
}

}  // namespace stokespec
