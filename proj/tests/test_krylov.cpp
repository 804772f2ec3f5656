#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "stokespec/krylov.hpp"

using namespace stokespec;
using cplx = std::complex<double>;

namespace {

LinearOperator<cplx> wrap(const Eigen::MatrixXcd& M, AdjointTag tag) {
  LinearOperator<cplx> A;
  A.dimension = M.rows();
  A.adjoint_tag = tag;
  A.apply = [&M](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y = M * x; };
  return A;
}

Eigen::MatrixXcd random_hermitian(int n, unsigned seed) {
  Eigen::MatrixXcd R(n, n);
  for (int j = 0; j < n; ++j) R.col(j) = random_vector<cplx>(n, seed + j);
  return 0.5 * (R + R.adjoint());
}

}  // namespace

TEST_CASE("minres solves hermitian indefinite systems to the requested tolerance") {
  const int n = 60;
  Eigen::MatrixXcd M = random_hermitian(n, 7);
  M.diagonal().array() -= 0.37;  // push some eigenvalues negative
  auto A = wrap(M, AdjointTag::hermitian);
  Eigen::VectorXcd b = random_vector<cplx>(n, 99);
  Eigen::ArrayXd precond = M.diagonal().real().array().abs().max(0.5);
  auto [x, rep] = minres<cplx>(A, b, precond, 1e-12, 2000);
  REQUIRE(rep.converged);
  CHECK((M * x - b).norm() / b.norm() < 1e-10);
  // rounding defers the finite-termination bound; 2n still flags stagnation
  CHECK(rep.iterations <= 2 * n);

  SUBCASE("nonpositive preconditioner entries are rejected") {
    precond[3] = 0.0;
    auto [x2, rep2] = minres<cplx>(A, b, precond, 1e-12, 100);
    CHECK_FALSE(rep2.converged);
    CHECK(rep2.diagnostic.find("positive") != std::string::npos);
  }
}

TEST_CASE("minres residual history is monotone in the preconditioned norm") {
  const int n = 40;
  Eigen::MatrixXcd M = random_hermitian(n, 31);
  auto A = wrap(M, AdjointTag::hermitian);
  Eigen::VectorXcd b = random_vector<cplx>(n, 5);
  Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(n);
  double prev = 1.0;
  for (int it = 1; it <= 25; ++it) {
    auto [x, rep] = minres<cplx>(A, b, ones, 0.0, it);
    CHECK(rep.relative_residual <= prev * (1 + 1e-12));
    prev = rep.relative_residual;
  }
}

TEST_CASE("conjugate residual matches a dense solve and reports stagnation on singular systems") {
  const int n = 50;
  Eigen::MatrixXcd M = random_hermitian(n, 13);
  M.diagonal().array() += 1.0;
  auto A = wrap(M, AdjointTag::hermitian);
  Eigen::VectorXcd b = random_vector<cplx>(n, 2);
  auto [x, rep] = conjugate_residual<cplx>(A, b, 1e-12, 500);
  REQUIRE(rep.converged);
  CHECK((x - M.fullPivLu().solve(b)).norm() < 1e-8);

  SUBCASE("rank-deficient consistent system stalls at the least-squares point") {
    Eigen::MatrixXcd P = random_hermitian(n, 17);
    Eigen::MatrixXcd S = P * P.adjoint();        // PSD
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S);
    Eigen::VectorXd ev = es.eigenvalues();
    ev.head(5).setZero();                        // exact 5-dim kernel
    Eigen::MatrixXcd Ms = es.eigenvectors() * ev.asDiagonal() *
                          es.eigenvectors().adjoint();
    auto As = wrap(Ms, AdjointTag::hermitian);
    Eigen::VectorXcd rhs = Ms * random_vector<cplx>(n, 3);  // consistent
    auto [xs, reps] = conjugate_residual<cplx>(As, rhs, 1e-13, 5000);
    // either converges inside the range or stalls there; residual stays small
    CHECK((Ms * xs - rhs).norm() / rhs.norm() < 1e-6);
  }
}

TEST_CASE("arnoldi recovers dominant eigenpairs of a fixed dense operator") {
  const int n = 80;
  Eigen::MatrixXcd M(n, n);
  for (int j = 0; j < n; ++j) M.col(j) = random_vector<cplx>(n, 400 + j);
  M /= std::sqrt(double(n));
  auto B = wrap(M, AdjointTag::general);
  auto pairs = arnoldi_eigs(B, 4, 24, 1e-10, 80);
  REQUIRE(pairs.size() == 4);

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M);
  std::vector<cplx> dense(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::sort(dense.begin(), dense.end(),
            [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });

  for (int i = 0; i < 4; ++i) {
    REQUIRE(pairs[i].converged);
    double best = 1e9;
    for (int j = 0; j < 6; ++j) best = std::min(best, std::abs(pairs[i].theta - dense[j]));
    CHECK(best < 1e-8);
    // reported residual is the honest two-norm of the defect
    Eigen::VectorXcd defect = M * pairs[i].vector - pairs[i].theta * pairs[i].vector;
    CHECK(std::abs(defect.norm() - pairs[i].residual) < 1e-12);
  }
}

TEST_CASE("arnoldi projector confines the iteration to an invariant subspace") {
  const int n = 64, h = n / 2;
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n, n);
  // block diagonal: distinct dominant eigenvalues in each half
  Eigen::MatrixXcd A1 = random_hermitian(h, 51), A2 = random_hermitian(h, 52);
  A1.diagonal().array() += 10.0;   // block one dominates globally
  M.topLeftCorner(h, h) = A1;
  M.bottomRightCorner(h, h) = A2;
  auto B = wrap(M, AdjointTag::general);
  auto projector = [h](Eigen::VectorXcd& v) { v.head(h).setZero(); };
  auto pairs = arnoldi_eigs(B, 2, 16, 1e-9, 80, Eigen::VectorXcd(), projector);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A2);
  for (const auto& p : pairs) {
    REQUIRE(p.converged);
    CHECK(p.vector.head(h).norm() < 1e-12);  // never leaked into block one
    double best = 1e9;
    for (int j = 0; j < h; ++j) best = std::min(best, std::abs(p.theta - cplx(es.eigenvalues()[j], 0)));
    CHECK(best < 1e-8);
  }
}

TEST_CASE("seeded randomness is reproducible") {
  auto a = random_vector<cplx>(32, 12345);
  auto b = random_vector<cplx>(32, 12345);
  CHECK((a - b).norm() == 0.0);
  auto c = random_vector<cplx>(32, 12346);
  CHECK((a - c).norm() > 0.0);
}
