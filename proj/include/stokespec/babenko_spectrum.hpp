#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stokespec/stokes_wave.hpp"

namespace stokespec {

enum class Parity { even, odd, none };

const char* parity_name(Parity p);

// Eigenpair of the linearized operator about a wave, quasiperiodic envelope
// convention f(u) e^{i mu u}. The eigenfunction lives on the wave's solve
// grid; for auxiliary grids the stored field is f(u(q)) and the residual is
// still measured in the u metric (the symmetrized form is an isometry).
struct EigenPair {
  double xi = 0.0;
  QuasiField eigenfunction;
  double mu = 0.0;
  Parity parity = Parity::none;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct BranchPoint {
  enum class Kind { turning_point, secondary_bifurcation };
  double s_star = 0.0;
  double mu = 0.0;
  Kind kind = Kind::turning_point;
  double bracket_width = 0.0;
};

// (c^2 k_mu - g) f - g [y k_mu f + f (k y) + k_mu (y f)] on a uniform wave.
QuasiField apply_S1_mu(const StokesWave& w, const QuasiField& f);

// q_u^{1/2} A (q_u^{1/2} h) with A f = (c^2 k - g u_q) f - g (y k f + f k y + k (y f)),
// everything sampled on the q grid. Hermitian; reduces to apply_S1_mu at L = 1.
QuasiField apply_symmetrized(const StokesWave& w, const AuxMap& aux, const QuasiField& h);

// Eigenpair nearest the real shift sigma via Arnoldi over MINRES resolvent
// solves. When v0 has definite parity (mu in {0, 1/2}) the iteration is
// confined to that parity subspace, which splits degenerate pairs.
EigenPair eig_nearest(const StokesWave& w, double sigma, double mu,
                      const QuasiField* v0 = nullptr);

// Follows one eigenvalue branch across the stored waves of a branch, seeding
// each solve with the previous eigenfunction; inserts intermediate waves when
// the eigenfunction overlap drops below 1/2 (branch-jump guard).
std::vector<std::pair<double, double>> track_eigenvalue_branch(const BranchState& branch,
                                                               const EigenPair& seed, double mu);

// Bisection in steepness for the zero crossing of the parity-confined
// eigenvalue nearest zero. Re-solves the wave at each midpoint.
BranchPoint find_branch_point(const BranchState& branch, double mu,
                              std::pair<double, double> bracket, double tol_s);

Parity eigenfunction_parity(const QuasiField& f);

struct SpectrumRow {
  double s = 0.0;
  double mu = 0.0;
  double xi = 0.0;
  Parity parity = Parity::none;
  double residual = 0.0;
};

void write_spectrum(const std::string& path, const std::vector<SpectrumRow>& rows);

}  // namespace stokespec
