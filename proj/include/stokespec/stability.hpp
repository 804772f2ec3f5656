#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stokespec/stokes_wave.hpp"

namespace stokespec {

// Two-component perturbation envelope pair. The block operators (apply_J_mu,
// block_shift_invert) read the first slot as the canonical momentum density;
// qep_eigs_near reports results with the first slot converted to the surface
// velocity potential.
struct PerturbationState {
  QuasiField delta_phi;
  QuasiField delta_y;
  double mu = 0.0;
};

struct StabilityEigenPair {
  cplx lambda{0.0, 0.0};
  PerturbationState state;        // (delta_phi, delta_y)
  QuasiField canonical_momentum;  // canonical partner of delta_y
  double mu = 0.0;
  double residual = 0.0;          // quadratic-pencil residual on delta_y
  bool converged = false;
};

struct ShiftPolicy {
  enum class Kind { zero, track, ladder };
  Kind kind = Kind::zero;
  std::vector<double> ladder;  // imaginary-axis shifts for Kind::ladder
};

struct FloquetSweep {
  std::vector<double> mu_values;
  std::vector<std::vector<StabilityEigenPair>> spectra;  // aligned with mu_values
  std::vector<std::string> errors;                       // empty string = clean
  std::pair<double, double> max_growth{0.0, 0.0};        // (mu*, gamma*)
};

// x_u f + y_u H_mu f
QuasiField apply_omega21_mu(const StokesWave& w, const QuasiField& f);
// x_u f - H_mu (y_u f)
QuasiField apply_omega21_dagger_mu(const StokesWave& w, const QuasiField& f);
// (x_u f + H_mu [y_u f]) / (x_u^2 + y_u^2); rejects near-limiting waves
QuasiField apply_R12_dagger_mu(const StokesWave& w, const QuasiField& f);
// Omega21^dagger kinv_mu Omega21; hermitian PSD. At mu = 0 the mean of
// Omega21 f must vanish (zero-mode policy) or the call throws.
QuasiField apply_Q_mu(const StokesWave& w, const QuasiField& f);
// S1_mu + 2 i c sigma H_mu + sigma^2 Q_mu; hermitian for real sigma
QuasiField apply_S2_mu(const StokesWave& w, const QuasiField& f, double sigma);
// (w1, w2) -> (w2, w1 - 2 c H_mu w2) on the canonical pair
PerturbationState apply_J_mu(const StokesWave& w, const PerturbationState& state);

// (G - i sigma J)^{-1} applied to the canonical pair, via one hermitian
// MINRES solve with S2 and two Q applications.
PerturbationState block_shift_invert(const StokesWave& w, const PerturbationState& state,
                                     double sigma);

// Arnoldi on block_shift_invert composed with J; eigenvalues mapped back
// through lambda = i sigma + 1/theta. Pairs are sorted by descending Re.
std::vector<StabilityEigenPair> qep_eigs_near(const StokesWave& w, double mu, double sigma,
                                              int nev);

FloquetSweep floquet_sweep(const StokesWave& w, const std::vector<double>& mu_schedule,
                           const ShiftPolicy& policy, int nev);

std::vector<double> log_spaced_mu(double lo, double hi, int count);

void write_sweep(const std::string& path, const StokesWave& w, const FloquetSweep& sweep);

// STOKESPEC_THREADS (>= 1); defaults to 1 for deterministic timing
int thread_count();

}  // namespace stokespec
