#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stokespec/spectral.hpp"

namespace stokespec {

// Upper endpoint of the branch (120 degree corner wave), excluded.
inline constexpr double kLimitingSteepness = 0.14106348398;

// Padded-grid sample data shared by every operator built on a wave. The solve
// coordinate is q when an auxiliary map is present, u otherwise; uq_p is the
// exact closed-form u_q at padded nodes (ones for uniform waves). The
// u-coordinate stability blocks (yu/xu/W) are populated for uniform waves.
struct WaveKernel {
  int n = 0;
  int m = 0;
  double c = 0, g = 1, b = 0;  // b = c^2
  bool uniform = true;
  ArrayXcd yc, kyc;   // spectrum of y and of k y in the solve coordinate
  ArrayXd y_p, ky_p;  // their padded samples
  ArrayXd uq_p;
  ArrayXd yu_p, xu_p, W_p;  // y_u, x_u = 1 + k y, |z_u|^2 (uniform only)
  double min_W = 1.0;
};

struct StokesWave {
  GridPtr grid;
  std::optional<AuxMap> aux;  // absent or L = 1 means uniform
  ArrayXd y_hat;              // cosine coefficients in the solve coordinate,
                              // length n/2 + 1, Nyquist entry pinned to zero
  double c = 1.0;
  double g = 1.0;
  double s = 0.0;
  bool converged = false;

  int n() const { return grid ? grid->n : 0; }
  double L() const { return aux ? aux->L : 1.0; }
  bool uniform() const { return !aux || aux->L == 1.0; }

  // Built once on first use; copies share it. Thread safe.
  const WaveKernel& kernel() const;

 private:
  mutable std::shared_ptr<const WaveKernel> kernel_;
};

StokesWave flat_wave(int n_modes, double g = 1.0);

// Full spectrum (length n) from cosine coefficients and back.
ArrayXcd spectrum_from_cosine(const ArrayXd& y_hat, int n);
ArrayXd cosine_from_spectrum(const ArrayXcd& yc);

// Samples of the Babenko residual S y at the grid's physical nodes u(q_j).
PeriodicField babenko_residual(const StokesWave& w);
// ||S y|| / ||y|| in the u-coordinate L2 metric.
double babenko_residual_norm(const StokesWave& w);

// Linearization about the wave, uniform waves only (the auxiliary-grid
// counterpart lives in the spectrum module as apply_symmetrized).
PeriodicField apply_S1(const StokesWave& w, const PeriodicField& v);

// Amplitude-control equations closing the Newton system.
struct FirstHarmonic {
  double a1;
};
struct Steepness {
  double s;
};
// Pseudo-arclength: t . (x - base) = ds in (cosine coeffs, c^2) space.
struct Arclength {
  ArrayXd t_cos;
  double t_b = 0;
  ArrayXd base_cos;
  double base_b = 0;
  double ds = 0;
};
using Control = std::variant<FirstHarmonic, Steepness, Arclength>;

struct NewtonOptions {
  double tol = 1e-11;          // on ||S y|| / ||y||
  int max_newton = 40;
  double inner_tol = 1e-3;     // CR forcing term
  double inner_tol_final = 1e-6;
  int max_inner = 0;           // 0: choose from n
  bool polish = true;          // extra tight steps to push to the roundoff floor
};

struct NewtonReport {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<double> residual_history;
};

std::pair<StokesWave, NewtonReport> solve_newton(const StokesWave& initial,
                                                 const Control& target,
                                                 const NewtonOptions& opt = {});

struct StepPolicy {
  double da1 = 0.03;
  double min_da1 = 1e-7;
  double grow = 1.4;
  double arclength_after_s = 0.135;
  double tail_ratio = 1e-12;  // top-quartile spectral tail triggering refinement
  int max_n = 1 << 17;
  bool auto_L_tiers = true;   // L tiers {1, 0.25, 0.05, 0.005} by steepness
  NewtonOptions newton;
};

struct BranchState {
  std::vector<StokesWave> waves;  // strictly increasing steepness
  std::vector<std::pair<double, double>> speed_curve;        // (s, c)
  std::vector<std::pair<double, double>> hamiltonian_curve;  // (s, kinetic + potential)
};

BranchState continue_branch(const StokesWave& start, double s_target,
                            const StepPolicy& policy = {});

double compute_steepness(const StokesWave& w);
// (kinetic, potential)
std::pair<double, double> compute_hamiltonian(const StokesWave& w);
// Surface point samples (x(u(q_j)), y(u(q_j))).
std::pair<ArrayXd, ArrayXd> surface_from_wave(const StokesWave& w);

// Spectral re-expansion on another grid; n_new = 0 keeps the current size.
StokesWave resample_wave(const StokesWave& w, double L_new, int n_new = 0);
StokesWave resample_to_uniform(const StokesWave& w, int n_new = 0);
// Zero-padded (or tail-checked shrunk) copy on the same map.
StokesWave pad_wave(const StokesWave& w, int n_new);

void write_wave(const StokesWave& w, const std::string& path);
StokesWave read_wave(const std::string& path);

}  // namespace stokespec
