#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stokespec/babenko_spectrum.hpp"
#include "stokespec/stability.hpp"
#include "stokespec/stokes_wave.hpp"

namespace fs = std::filesystem;
using namespace stokespec;

namespace {

// Exit-code contract: 0 success, 1 numerical failure, 2 usage error.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_shift_list(const std::string& text) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string tok = text.substr(pos, comma - pos);
    try {
      size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad shift syntax: '" + tok + "'");
    }
    pos = comma + 1;
  }
  if (out.empty()) throw UsageError("empty shift list");
  return out;
}

BranchState load_branch_dir(const std::string& dir) {
  BranchState branch;
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".wave") files.push_back(e.path());
  if (files.empty()) throw UsageError("no .wave files in " + dir);
  for (const auto& p : files) branch.waves.push_back(read_wave(p.string()));
  std::sort(branch.waves.begin(), branch.waves.end(),
            [](const StokesWave& a, const StokesWave& b) { return a.s < b.s; });
  for (const auto& w : branch.waves) {
    branch.speed_curve.emplace_back(w.s, w.c);
    auto [kin, pot] = compute_hamiltonian(w);
    branch.hamiltonian_curve.emplace_back(w.s, kin + pot);
  }
  return branch;
}

struct WaveConfig {
  double steepness = 0.0;
  int modes = 256;
  int max_modes = 1 << 17;
  double gravity = 1.0;
  double map_scale = 0.0;  // 0: automatic tiers
  std::string out, seed, branch_table, branch_dir;
};

int cmd_wave(const WaveConfig& cfg) {
  if (cfg.steepness == 0.0) {
    StokesWave flat = flat_wave(cfg.modes, cfg.gravity);
    if (!cfg.out.empty()) write_wave(flat, cfg.out);
    std::printf("wave: s=0 c=%.17g n=%d flat\n", flat.c, flat.n());
    return 0;
  }

  StokesWave start;
  if (!cfg.seed.empty()) {
    start = read_wave(cfg.seed);
    if (start.g != cfg.gravity) throw UsageError("seed wave has different gravity");
  } else {
    start = flat_wave(cfg.modes, cfg.gravity);
  }

  StepPolicy policy;
  policy.max_n = cfg.max_modes;
  if (cfg.map_scale > 0.0) {
    policy.auto_L_tiers = false;
    if (start.L() != cfg.map_scale) start = resample_wave(start, cfg.map_scale);
  }

  BranchState branch = continue_branch(start, cfg.steepness, policy);
  const StokesWave& w = branch.waves.back();

  if (!cfg.out.empty()) write_wave(w, cfg.out);
  if (!cfg.branch_dir.empty()) {
    fs::create_directories(cfg.branch_dir);
    for (const auto& bw : branch.waves) {
      char name[64];
      std::snprintf(name, sizeof name, "wave_%010.7f.wave", bw.s);
      write_wave(bw, (fs::path(cfg.branch_dir) / name).string());
    }
  }

  char line[256];
  std::string table = "s\tc\tkinetic\tpotential\n";
  for (const auto& bw : branch.waves) {
    auto [kin, pot] = compute_hamiltonian(bw);
    std::snprintf(line, sizeof line, "%.17g\t%.17g\t%.17g\t%.17g\n", bw.s, bw.c, kin, pot);
    table += line;
  }
  if (cfg.branch_table.empty()) {
    std::fputs(table.c_str(), stdout);
  } else {
    std::FILE* f = std::fopen(cfg.branch_table.c_str(), "w");
    if (!f) throw Error("cannot open " + cfg.branch_table);
    std::fputs(table.c_str(), f);
    std::fclose(f);
  }

  std::printf("wave: s=%.17g c=%.17g n=%d L=%g residual=%.3e\n", w.s, w.c, w.n(), w.L(),
              babenko_residual_norm(w));
  return 0;
}

struct BabenkoConfig {
  std::string wave, branch_dir, out = "spectrum.tsv";
  double mu = 0.0;
  std::string shifts = "0";
  bool track = false;
  std::vector<double> bisect;
  double tol = 2e-4;
};

int cmd_babenko(const BabenkoConfig& cfg) {
  const std::vector<double> shifts = parse_shift_list(cfg.shifts);
  if (!(cfg.mu >= 0.0 && cfg.mu < 1.0)) throw UsageError("mu must lie in [0, 1)");
  if (cfg.wave.empty() == cfg.branch_dir.empty())
    throw UsageError("give exactly one of --wave or --branch-dir");
  if ((cfg.track || !cfg.bisect.empty()) && cfg.branch_dir.empty())
    throw UsageError("--track/--bisect need --branch-dir");

  std::vector<SpectrumRow> rows;
  bool all_converged = true;

  if (!cfg.wave.empty()) {
    StokesWave w = read_wave(cfg.wave);
    for (double sigma : shifts) {
      EigenPair p = eig_nearest(w, sigma, cfg.mu);
      rows.push_back({w.s, cfg.mu, p.xi, p.parity, p.residual});
      all_converged = all_converged && p.converged;
      std::printf("xi(sigma=%g) = %.17g  parity=%s residual=%.3e%s\n", sigma, p.xi,
                  parity_name(p.parity), p.residual, p.converged ? "" : "  NOT CONVERGED");
    }
  } else {
    BranchState branch = load_branch_dir(cfg.branch_dir);

    if (!cfg.bisect.empty()) {
      if (cfg.bisect.size() != 2) throw UsageError("--bisect wants LO HI");
      BranchPoint bp =
          find_branch_point(branch, cfg.mu, {cfg.bisect[0], cfg.bisect[1]}, cfg.tol);
      std::printf("branch-point: kind=%s s*=%.9f mu=%g bracket=%.3e\n",
                  bp.kind == BranchPoint::Kind::turning_point ? "turning-point"
                                                              : "secondary-bifurcation",
                  bp.s_star, bp.mu, bp.bracket_width);
    }

    if (cfg.track) {
      EigenPair seed = eig_nearest(branch.waves.front(), shifts.front(), cfg.mu);
      all_converged = all_converged && seed.converged;
      auto curve = track_eigenvalue_branch(branch, seed, cfg.mu);
      for (const auto& [s, xi] : curve)
        rows.push_back({s, cfg.mu, xi, seed.parity, std::numeric_limits<double>::quiet_NaN()});
      std::printf("tracked %zu points, xi: %.17g -> %.17g\n", curve.size(),
                  curve.front().second, curve.back().second);
    } else if (cfg.bisect.empty()) {
      for (const auto& w : branch.waves)
        for (double sigma : shifts) {
          EigenPair p = eig_nearest(w, sigma, cfg.mu);
          rows.push_back({w.s, cfg.mu, p.xi, p.parity, p.residual});
          all_converged = all_converged && p.converged;
        }
    }
  }

  if (!rows.empty() && !cfg.out.empty()) write_spectrum(cfg.out, rows);
  return all_converged ? 0 : 1;
}

struct StabilityConfig {
  std::string wave, out = "sweep.tsv", policy = "zero", shifts;
  std::vector<double> mu, mu_linear, mu_log;
  int mu_count = 50;
  int nev = 6;
};

int cmd_stability(const StabilityConfig& cfg) {
  std::vector<double> schedule = cfg.mu;
  auto linspace = [&](double lo, double hi) {
    if (!(hi > lo) || cfg.mu_count < 2) throw UsageError("bad mu schedule");
    for (int i = 0; i < cfg.mu_count; ++i)
      schedule.push_back(lo + (hi - lo) * i / (cfg.mu_count - 1));
  };
  if (!cfg.mu_linear.empty()) {
    if (cfg.mu_linear.size() != 2) throw UsageError("--mu-linear wants LO HI");
    linspace(cfg.mu_linear[0], cfg.mu_linear[1]);
  }
  if (!cfg.mu_log.empty()) {
    if (cfg.mu_log.size() != 2) throw UsageError("--mu-log wants LO HI");
    auto ls = log_spaced_mu(cfg.mu_log[0], cfg.mu_log[1], cfg.mu_count);
    schedule.insert(schedule.end(), ls.begin(), ls.end());
  }
  if (schedule.empty()) throw UsageError("no mu values requested");
  for (double m : schedule)
    if (!(m >= 0.0 && m < 1.0)) throw UsageError("mu values must lie in [0, 1)");

  ShiftPolicy policy;
  if (cfg.policy == "zero") {
    policy.kind = ShiftPolicy::Kind::zero;
  } else if (cfg.policy == "track") {
    policy.kind = ShiftPolicy::Kind::track;
  } else if (cfg.policy == "ladder") {
    policy.kind = ShiftPolicy::Kind::ladder;
    policy.ladder = parse_shift_list(cfg.shifts);
  } else {
    throw UsageError("policy must be zero, track, or ladder");
  }

  StokesWave w = read_wave(cfg.wave);
  if (!w.uniform()) w = resample_to_uniform(w);

  FloquetSweep sweep = floquet_sweep(w, schedule, policy, cfg.nev);
  if (!cfg.out.empty()) write_sweep(cfg.out, w, sweep);

  bool clean = true;
  for (const auto& e : sweep.errors)
    if (!e.empty()) {
      clean = false;
      std::fprintf(stderr, "error: %s\n", e.c_str());
    }
  std::printf("max-growth: mu*=%.17g gamma*=%.17g\n", sweep.max_growth.first,
              sweep.max_growth.second);
  return clean ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matrix-free pseudospectral toolkit for periodic Stokes waves"};
  app.set_config("--config", "", "key=value file layered under flags");
  app.require_subcommand(1);
  app.footer("STOKESPEC_THREADS sets the worker count for stability sweeps (default 1).");

  WaveConfig wc;
  auto* wave = app.add_subcommand("wave", "continue the branch to a target steepness");
  wave->add_option("--steepness", wc.steepness, "target steepness (crest-trough)/(2 wavelength)")
      ->required()
      ->check([](const std::string& t) -> std::string {
        try {
          if (const double v = std::stod(t); v >= 0.0 && v < kLimitingSteepness) return {};
        } catch (const std::exception&) {
        }
        return "steepness must lie in [0, " + std::to_string(kLimitingSteepness) + ")";
      });
  wave->add_option("--modes", wc.modes, "starting grid size")->check(CLI::PositiveNumber);
  wave->add_option("--max-modes", wc.max_modes, "refinement ceiling");
  wave->add_option("--gravity", wc.gravity, "gravity")->check(CLI::PositiveNumber);
  wave->add_option("--map-scale", wc.map_scale, "pin the auxiliary map scale L (0: automatic)");
  wave->add_option("--out", wc.out, "wave file to write");
  wave->add_option("--seed", wc.seed, "wave file to continue from");
  wave->add_option("--branch-table", wc.branch_table, "write (s, c, kinetic, potential) here");
  wave->add_option("--branch-dir", wc.branch_dir, "store every wave of the branch here");

  BabenkoConfig bc;
  auto* bab = app.add_subcommand("babenko", "spectrum of the linearized wave operator");
  bab->add_option("--wave", bc.wave, "wave file");
  bab->add_option("--branch-dir", bc.branch_dir, "directory of wave files (a stored branch)");
  bab->add_option("--mu", bc.mu, "Floquet parameter");
  bab->add_option("--shifts", bc.shifts, "comma-separated spectral shifts");
  bab->add_flag("--track", bc.track, "follow one eigenvalue branch across the stored waves");
  bab->add_option("--bisect", bc.bisect, "steepness bracket for a sign change")->expected(2);
  bab->add_option("--tol", bc.tol, "bisection tolerance in steepness");
  bab->add_option("--out", bc.out, "spectrum table to write");

  StabilityConfig sc;
  auto* stab = app.add_subcommand("stability", "quasiperiodic linear-stability sweep");
  stab->add_option("--wave", sc.wave, "wave file")->required();
  stab->add_option("--mu", sc.mu, "explicit Floquet values (repeatable)");
  stab->add_option("--mu-linear", sc.mu_linear, "linear schedule LO HI")->expected(2);
  stab->add_option("--mu-log", sc.mu_log, "logarithmic schedule LO HI")->expected(2);
  stab->add_option("--mu-count", sc.mu_count, "schedule length");
  stab->add_option("--policy", sc.policy, "shift policy: zero, track, or ladder");
  stab->add_option("--shifts", sc.shifts, "comma-separated shifts for the ladder policy");
  stab->add_option("--nev", sc.nev, "eigenpairs per shift")->check(CLI::PositiveNumber);
  stab->add_option("--out", sc.out, "sweep table to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (wave->parsed()) return cmd_wave(wc);
    if (bab->parsed()) return cmd_babenko(bc);
    if (stab->parsed()) return cmd_stability(sc);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
