#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "stokespec/stokes_wave.hpp"

namespace stokespec {

namespace {

uint64_t fnv1a(const std::string& data) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string coefficient_block(const StokesWave& w) {
  std::string block;
  char line[64];
  for (int k = 0; k < static_cast<int>(w.y_hat.size()); ++k) {
    std::snprintf(line, sizeof line, "%d %.17g\n", k, w.y_hat[k]);
    block += line;
  }
  return block;
}

}  // namespace

void write_wave(const StokesWave& w, const std::string& path) {
  const std::string block = coefficient_block(w);
  std::ofstream out(path);
  if (!out) throw Error("cannot open wave file for writing: " + path);
  char buf[96];
  out << "stokespec-wave v1\n";
  out << "n " << w.n() << "\n";
  std::snprintf(buf, sizeof buf, "L %.17g\n", w.L());
  out << buf;
  std::snprintf(buf, sizeof buf, "g %.17g\n", w.g);
  out << buf;
  std::snprintf(buf, sizeof buf, "c %.17g\n", w.c);
  out << buf;
  std::snprintf(buf, sizeof buf, "s %.17g\n", w.s);
  out << buf;
  std::snprintf(buf, sizeof buf, "checksum %016" PRIx64 "\n", fnv1a(block));
  out << buf;
  out << block;
  if (!out) throw Error("short write on wave file: " + path);
}

StokesWave read_wave(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open wave file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "stokespec-wave v1")
    throw Error("unrecognized wave file version in " + path);

  int n = 0;
  double L = 1.0, g = 0.0, c = 0.0, s = 0.0;
  std::string checksum_hex;
  for (int i = 0; i < 6; ++i) {
    if (!std::getline(in, line)) throw Error("truncated wave header in " + path);
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "n")
      ls >> n;
    else if (key == "L")
      ls >> L;
    else if (key == "g")
      ls >> g;
    else if (key == "c")
      ls >> c;
    else if (key == "s")
      ls >> s;
    else if (key == "checksum")
      ls >> checksum_hex;
    else
      throw Error("unknown wave header field '" + key + "' in " + path);
    if (!ls) throw Error("malformed wave header line '" + line + "' in " + path);
  }
  if (n < 4 || n % 2 != 0) throw Error("invalid mode count in " + path);
  if (checksum_hex.size() != 16) throw Error("missing checksum in " + path);

  std::string block;
  StokesWave w;
  w.grid = build_grid(n);
  if (L != 1.0) w.aux = build_aux_map(L, n);
  w.y_hat = ArrayXd::Zero(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    if (!std::getline(in, line)) throw Error("truncated coefficient block in " + path);
    block += line;
    block += '\n';
    std::istringstream ls(line);
    int kk;
    double v;
    ls >> kk >> v;
    if (!ls || kk != k) throw Error("malformed coefficient line '" + line + "' in " + path);
    w.y_hat[k] = v;
  }
  char expect[32];
  std::snprintf(expect, sizeof expect, "%016" PRIx64, fnv1a(block));
  if (checksum_hex != expect) throw Error("checksum mismatch in " + path);

  w.g = g;
  w.c = c;
  w.s = s;
  w.converged = true;
  return w;
}

}  // namespace stokespec
