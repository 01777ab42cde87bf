// End-to-end checks of the command line driver: exit codes, output files,
// byte-level determinism. Invoked with the binary path as argv[1].

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  std::cout << (ok ? "pass" : "FAIL") << ": " << what << "\n";
  if (!ok) ++failures;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& cmd) {
  int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: test_cli <path-to-binary>\n";
    return 2;
  }
  const std::string bin = argv[1];
  fs::path dir = fs::temp_directory_path() / "rothevi_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::string wentzell_cfg =
      "[domain]\ngeometry = strip\nnx1 = 2\nnx2 = 2\nny = 2\n"
      "[coefficients]\nsigma1 = 2\nsigma2 = 0.5\nalpha = 1\nbeta = 0.1\n"
      "[j]\nkind = absval\nlambda = 0.5\n"
      "[time]\nT = 0.5\nm = 4\n"
      "[source]\nf_kind = sinxy\nf_amplitude = 1\n"
      "[initial]\nS_kind = sin_profile\nS_amplitude = 1\n"
      "[experiment]\nkind = wentzell\n"
      "[output]\ndir = " + (dir / "w1").string() + "\n";
  write_file(dir / "wentzell.cfg", wentzell_cfg);

  check(run(bin + " validate " + (dir / "wentzell.cfg").string()) == 0,
        "validate accepts a good config");
  check(run(bin + " run " + (dir / "wentzell.cfg").string()) == 0, "wentzell run exits 0");
  for (const char* f : {"trajectory.csv", "interface.csv", "estimates.csv"})
    check(fs::exists(dir / "w1" / f), std::string("wentzell run wrote ") + f);

  // determinism: a second run into a different directory is byte identical
  check(run(bin + " run " + (dir / "wentzell.cfg").string() + " --out " +
            (dir / "w2").string()) == 0,
        "second run exits 0");
  for (const char* f : {"trajectory.csv", "interface.csv", "estimates.csv"})
    check(slurp(dir / "w1" / f) == slurp(dir / "w2" / f),
          std::string("byte-identical rerun: ") + f);

  // config errors exit 1
  write_file(dir / "bad.cfg", "[coefficients]\nsigma1 = -1\n[experiment]\nkind = wentzell\n");
  check(run(bin + " validate " + (dir / "bad.cfg").string()) == 1, "validate flags bad config");
  check(run(bin + " run " + (dir / "bad.cfg").string()) == 1, "run exits 1 on config error");

  // the bilateral step gate is a parse-time config error
  write_file(dir / "gate.cfg",
             "[coefficients]\nalpha = 0.1\n[time]\nT = 1\nm = 5\n"
             "[experiment]\nkind = signorini\n");
  check(run(bin + " run " + (dir / "gate.cfg").string()) == 1,
        "too-coarse bilateral config rejected at parse time");

  // geometry errors exit 2 (band cannot be resolved inside the domain)
  write_file(dir / "geom.cfg",
             "[domain]\ngeometry = inclusion\nn = 8\n"
             "[experiment]\nkind = thinlayer\neps_list = 0.4,0.2,0.1\ngamma = 1\n"
             "[output]\ndir = " + (dir / "g1").string() + "\n");
  check(run(bin + " run " + (dir / "geom.cfg").string()) == 2, "geometry error exits 2");

  // msweep produces a monotone distance column
  write_file(dir / "msweep.cfg",
             "[domain]\ngeometry = strip\nnx1 = 2\nnx2 = 2\nny = 2\n"
             "[source]\nf_kind = sinxy\nf_amplitude = 1\n"
             "[initial]\nS_kind = sin_profile\nS_amplitude = 1\n"
             "[time]\nT = 0.5\n[solver]\ntol = 1e-13\n"
             "[experiment]\nkind = msweep\nm_list = 4,8,16\nm_ref = 64\n"
             "[output]\ndir = " + (dir / "ms").string() + "\n");
  check(run(bin + " run " + (dir / "msweep.cfg").string()) == 0, "msweep exits 0");
  {
    std::ifstream in(dir / "ms" / "convergence.csv");
    std::string line;
    std::getline(in, line);  // header
    double prev = 1e300;
    bool monotone = true;
    int rows = 0;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');  // m
      std::getline(ss, cell, ',');  // h
      std::getline(ss, cell, ',');  // dist
      double d = std::strtod(cell.c_str(), nullptr);
      monotone = monotone && d < prev;
      prev = d;
      ++rows;
    }
    check(rows == 3, "convergence.csv has one row per sweep member");
    check(monotone, "msweep distance column decreases");
  }

  // poincare experiment
  write_file(dir / "poincare.cfg",
             "[experiment]\nkind = poincare\nn_list = 8,16\n"
             "[output]\ndir = " + (dir / "pc").string() + "\n");
  check(run(bin + " run " + (dir / "poincare.cfg").string()) == 0, "poincare exits 0");
  check(fs::exists(dir / "pc" / "poincare.csv"), "poincare.csv written");

  // signorini single run
  write_file(dir / "signorini.cfg",
             "[domain]\ngeometry = inclusion\nn = 4\n"
             "[coefficients]\nsigma1 = 1\nsigma2 = 2\nalpha = 1\n"
             "[j]\nkind = positive_part\nlambda = 0.8\n"
             "[time]\nT = 0.5\nm = 8\n"
             "[source]\ng_kind = constant\ng_amplitude = 0.4\n"
             "[initial]\nS_kind = sin_profile\nS_amplitude = 0.5\n"
             "[experiment]\nkind = signorini\n"
             "[output]\ndir = " + (dir / "sg").string() + "\n");
  check(run(bin + " run " + (dir / "signorini.cfg").string()) == 0, "signorini run exits 0");
  check(fs::exists(dir / "sg" / "interface.csv"), "signorini interface.csv written");

  // estimates sweep
  write_file(dir / "estimates.cfg",
             "[domain]\ngeometry = strip\nnx1 = 2\nnx2 = 2\nny = 2\n"
             "[source]\nf_kind = sinxy\nf_amplitude = 1\n"
             "[initial]\nS_kind = sin_profile\nS_amplitude = 1\n"
             "[time]\nT = 0.5\n"
             "[experiment]\nkind = estimates\nm_list = 4,8,16\n"
             "[output]\ndir = " + (dir / "es").string() + "\n");
  check(run(bin + " run " + (dir / "estimates.cfg").string()) == 0, "estimates exits 0");
  for (const char* f : {"estimates_sweep.csv", "estimates_flags.csv", "estimates_m8.csv"})
    check(fs::exists(dir / "es" / f), std::string("estimates wrote ") + f);

  // thin-layer study
  write_file(dir / "thinlayer.cfg",
             "[domain]\ngeometry = inclusion\nn = 16\n"
             "[coefficients]\nsigma1 = 2\nsigma2 = 1\n"
             "[j]\nkind = absval\nlambda = 0.3\n"
             "[time]\nT = 0.25\nm = 4\n[solver]\ntol = 1e-10\n"
             "[initial]\nS_kind = sin_profile\nS_amplitude = 1\n"
             "[experiment]\nkind = thinlayer\neps_list = 0.25,0.125\ngamma = 0.5\n"
             "[output]\ndir = " + (dir / "tl").string() + "\n");
  check(run(bin + " run " + (dir / "thinlayer.cfg").string()) == 0, "thinlayer exits 0");
  {
    std::ifstream in(dir / "tl" / "thinlayer.csv");
    std::string line;
    std::getline(in, line);
    check(line == "epsilon,band_width_cells,distance_L2SigmaGamma,layer_norm_bound",
          "thinlayer.csv header");
    double prev = 1e300;
    bool monotone = true;
    int rows = 0;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string cell;
      for (int c = 0; c < 3; ++c) std::getline(ss, cell, ',');
      double d = std::strtod(cell.c_str(), nullptr);
      monotone = monotone && d < prev;
      prev = d;
      ++rows;
    }
    check(rows == 2 && monotone, "thinlayer distance column decreases");
  }

  // parallel sweep members produce the same summary bytes
  write_file(dir / "msweep2.cfg",
             "[domain]\ngeometry = strip\nnx1 = 2\nnx2 = 2\nny = 2\n"
             "[source]\nf_kind = sinxy\nf_amplitude = 1\n"
             "[initial]\nS_kind = sin_profile\nS_amplitude = 1\n"
             "[time]\nT = 0.5\n[solver]\ntol = 1e-13\n"
             "[experiment]\nkind = msweep\nm_list = 4,8,16\nm_ref = 64\n"
             "[output]\ndir = " + (dir / "ms2").string() + "\n");
  check(run("ROTHE_THREADS=3 " + bin + " run " + (dir / "msweep2.cfg").string()) == 0,
        "parallel msweep exits 0");
  check(slurp(dir / "ms" / "convergence.csv") == slurp(dir / "ms2" / "convergence.csv"),
        "parallel and sequential sweeps agree byte for byte");

  std::cout << (failures == 0 ? "all cli checks passed\n" : "cli checks FAILED\n");
  return failures == 0 ? 0 : 1;
}
