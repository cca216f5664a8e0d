// Copyright 2026 The stocheuler Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// stocheuler command-line tool.
//
// Exit codes: 0 success, 1 I/O or digest failure, 2 invalid arguments,
// 3 overflow guard triggered, 4 diagnostic assertions failed.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stocheuler/ensemble.hpp"
#include "stocheuler/io.hpp"
#include "stocheuler/measures.hpp"
#include "stocheuler/suites.hpp"

namespace fs = std::filesystem;
using namespace stocheuler;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitOverflow = 3;
constexpr int kExitCheckFailed = 4;

std::string default_out_dir() {
  const char* env = std::getenv("STOCHEULER_OUT_DIR");
  return env != nullptr && *env != '\0' ? env : "stocheuler_out";
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string measure = "white";
  double beta = 0.0;
  int N = 4;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::string out;
  unsigned workers = 1;
};

int cmd_sample(const SampleArgs& a) {
  if (a.measure != "white" && a.measure != "gibbs") {
    throw std::invalid_argument("--measure must be white or gibbs");
  }
  if (a.count < 1) throw std::invalid_argument("--count must be >= 1");
  const double beta = a.measure == "white" ? 0.0 : a.beta;
  const MeasureSpec spec{beta, a.N};
  spec.validate();
  const LatticePtr lat = build_lattice(a.N);

  const fs::path dir = prepare_dir(a.out);
  RunManifest manifest(dir, "sample",
                       {{"measure", a.measure}, {"beta", beta}, {"N", a.N}, {"count", a.count},
                        {"seed", a.seed}, {"out_dir", a.out}, {"workers", a.workers}},
                       {{"beta", beta}, {"N", a.N}, {"wick_cutoff", nullptr}});
  std::vector<SpectralField> fields(a.count, SpectralField(lat));
  parallel_for(a.count, a.workers, [&](std::size_t i) {
    RandomSource rng(a.seed, i);
    fields[i] = sample_energy_enstrophy(spec, lat, rng);
  });
  write_sample_batch_csv(dir / "samples.csv", fields);
  manifest.add_file("samples.csv");
  manifest.finalize("complete");
  std::cout << "wrote " << a.count << " samples to " << (dir / "samples.csv").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvolveArgs {
  int N = 4;
  double alpha = 0.0;
  double beta_init = 0.0;
  std::string init = "gibbs";
  std::string density;
  double dt = 1e-3;
  double t_final = 1.0;
  double save_every = 0.1;
  long long ensemble = 100;
  std::string scheme = "ou-split";
  std::uint64_t seed = 0;
  std::optional<double> wick_cutoff;
  std::string out;
  unsigned workers = 1;
  std::size_t save_trajectories = 8;
};

int cmd_evolve(const EvolveArgs& a) {
  if (a.ensemble < 1) throw std::invalid_argument("--ensemble must be >= 1");
  EnsembleConfig c;
  c.N = a.N;
  c.alpha = a.alpha;
  c.beta_init = a.beta_init;
  c.init = parse_init(a.init);
  if (!a.density.empty()) c.density = parse_density(a.density);
  c.dt = a.dt;
  c.t_final = a.t_final;
  c.save_every = a.save_every;
  c.ensemble_size = static_cast<std::size_t>(a.ensemble);
  c.scheme = parse_scheme(a.scheme);
  c.seed = a.seed;
  c.workers = a.workers;
  c.validate();
  Integrator probe(build_lattice(1), c.integrator());  // scheme/alpha compatibility
  if (a.wick_cutoff) {
    if (!(*a.wick_cutoff >= 1.0)) throw std::invalid_argument("--wick-cutoff must be >= 1");
    if (static_cast<int>(*a.wick_cutoff) > a.N) throw std::invalid_argument("--wick-cutoff ball exceeds Lambda_N");
  }

  const fs::path dir = prepare_dir(a.out);
  nlohmann::json config{{"N", a.N},
                        {"alpha", a.alpha},
                        {"beta_init", a.beta_init},
                        {"init", a.init},
                        {"density_init", a.density.empty() ? nlohmann::json(nullptr) : nlohmann::json(a.density)},
                        {"dt", a.dt},
                        {"t_final", a.t_final},
                        {"save_every", a.save_every},
                        {"ensemble_size", a.ensemble},
                        {"scheme", std::string(scheme_name(c.scheme))},
                        {"seed", a.seed},
                        {"wick_cutoff", a.wick_cutoff ? nlohmann::json(*a.wick_cutoff) : nlohmann::json(nullptr)},
                        {"out_dir", a.out},
                        {"workers", a.workers},
                        {"save_trajectories", a.save_trajectories}};
  RunManifest manifest(dir, "evolve", config,
                       {{"beta", a.beta_init},
                        {"N", a.N},
                        {"wick_cutoff", a.wick_cutoff ? nlohmann::json(*a.wick_cutoff) : nlohmann::json(nullptr)}});

  const EnsembleRun run = run_ensemble(c);
  write_trajectory_csv(dir / "trajectories.csv", run, a.save_trajectories);
  manifest.add_file("trajectories.csv");
  write_summary_csv(dir / "summary.csv", summarize(run, a.wick_cutoff));
  manifest.add_file("summary.csv");
  manifest.set("overflowed_trajectories", run.overflow_count());
  if (c.init == InitKind::Density) {
    manifest.set("rejection", {{"proposals", run.rejection.proposals}, {"accepted", run.rejection.accepted}});
  }
  if (run.overflow_count() > 0) {
    manifest.set("partial", true);
    manifest.finalize("overflow");
    std::cerr << "error: " << run.overflow_count() << " trajectories exceeded the overflow guard (|xi| > 1e6)\n";
    return kExitOverflow;
  }
  manifest.finalize("complete");
  std::cout << "evolved " << a.ensemble << " trajectories; outputs in " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CheckArgs {
  std::string suite;
  std::optional<int> N;
  std::vector<int> cutoffs;
  std::optional<std::size_t> trials;
  std::optional<double> t_final;
  std::optional<double> dt;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::vector<double> betas;
  std::optional<std::size_t> ensemble;
  std::optional<std::size_t> samples;
  std::optional<double> save_every;
  std::optional<std::uint64_t> seed;
  std::string from_run;
  std::string out;
  unsigned workers = 1;
};

template <class T, class U>
void assign_if(const std::optional<T>& v, U& field) {
  if (v) field = static_cast<U>(*v);
}

// Rebuilds per-mode statistics from an evolve summary after verifying its digest.
SuiteResult stationarity_from_run(const fs::path& dir) {
  verify_manifest_file(dir, "summary.csv");
  const auto manifest = load_manifest(dir);
  const MeasureSpec ref{manifest.at("measure").at("beta").get<double>(), manifest.at("measure").at("N").get<int>()};
  const LatticePtr lat = build_lattice(ref.N);
  ModeVarianceTable table;
  table.modes.assign(lat->half().begin(), lat->half().end());
  for (const auto& row : read_summary_csv(dir / "summary.csv")) {
    if (row.observable.rfind("abs2_", 0) != 0) continue;
    if (table.times.empty() || table.times.back() != row.t) {
      table.times.push_back(row.t);
      table.stats.emplace_back(table.modes.size());
    }
    const std::string name = row.observable.substr(5);
    const auto sep = name.find('_', 1);
    const int kx = static_cast<int>(parse_integer(name.substr(0, sep)));
    const int ky = static_cast<int>(parse_integer(name.substr(sep + 1)));
    const std::size_t slot = lat->half_slot(lat->index_of({kx, ky}));
    SampleMoments m;
    m.mean = row.mean;
    m.stderr_ = row.stderr_;
    m.count = row.count;
    table.stats.back()[slot] = m;
  }
  SuiteResult r{"stationarity", stationarity_test(table, ref), {}};
  return r;
}

SuiteResult run_suite(const CheckArgs& a) {
  const std::string& s = a.suite;
  if (s == "drift") {
    DriftSuiteParams p;
    if (!a.cutoffs.empty()) p.cutoffs = a.cutoffs;
    if (a.N) p.cutoffs = {*a.N};
    assign_if(a.trials, p.trials);
    assign_if(a.seed, p.seed);
    return drift_suite(p);
  }
  if (s == "conservation") {
    ConservationSuiteParams p;
    assign_if(a.N, p.N);
    assign_if(a.t_final, p.t_final);
    assign_if(a.dt, p.dt);
    assign_if(a.seed, p.seed);
    return conservation_suite(p);
  }
  if (s == "second-moment") {
    SecondMomentSuiteParams p;
    assign_if(a.N, p.N);
    assign_if(a.alpha, p.alpha);
    assign_if(a.ensemble, p.ensemble);
    assign_if(a.dt, p.dt);
    assign_if(a.seed, p.seed);
    p.workers = a.workers;
    return second_moment_suite(p);
  }
  if (s == "stationarity") {
    if (!a.from_run.empty()) return stationarity_from_run(a.from_run);
    StationaritySuiteParams p;
    assign_if(a.N, p.N);
    assign_if(a.alpha, p.alpha);
    assign_if(a.beta, p.beta);
    assign_if(a.t_final, p.t_final);
    assign_if(a.dt, p.dt);
    assign_if(a.save_every, p.save_every);
    assign_if(a.ensemble, p.ensemble);
    assign_if(a.seed, p.seed);
    p.workers = a.workers;
    return stationarity_suite(p);
  }
  if (s == "entropy-decay") {
    EntropyDecaySuiteParams p;
    assign_if(a.N, p.N);
    assign_if(a.alpha, p.alpha);
    assign_if(a.ensemble, p.ensemble);
    assign_if(a.dt, p.dt);
    assign_if(a.seed, p.seed);
    p.workers = a.workers;
    return entropy_decay_suite(p);
  }
  if (s == "chaos") {
    NonlinearitySuiteParams p;
    assign_if(a.N, p.N);
    assign_if(a.samples, p.chaos_samples);
    assign_if(a.seed, p.seed);
    p.workers = a.workers;
    return nonlinearity_suite(p);
  }
  if (s == "invariance") {
    InvarianceSuiteParams p;
    assign_if(a.N, p.N);
    if (!a.betas.empty()) p.betas = a.betas;
    if (a.beta) p.betas = {*a.beta};
    assign_if(a.samples, p.samples);
    assign_if(a.seed, p.seed);
    return invariance_suite(p);
  }
  if (s == "increments") {
    IncrementsSuiteParams p;
    assign_if(a.N, p.N);
    assign_if(a.alpha, p.alpha);
    assign_if(a.dt, p.dt);
    assign_if(a.ensemble, p.ensemble);
    assign_if(a.seed, p.seed);
    p.workers = a.workers;
    return increments_suite(p);
  }
  if (s == "gibbs") {
    GibbsSuiteParams p;
    if (!a.betas.empty()) p.betas = a.betas;
    if (a.beta) p.betas = {*a.beta};
    assign_if(a.samples, p.samples);
    assign_if(a.seed, p.seed);
    return gibbs_suite(p);
  }
  if (s == "fokker-planck") {
    FokkerPlanckSuiteParams p;
    assign_if(a.N, p.N);
    assign_if(a.alpha, p.alpha);
    assign_if(a.beta, p.beta);
    assign_if(a.t_final, p.t_final);
    assign_if(a.dt, p.dt);
    assign_if(a.ensemble, p.ensemble);
    assign_if(a.seed, p.seed);
    p.workers = a.workers;
    return fokker_planck_suite(p);
  }
  throw std::invalid_argument("unknown suite '" + s + "'");
}

int cmd_check(const CheckArgs& a) {
  const fs::path dir = prepare_dir(a.out);
  nlohmann::json config{{"suite", a.suite}, {"out_dir", a.out}, {"workers", a.workers}};
  if (a.N) config["N"] = *a.N;
  if (a.seed) config["seed"] = *a.seed;
  if (!a.from_run.empty()) config["from_run"] = a.from_run;
  if (!a.cutoffs.empty()) config["cutoffs"] = a.cutoffs;
  if (a.trials) config["trials"] = *a.trials;
  if (a.t_final) config["t_final"] = *a.t_final;
  if (a.dt) config["dt"] = *a.dt;
  if (a.alpha) config["alpha"] = *a.alpha;
  if (a.beta) config["beta"] = *a.beta;
  if (!a.betas.empty()) config["betas"] = a.betas;
  if (a.ensemble) config["ensemble_size"] = *a.ensemble;
  if (a.samples) config["samples"] = *a.samples;
  if (a.save_every) config["save_every"] = *a.save_every;
  RunManifest manifest(dir, "check", config,
                       {{"beta", a.beta ? nlohmann::json(*a.beta) : nlohmann::json(nullptr)},
                        {"N", a.N ? nlohmann::json(*a.N) : nlohmann::json(nullptr)},
                        {"wick_cutoff", nullptr}});
  const SuiteResult result = run_suite(a);
  write_report_csv(dir / "report.csv", result.rows);
  manifest.add_file("report.csv");
  manifest.set("notes", result.notes);
  manifest.set("passed", result.passed());
  manifest.finalize("complete");
  std::size_t failures = 0;
  for (const auto& row : result.rows) {
    if (row.pass) continue;
    ++failures;
    std::cerr << "FAIL " << result.name << " " << row.estimator << " t=" << row.t << " mode=" << row.mode.to_string()
              << " value=" << format_double(row.value) << " threshold=" << format_double(row.threshold) << "\n";
  }
  for (const auto& n : result.notes) std::cout << "note: " << n << "\n";
  std::cout << result.name << ": " << (result.rows.size() - failures) << "/" << result.rows.size()
            << " assertions passed; report " << (dir / "report.csv").string() << "\n";
  return failures == 0 && !result.rows.empty() ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------

int cmd_gibbs_partition(double beta, double k, std::size_t samples, std::uint64_t seed) {
  const double exact = truncated_partition_function(beta, k);
  const LatticePtr lat = build_lattice(std::max(1, static_cast<int>(k)));
  RandomSource rng(seed, 0);
  std::vector<double> w(samples);
  for (auto& v : w) v = std::exp(-beta * renormalized_energy(sample_white_noise(lat, rng), k));
  const auto m = sample_moments(w);
  std::cout << "beta=" << format_double(beta) << " K=" << format_double(k) << "\n"
            << "analytic Z = " << format_double(exact) << "\n"
            << "monte carlo Z = " << format_double(m.mean) << " +- " << format_double(m.stderr_) << " (n=" << samples
            << ", 95% CI [" << format_double(m.mean - 1.96 * m.stderr_) << ", "
            << format_double(m.mean + 1.96 * m.stderr_) << "])\n"
            << "z = " << format_double(m.z_score(exact)) << "\n";
  return kExitOk;
}

int cmd_lattice_info(int n) {
  const ModeLattice lat(n);
  std::cout << "N = " << n << "\n|Lambda_N| = " << lat.size() << "\nhalf-lattice size = " << lat.half_size()
            << "\nreal dimension = " << lat.size() << "\nhalf-lattice modes:";
  for (const ModeIndex k : lat.half()) std::cout << " " << k.to_string();
  std::cout << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stocheuler: Galerkin-truncated stochastic 2D Euler toolkit"};
  app.set_config("--config", "", "Key-value config file mirroring the flags (flags take precedence)");
  app.require_subcommand(1);
  app.fallthrough();
  unsigned workers = 1;
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  SampleArgs sa;
  sa.out = default_out_dir();
  auto* sample = app.add_subcommand("sample", "Draw fields from white noise or mu_beta");
  sample->add_option("--measure", sa.measure, "white | gibbs");
  sample->add_option("--beta", sa.beta, "Energy-enstrophy parameter (beta > -1)");
  sample->add_option("--N", sa.N, "Lattice cutoff")->check(CLI::PositiveNumber);
  sample->add_option("--count", sa.count, "Number of samples");
  sample->add_option("--seed", sa.seed, "64-bit seed");
  sample->add_option("--out", sa.out, "Output directory");

  EvolveArgs ea;
  ea.out = default_out_dir();
  auto* evolve = app.add_subcommand("evolve", "Run an ensemble of the truncated SDE");
  evolve->add_option("--N", ea.N)->check(CLI::PositiveNumber);
  evolve->add_option("--alpha", ea.alpha, "Friction/noise strength");
  evolve->add_option("--beta-init", ea.beta_init, "beta of the initial mu_beta law");
  evolve->add_option("--init", ea.init, "gibbs | zero | density");
  evolve->add_option("--density", ea.density, "sine:kx,ky:re|im:amplitude or bump:kx,ky:height:width");
  evolve->add_option("--dt", ea.dt);
  evolve->add_option("--T", ea.t_final, "Final time");
  evolve->add_option("--save-every", ea.save_every);
  evolve->add_option("--ensemble", ea.ensemble, "Ensemble size");
  evolve->add_option("--scheme", ea.scheme, "explicit-rk4 | em | ou-split");
  evolve->add_option("--seed", ea.seed);
  evolve->add_option("--wick-cutoff", ea.wick_cutoff, "Adds renormalized energy to the summary");
  evolve->add_option("--out", ea.out);
  evolve->add_option("--save-trajectories", ea.save_trajectories, "Trajectories written in full");

  CheckArgs ca;
  ca.out = default_out_dir();
  auto* check = app.add_subcommand("check", "Run a diagnostic suite");
  check->add_option("--suite", ca.suite,
                    "drift | conservation | second-moment | stationarity | entropy-decay | chaos | invariance | "
                    "increments | gibbs | fokker-planck")
      ->required();
  check->add_option("--N", ca.N);
  check->add_option("--cutoffs", ca.cutoffs, "Several lattice cutoffs (drift)");
  check->add_option("--trials", ca.trials);
  check->add_option("--T", ca.t_final);
  check->add_option("--dt", ca.dt);
  check->add_option("--alpha", ca.alpha);
  check->add_option("--beta", ca.beta);
  check->add_option("--betas", ca.betas);
  check->add_option("--ensemble", ca.ensemble);
  check->add_option("--samples", ca.samples);
  check->add_option("--save-every", ca.save_every);
  check->add_option("--seed", ca.seed);
  check->add_option("--from-run", ca.from_run, "Evolve output directory to test (stationarity)");
  check->add_option("--out", ca.out);

  auto* gibbs = app.add_subcommand("gibbs", "Gibbs-measure utilities");
  gibbs->require_subcommand(1);
  auto* partition = gibbs->add_subcommand("partition", "Analytic vs Monte Carlo Z_{beta,K}");
  double g_beta = 0.0, g_k = 1.0;
  std::size_t g_samples = 100'000;
  std::uint64_t g_seed = 0;
  partition->add_option("--beta", g_beta)->required();
  partition->add_option("--K", g_k)->required();
  partition->add_option("--samples", g_samples);
  partition->add_option("--seed", g_seed);

  auto* lattice = app.add_subcommand("lattice", "Lattice utilities");
  lattice->require_subcommand(1);
  auto* info = lattice->add_subcommand("info", "Describe Lambda_N");
  int l_n = 1;
  info->add_option("--N", l_n)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sample) {
      sa.workers = workers;
      return cmd_sample(sa);
    }
    if (*evolve) {
      ea.workers = workers;
      return cmd_evolve(ea);
    }
    if (*check) {
      ca.workers = workers;
      return cmd_check(ca);
    }
    if (*partition) return cmd_gibbs_partition(g_beta, g_k, g_samples, g_seed);
    if (*info) return cmd_lattice_info(l_n);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
