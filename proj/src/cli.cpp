#include "spiked/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "spiked/eig.hpp"
#include "spiked/experiments.hpp"
#include "spiked/io.hpp"
#include "spiked/matgen.hpp"
#include "spiked/recover.hpp"
#include "spiked/spectral.hpp"

namespace spiked::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Thrown for parameter combinations CLI11 cannot express; maps to kUsage.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const json& parameters, std::uint64_t seed) {
  const json manifest{{"tool", "spiked"},
                      {"version", kVersion},
                      {"subcommand", subcommand},
                      {"master_seed", seed},
                      {"parameters", parameters},
                      {"timestamp", utc_timestamp()}};
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw UsageError(std::string(flag) + ": cannot parse '" + item + "'");
    values.push_back(v);
  }
  if (values.empty()) throw UsageError(std::string(flag) + ": empty grid");
  return values;
}

SymmetricMatrix<double> load_symmetric(const fs::path& path) {
  const Matrix<double> m = io::read_matrix(path);
  if (m.rows() != m.cols())
    throw io::MalformedFile(path.string() + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                            ", expected a square matrix");
  return SymmetricMatrix<double>::checked(m);
}

// gen ---------------------------------------------------------------------------

struct GenParams {
  Index n = 1000;
  double lambda = 4.0;
  double tau = 0.2;
  double block_fraction = 0.02;
  std::uint64_t seed = 1;
  std::string format = "binary";
  std::string out;
};

int cmd_gen(const GenParams& p, std::ostream& out, std::ostream& err) {
  const auto fmt = io::format_from_string(p.format);
  const auto x1 = make_signal_block<double>(p.n, p.block_fraction, p.tau);
  if (x1.tau_violations() > 0)
    err << "warning: " << x1.tau_violations() << " signal entries equal " << x1[0] << " > tau = " << p.tau
        << " (block of " << block_size(p.n, p.block_fraction) << " entries at n = " << p.n << ")\n";
  const Seed seed{p.seed};
  const auto noise = sample_goe<double>(p.n, derive(seed, Stream::Noise));
  const auto observed = assemble_spiked(p.lambda, x1, noise);
  const fs::path dir(p.out);
  ensure_dir(dir);
  const std::string ext(io::extension(fmt));
  io::write_matrix(dir / ("matrix" + ext), observed.matrix(), fmt);
  io::write_vector(dir / ("signal" + ext), x1.entries(), fmt);
  write_manifest(dir, "gen",
                 {{"n", p.n}, {"lambda", p.lambda}, {"tau", p.tau}, {"block_fraction", p.block_fraction},
                  {"seed", p.seed}, {"format", p.format}, {"out", p.out}},
                 p.seed);
  out << "wrote " << (dir / ("matrix" + ext)).string() << " and " << (dir / ("signal" + ext)).string() << "\n";
  return kOk;
}

// eig ---------------------------------------------------------------------------

struct EigParams {
  std::string matrix;
  std::string out;
  double tol = 1e-10;
  Index max_iter = 1000;
  std::uint64_t seed = 1;
  bool full = false;
  double normalization = 1.0;
  Index spectrum_cap = kDefaultSpectrumCap;
  std::string format = "csv";
};

int cmd_eig(const EigParams& p, std::ostream& out, std::ostream&) {
  const auto fmt = io::format_from_string(p.format);
  const auto m = load_symmetric(p.matrix);
  EigenOptions opts;
  opts.tol = p.tol;
  opts.max_iter = p.max_iter;
  opts.start_seed = derive(Seed{p.seed}, Stream::EigenStart);
  const auto pair = leading_eigenpair(m, opts);
  const fs::path dir(p.out);
  ensure_dir(dir);
  io::write_text(dir / "eigenpair.csv", "value,iterations,residual,used_fallback\n" + io::format_double(pair.value) +
                                            "," + std::to_string(pair.iterations) + "," +
                                            io::format_double(pair.residual) + "," +
                                            (pair.used_fallback ? "1" : "0") + "\n");
  io::write_vector(dir / ("eigenvector" + std::string(io::extension(fmt))), pair.vector, fmt);
  out << "leading eigenvalue " << io::format_double(pair.value) << " (" << pair.iterations << " iterations)\n";
  if (p.full) {
    const auto spectrum = full_spectrum(m, p.spectrum_cap);
    std::string csv = "eigenvalue\n";
    for (Index i = 0; i < spectrum.size(); ++i) csv += io::format_double(spectrum.values[i]) + "\n";
    io::write_text(dir / "spectrum.csv", csv);
    const auto esd = esd_of(spectrum, p.normalization);
    std::string esd_csv = "location,weight\n";
    for (double x : esd.points) esd_csv += io::format_double(x) + "," + io::format_double(esd.weight()) + "\n";
    io::write_text(dir / "esd.csv", esd_csv);
    out << "ks_distance_to_semicircle " << io::format_double(ks_distance_to_semicircle(esd)) << "\n";
  }
  write_manifest(dir, "eig",
                 {{"matrix", p.matrix}, {"tol", p.tol}, {"max_iter", p.max_iter}, {"seed", p.seed},
                  {"full_spectrum", p.full}, {"normalization", p.normalization}, {"spectrum_cap", p.spectrum_cap},
                  {"format", p.format}, {"out", p.out}},
                 p.seed);
  return kOk;
}

// recover -------------------------------------------------------------------------

struct RecoverParams {
  std::string matrix;
  std::string true_vector;
  std::string out;
  std::string config_file;
  RecoveryConfig config;
  std::string penalty = "literal";
  std::uint64_t seed = 1;
  std::string format = "csv";
};

int cmd_recover(RecoverParams p, std::ostream& out, std::ostream& err) {
  const auto fmt = io::format_from_string(p.format);
  p.config.penalty = penalty_from_string(p.penalty);
  p.config.validate();
  const auto m = load_symmetric(p.matrix);
  std::optional<Vector<double>> truth;
  if (!p.true_vector.empty()) {
    truth = io::read_vector(p.true_vector);
    if (truth->size() != m.dim())
      throw io::MalformedFile("true vector has length " + std::to_string(truth->size()) + ", matrix dimension is " +
                              std::to_string(m.dim()));
  }
  const fs::path dir(p.out);
  ensure_dir(dir);
  const std::string ext(io::extension(fmt));

  p.config.record_trajectory = true;
  const auto trace = descend(m, p.config, derive(Seed{p.seed}, Stream::Init));
  std::string status = "ok";
  std::optional<Vector<double>> x_hat;
  try {
    x_hat = project_box_sphere(trace.x, p.config.tau);
  } catch (const ProjectionFailure& e) {
    status = "projection_failure";
    err << "error: " << e.what() << " after " << trace.iterations << " iterations\n";
  }
  std::string header = "status,converged,iterations,final_change,tau_violations";
  std::string row = status + "," + (trace.converged ? "1" : "0") + "," + std::to_string(trace.iterations) + "," +
                    io::format_double(trace.trajectory.empty() ? kNaN : trace.trajectory.back());
  if (x_hat) {
    row += "," + std::to_string((x_hat->array() > p.config.tau + 1e-9).count());
    io::write_vector(dir / ("x_hat" + ext), *x_hat, fmt);
  } else {
    row += ",";
    io::write_vector(dir / ("x_raw" + ext), trace.x, fmt);
  }
  if (truth) {
    header += ",relative_error";
    row += "," + (x_hat ? io::format_double(relative_error(*truth, *x_hat)) : std::string("nan"));
  }
  io::write_text(dir / "result.csv", header + "\n" + row + "\n");
  std::string traj = "iteration,relative_change\n";
  for (std::size_t k = 0; k < trace.trajectory.size(); ++k)
    traj += std::to_string(k + 1) + "," + io::format_double(trace.trajectory[k]) + "\n";
  io::write_text(dir / "trajectory.csv", traj);
  write_manifest(dir, "recover",
                 {{"matrix", p.matrix}, {"true_vector", p.true_vector}, {"alpha", p.config.alpha},
                  {"gamma", p.config.gamma}, {"tol", p.config.tol}, {"max_iter", p.config.max_iter},
                  {"tau", p.config.tau}, {"penalty_variant", p.penalty}, {"seed", p.seed}, {"format", p.format},
                  {"out", p.out}},
                 p.seed);
  out << "status " << status << ", converged " << (trace.converged ? "yes" : "no") << " after " << trace.iterations
      << " iterations\n";
  return x_hat ? kOk : kNumerical;
}

/// key=value lines; '#' starts a comment. Keys are recover flag names without dashes.
std::map<std::string, std::string> read_key_value_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// sweep ---------------------------------------------------------------------------

struct SweepParams {
  std::string kind = "wigner";
  std::vector<double> lambdas{4.0};
  std::vector<Index> ns{2000};
  Index n = 2000;
  Index p = 500;
  Index trials = 200;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  RecoveryConfig config;
  std::string penalty = "literal";
  double spike = 4.0;
  double block_fraction = 0.02;
  double eig_tol = 1e-10;
  Index eig_max_iter = 1000;
  bool json_mirror = false;
  std::string out;
};

json to_json(const SweepParams& p) {
  return {{"kind", p.kind},
          {"lambdas", p.lambdas},
          {"ns", p.ns},
          {"n", p.n},
          {"p", p.p},
          {"trials", p.trials},
          {"seed", p.seed},
          {"alpha", p.config.alpha},
          {"gamma", p.config.gamma},
          {"tol", p.config.tol},
          {"max_iter", p.config.max_iter},
          {"tau", p.config.tau},
          {"penalty_variant", p.penalty},
          {"lambda", p.spike},
          {"block_fraction", p.block_fraction},
          {"eig_tol", p.eig_tol},
          {"eig_max_iter", p.eig_max_iter},
          {"json", p.json_mirror}};
}

SweepParams sweep_from_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  json m;
  try {
    m = json::parse(is);
  } catch (const json::exception& e) {
    throw io::MalformedFile("manifest " + path.string() + ": " + e.what());
  }
  if (m.value("subcommand", "") != "sweep") throw UsageError("manifest " + path.string() + " is not a sweep manifest");
  try {
    const json& j = m.at("parameters");
    SweepParams p;
    p.kind = j.at("kind").get<std::string>();
    p.lambdas = j.at("lambdas").get<std::vector<double>>();
    p.ns = j.at("ns").get<std::vector<Index>>();
    p.n = j.at("n").get<Index>();
    p.p = j.at("p").get<Index>();
    p.trials = j.at("trials").get<Index>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.config.alpha = j.at("alpha").get<double>();
    p.config.gamma = j.at("gamma").get<double>();
    p.config.tol = j.at("tol").get<double>();
    p.config.max_iter = j.at("max_iter").get<Index>();
    p.config.tau = j.at("tau").get<double>();
    p.penalty = j.at("penalty_variant").get<std::string>();
    p.spike = j.at("lambda").get<double>();
    p.block_fraction = j.at("block_fraction").get<double>();
    p.eig_tol = j.at("eig_tol").get<double>();
    p.eig_max_iter = j.at("eig_max_iter").get<Index>();
    p.json_mirror = j.at("json").get<bool>();
    return p;
  } catch (const json::exception& e) {
    throw io::MalformedFile("manifest " + path.string() + ": " + e.what());
  }
}

int cmd_sweep(SweepParams p, std::ostream& out, std::ostream& err) {
  const SweepKind kind = sweep_kind_from_string(p.kind);
  if (p.trials < 1) throw UsageError("--trials must be >= 1");
  p.config.penalty = penalty_from_string(p.penalty);
  HarnessOptions opts;
  opts.threads = p.threads;
  opts.eig.tol = p.eig_tol;
  opts.eig.max_iter = p.eig_max_iter;
  const Seed master{p.seed};
  const fs::path dir(p.out);

  auto warn_signal = [&](const std::vector<Index>& ns, double tau) {
    for (Index n : ns) {
      if (block_size(n, p.block_fraction) < 1) continue;
      const auto x1 = make_signal_block<double>(n, p.block_fraction, tau);
      if (x1.tau_violations() > 0)
        err << "warning: at n = " << n << " the signal block entries " << x1[0] << " exceed tau = " << tau << "\n";
    }
  };

  std::vector<TrialRecord> records;
  switch (kind) {
    case SweepKind::Wigner:
      warn_signal(p.ns, p.config.tau);
      ensure_dir(dir);
      records = run_wigner_sweep(p.lambdas, p.ns, p.trials, master, opts, p.block_fraction);
      break;
    case SweepKind::Covariance:
      if (p.p >= p.n) err << "warning: p >= n, outside the 0 < c < 1 regime\n";
      ensure_dir(dir);
      records = run_covariance_sweep(p.lambdas, p.p, p.n, p.trials, master, opts);
      break;
    case SweepKind::Table1:
      warn_signal(p.ns, p.config.tau);
      ensure_dir(dir);
      records = table1_trials(p.ns, p.trials, p.config, master, opts, p.spike, p.block_fraction);
      break;
    case SweepKind::Esd: {
      ensure_dir(dir);
      const EsdReport report = run_esd_experiment(p.n, p.trials, master, opts);
      io::write_text(dir / "esd.csv", esd_to_csv(report));
      if (p.json_mirror) io::write_text(dir / "esd.json", to_json(report).dump(2) + "\n");
      write_manifest(dir, "sweep", to_json(p), p.seed);
      out << "mean_ks " << io::format_double(report.mean_ks) << " over " << (p.trials - report.excluded)
          << " trials (excluded " << report.excluded << ")\n";
      return kOk;
    }
  }
  const auto summaries = summarize(records);
  io::write_text(dir / "trials.csv", trials_to_csv(records, master));
  io::write_text(dir / "summary.csv", summaries_to_csv(summaries, master));
  if (p.json_mirror) {
    json jt = json::array(), js = json::array();
    for (const auto& r : records) jt.push_back(to_json(r));
    for (const auto& s : summaries) js.push_back(to_json(s));
    io::write_text(dir / "trials.json", json{{"master_seed", p.seed}, {"parameters", to_json(p)}, {"trials", jt}}.dump(2) + "\n");
    io::write_text(dir / "summary.json",
                   json{{"master_seed", p.seed}, {"parameters", to_json(p)}, {"summaries", js}}.dump(2) + "\n");
  }
  write_manifest(dir, "sweep", to_json(p), p.seed);

  Index excluded = 0;
  for (const auto& s : summaries) {
    excluded += s.eig_excluded + s.opt_excluded;
    out << to_string(s.kind) << " n=" << s.n << (s.kind == SweepKind::Covariance ? " p=" + std::to_string(s.p) : "")
        << " lambda=" << io::format_double(s.lambda) << " trials=" << s.trials
        << " lambda_hat=" << io::format_double(s.lambda_hat.mean);
    if (s.kind == SweepKind::Table1)
      out << " err_opt=" << io::format_double(s.err_opt.mean) << " err_eig_raw=" << io::format_double(s.err_eig_raw.mean)
          << " err_eig_aligned=" << io::format_double(s.err_eig_aligned.mean) << " opt_excluded=" << s.opt_excluded;
    else
      out << " overlap=" << io::format_double(s.overlap.mean);
    out << " eig_excluded=" << s.eig_excluded << "\n";
  }
  if (kind == SweepKind::Table1)
    out << "note: err_eig_raw uses the solver's eigenvector sign as returned; err_eig_aligned flips it toward x1\n";
  if (excluded > 0) out << "excluded trial metrics: " << excluded << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spiked random-matrix simulations and box-constrained rank-one recovery", "spiked"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenParams gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a spiked matrix X = lambda x1 x1^T + G and its signal");
  gen_cmd->add_option("--n", gen.n, "Dimension")->capture_default_str();
  gen_cmd->add_option("--lambda", gen.lambda, "Spike strength")->capture_default_str();
  gen_cmd->add_option("--tau", gen.tau, "Box bound for the signal entries")->capture_default_str();
  gen_cmd->add_option("--block-fraction", gen.block_fraction, "Fraction of nonzero signal entries")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->envname("SPIKED_SEED")->capture_default_str();
  gen_cmd->add_option("--format", gen.format, "binary or csv")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  EigParams eig;
  auto* eig_cmd = app.add_subcommand("eig", "Leading eigenpair (and optionally the full spectrum) of a matrix file");
  eig_cmd->add_option("--matrix", eig.matrix, "Input matrix file")->required();
  eig_cmd->add_option("--out", eig.out, "Output directory")->required();
  eig_cmd->add_option("--tol", eig.tol, "Residual tolerance relative to the Frobenius norm")->capture_default_str();
  eig_cmd->add_option("--max-iter", eig.max_iter, "Lanczos step cap")->capture_default_str();
  eig_cmd->add_option("--seed", eig.seed, "Seed for the Lanczos start vector")->envname("SPIKED_SEED")->capture_default_str();
  eig_cmd->add_flag("--full-spectrum", eig.full, "Also write all eigenvalues, the ESD and its KS distance");
  eig_cmd->add_option("--normalization", eig.normalization, "ESD scale: atoms at eigenvalue / normalization")
      ->capture_default_str();
  eig_cmd->add_option("--spectrum-cap", eig.spectrum_cap, "Largest dimension accepted by --full-spectrum")
      ->capture_default_str();
  eig_cmd->add_option("--format", eig.format, "Eigenvector file format: binary or csv")->capture_default_str();

  RecoverParams rec;
  auto* rec_cmd = app.add_subcommand("recover", "Box-constrained gradient-descent recovery of x1 from a matrix file");
  rec_cmd->add_option("--matrix", rec.matrix, "Input symmetric matrix file")->required();
  rec_cmd->add_option("--true-vector", rec.true_vector, "Planted signal, for relative error reporting");
  rec_cmd->add_option("--out", rec.out, "Output directory")->required();
  rec_cmd->add_option("--config", rec.config_file, "key=value file; flags given on the command line win");
  auto* o_alpha = rec_cmd->add_option("--alpha", rec.config.alpha, "Step size")->capture_default_str();
  auto* o_gamma = rec_cmd->add_option("--gamma", rec.config.gamma, "Penalty weight")->capture_default_str();
  auto* o_tol = rec_cmd->add_option("--tol", rec.config.tol, "Relative-change stopping threshold")->capture_default_str();
  auto* o_max = rec_cmd->add_option("--max-iter", rec.config.max_iter, "Iteration cap")->capture_default_str();
  auto* o_tau = rec_cmd->add_option("--tau", rec.config.tau, "Box bound")->capture_default_str();
  auto* o_pen = rec_cmd->add_option("--penalty-variant", rec.penalty, "literal or gradient")->capture_default_str();
  auto* o_seed =
      rec_cmd->add_option("--seed", rec.seed, "Seed for the initial iterate")->envname("SPIKED_SEED")->capture_default_str();
  rec_cmd->add_option("--format", rec.format, "Output vector format: binary or csv")->capture_default_str();

  SweepParams sw;
  std::string lambdas_text, ns_text, manifest_path;
  auto* sw_cmd = app.add_subcommand("sweep", "Monte-Carlo harness: wigner, covariance, table1 or esd");
  auto* s_kind = sw_cmd->add_option("--kind", sw.kind, "wigner | covariance | table1 | esd")->capture_default_str();
  auto* s_lambdas = sw_cmd->add_option("--lambdas", lambdas_text, "Comma-separated spike grid (wigner, covariance)");
  auto* s_ns = sw_cmd->add_option("--ns", ns_text, "Comma-separated dimension grid (wigner, table1)");
  auto* s_n = sw_cmd->add_option("--n", sw.n, "Dimension (esd) or sample count (covariance)")->capture_default_str();
  auto* s_p = sw_cmd->add_option("--p", sw.p, "Feature dimension (covariance)")->capture_default_str();
  auto* s_trials = sw_cmd->add_option("--trials", sw.trials, "Trials per grid point")->capture_default_str();
  auto* s_seed = sw_cmd->add_option("--seed", sw.seed, "Master seed")->envname("SPIKED_SEED")->capture_default_str();
  sw_cmd->add_option("--threads", sw.threads, "Worker threads (0 = available parallelism)")->capture_default_str();
  auto* s_alpha = sw_cmd->add_option("--alpha", sw.config.alpha, "Step size (table1)")->capture_default_str();
  auto* s_gamma = sw_cmd->add_option("--gamma", sw.config.gamma, "Penalty weight (table1)")->capture_default_str();
  auto* s_tol = sw_cmd->add_option("--tol", sw.config.tol, "Descent stopping threshold (table1)")->capture_default_str();
  auto* s_max = sw_cmd->add_option("--max-iter", sw.config.max_iter, "Descent iteration cap (table1)")->capture_default_str();
  auto* s_tau = sw_cmd->add_option("--tau", sw.config.tau, "Box bound (table1, wigner)")->capture_default_str();
  auto* s_pen = sw_cmd->add_option("--penalty-variant", sw.penalty, "literal or gradient (table1)")->capture_default_str();
  auto* s_spike = sw_cmd->add_option("--lambda", sw.spike, "Spike strength (table1)")->capture_default_str();
  auto* s_bf = sw_cmd->add_option("--block-fraction", sw.block_fraction, "Signal block fraction")->capture_default_str();
  auto* s_etol = sw_cmd->add_option("--eig-tol", sw.eig_tol, "Eigensolver tolerance")->capture_default_str();
  auto* s_emax = sw_cmd->add_option("--eig-max-iter", sw.eig_max_iter, "Eigensolver step cap")->capture_default_str();
  auto* s_json = sw_cmd->add_flag("--json", sw.json_mirror, "Also write JSON mirrors of the CSV outputs");
  sw_cmd->add_option("--out", sw.out, "Output directory")->required();
  sw_cmd->add_option("--from-manifest", manifest_path, "Re-run the sweep recorded in a manifest.json");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out, err);
    if (*eig_cmd) return cmd_eig(eig, out, err);
    if (*rec_cmd) {
      if (!rec.config_file.empty()) {
        const std::map<std::string, CLI::Option*> known{{"alpha", o_alpha}, {"gamma", o_gamma},
                                                       {"tol", o_tol},     {"max-iter", o_max},
                                                       {"tau", o_tau},     {"penalty-variant", o_pen},
                                                       {"seed", o_seed}};
        for (const auto& [key, value] : read_key_value_file(rec.config_file)) {
          const auto it = known.find(key);
          if (it == known.end()) throw UsageError("unknown key '" + key + "' in " + rec.config_file);
          if (it->second->count() == 0 && (key != "seed" || !std::getenv("SPIKED_SEED"))) {
            try {
              it->second->add_result(value);
              it->second->run_callback();
            } catch (const CLI::Error& e) {
              throw UsageError("bad value for '" + key + "' in " + rec.config_file + ": " + e.what());
            }
          }
        }
      }
      return cmd_recover(rec, out, err);
    }
    if (*sw_cmd) {
      if (!manifest_path.empty()) {
        for (CLI::Option* o : {s_kind, s_lambdas, s_ns, s_n, s_p, s_trials, s_seed, s_alpha, s_gamma, s_tol, s_max,
                               s_tau, s_pen, s_spike, s_bf, s_etol, s_emax, s_json})
          if (o->count() > 0) throw UsageError(o->get_name() + " cannot be combined with --from-manifest");
        const std::string out_dir = sw.out;
        const unsigned threads = sw.threads;
        sw = sweep_from_manifest(manifest_path);
        sw.out = out_dir;
        sw.threads = threads;
      } else {
        const SweepKind kind = sweep_kind_from_string(sw.kind);
        const bool covariance = kind == SweepKind::Covariance, table1 = kind == SweepKind::Table1;
        const bool uses_ns = kind == SweepKind::Wigner || table1;
        if (s_lambdas->count() && !(kind == SweepKind::Wigner || covariance))
          throw UsageError("--lambdas applies to wigner and covariance sweeps");
        if (s_ns->count() && !uses_ns) throw UsageError("--ns applies to wigner and table1 sweeps");
        if (s_n->count() && uses_ns) throw UsageError("--n applies to esd and covariance sweeps; use --ns");
        if (s_p->count() && !covariance) throw UsageError("--p applies to covariance sweeps");
        for (CLI::Option* o : {s_alpha, s_gamma, s_tol, s_max, s_pen, s_spike})
          if (o->count() && !table1) throw UsageError(o->get_name() + " applies to table1 sweeps");
        if (!lambdas_text.empty()) sw.lambdas = parse_list<double>(lambdas_text, "--lambdas");
        else if (covariance) sw.lambdas = {3.0};
        if (!ns_text.empty()) sw.ns = parse_list<Index>(ns_text, "--ns");
        else if (table1) sw.ns = {500, 1000, 2500, 5000};
      }
      return cmd_sweep(sw, out, err);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const io::MalformedFile& e) {
    err << "malformed input: " << e.what() << "\n";
    return kMalformed;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const InvalidArgument& e) {
    const std::string what = e.what();
    err << "error: " << what << "\n";
    return what.find("not symmetric") != std::string::npos ? kAsymmetric : kUsage;
  } catch (const ConvergenceError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const ProjectionFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace spiked::cli
