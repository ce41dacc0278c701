#include "spiked/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "spiked/io.hpp"
#include "spiked/matgen.hpp"
#include "spiked/random.hpp"
#include "spiked/spectral.hpp"

namespace spiked {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void add_status(TrialRecord& r, const std::string& tag) {
  r.status = r.status == "ok" ? tag : r.status + ";" + tag;
}

/// Leading eigenpair of `m` plus the eigenvector metrics against `x1`.
void measure_eigen(TrialRecord& r, const SymmetricMatrix<double>& m, const Vector<double>& x1, Seed seed,
                   const HarnessOptions& opts) {
  EigenOptions eopts = opts.eig;
  eopts.start_seed = derive(seed, Stream::EigenStart);
  try {
    const EigenPair<double> pair = leading_eigenpair(m, eopts);
    r.lambda_hat = pair.value;
    r.overlap = overlap(pair.vector, x1);
    r.err_eig_raw = relative_error(x1, pair.vector);
    r.err_eig_aligned = relative_error(x1, sign_align(pair.vector, x1));
    r.eig_ok = true;
  } catch (const ConvergenceError&) {
    add_status(r, "eig_nonconvergence");
  } catch (const NumericalFailure&) {
    add_status(r, "eig_numerical_failure");
  }
}

void check_grid(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

struct Job {
  std::size_t group;
  std::uint64_t trial;
};

struct MetricAccumulator {
  std::vector<double> values;

  void add(double v) {
    if (std::isfinite(v)) values.push_back(v);
  }

  MetricSummary finish(bool& single) const {
    MetricSummary s;
    s.count = static_cast<Index>(values.size());
    if (values.empty()) return s;
    double sum = 0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() == 1) {
      s.sd = 0;
      single = true;
      return s;
    }
    double sq = 0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
    return s;
  }
};

std::string fmt(double v) { return io::format_double(v); }
std::string fmt(Index v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "1" : "0"; }

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::Wigner: return "wigner";
    case SweepKind::Covariance: return "covariance";
    case SweepKind::Table1: return "table1";
    case SweepKind::Esd: return "esd";
  }
  return "unknown";
}

SweepKind sweep_kind_from_string(const std::string& s) {
  if (s == "wigner") return SweepKind::Wigner;
  if (s == "covariance") return SweepKind::Covariance;
  if (s == "table1") return SweepKind::Table1;
  if (s == "esd") return SweepKind::Esd;
  throw InvalidArgument("unknown sweep kind '" + s + "' (expected wigner, covariance, table1 or esd)");
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

Seed trial_seed(Seed master, std::uint64_t trial) { return derive(master, trial); }

std::vector<TrialRecord> run_wigner_sweep(const std::vector<double>& lambdas, const std::vector<Index>& ns,
                                          Index trials, Seed master, const HarnessOptions& opts,
                                          double block_fraction) {
  check_grid(!lambdas.empty(), "run_wigner_sweep: empty lambda grid");
  check_grid(!ns.empty(), "run_wigner_sweep: empty n grid");
  check_grid(trials >= 1, "run_wigner_sweep: trials must be >= 1");
  for (double l : lambdas) detail::require(l >= 0.0, "run_wigner_sweep: lambda must be >= 0, got ", l);
  for (Index n : ns) {
    detail::require(n >= 1, "run_wigner_sweep: n must be >= 1, got ", n);
    detail::require(block_size(n, block_fraction) >= 1, "run_wigner_sweep: signal block is empty at n=", n);
  }

  const auto per_group = static_cast<std::size_t>(trials);
  std::vector<TrialRecord> records(lambdas.size() * ns.size() * per_group);
  parallel_for(records.size(), opts.threads, [&](std::size_t idx) {
    const std::size_t group = idx / per_group;
    const double lambda = lambdas[group / ns.size()];
    const Index n = ns[group % ns.size()];
    const auto trial = static_cast<std::uint64_t>(idx % per_group);
    const auto start = Clock::now();

    TrialRecord r;
    r.kind = SweepKind::Wigner;
    r.n = n;
    r.lambda = lambda;
    r.trial = trial;
    r.seed = trial_seed(master, trial);
    if (lambda > 0) {
      const auto pred = bbp_wigner_prediction(lambda);
      r.predicted_lambda_hat = pred.eigenvalue_limit;
      r.predicted_overlap = pred.overlap_limit;
    } else {
      r.predicted_lambda_hat = 2.0;
      r.predicted_overlap = 0.0;
    }
    const auto x1 = make_signal_block<double>(n, block_fraction);
    const auto noise = sample_goe<double>(n, derive(r.seed, Stream::Noise));
    const auto observed = assemble_spiked(lambda, x1, noise);
    measure_eigen(r, observed, x1.entries(), r.seed, opts);
    r.wall_time = seconds_since(start);
    records[idx] = std::move(r);
  });
  return records;
}

std::vector<TrialRecord> run_covariance_sweep(const std::vector<double>& lambda1s, Index p, Index n, Index trials,
                                              Seed master, const HarnessOptions& opts) {
  check_grid(!lambda1s.empty(), "run_covariance_sweep: empty lambda1 grid");
  check_grid(trials >= 1, "run_covariance_sweep: trials must be >= 1");
  detail::require(p >= 1 && n >= 1, "run_covariance_sweep: p and n must be >= 1");
  detail::require(p < n, "run_covariance_sweep: requires p < n, got p=", p, " n=", n);
  for (double l : lambda1s) detail::require(l >= 1.0, "run_covariance_sweep: lambda1 must be >= 1, got ", l);
  const double c = static_cast<double>(p) / static_cast<double>(n);

  const auto per_group = static_cast<std::size_t>(trials);
  std::vector<TrialRecord> records(lambda1s.size() * per_group);
  Vector<double> e1 = Vector<double>::Unit(p, 0);
  parallel_for(records.size(), opts.threads, [&](std::size_t idx) {
    const double lambda1 = lambda1s[idx / per_group];
    const auto trial = static_cast<std::uint64_t>(idx % per_group);
    const auto start = Clock::now();

    TrialRecord r;
    r.kind = SweepKind::Covariance;
    r.n = n;
    r.p = p;
    r.lambda = lambda1;
    r.trial = trial;
    r.seed = trial_seed(master, trial);
    r.predicted_lambda_hat = bbp_covariance_prediction(lambda1, c).eigenvalue_limit;

    CovarianceModel model{p, n, {}};
    if (lambda1 > 1.0) model.spikes.push_back(lambda1);
    const auto s = sample_spiked_covariance<double>(model, derive(r.seed, Stream::Covariance));
    measure_eigen(r, s, e1, r.seed, opts);
    // Eigenvector errors against e1 carry no meaning here; overlap with the spike axis is kept.
    r.err_eig_raw = kNaN;
    r.err_eig_aligned = kNaN;
    r.wall_time = seconds_since(start);
    records[idx] = std::move(r);
  });
  return records;
}

std::vector<TrialRecord> table1_trials(const std::vector<Index>& ns, Index trials, const RecoveryConfig& config,
                                       Seed master, const HarnessOptions& opts, double lambda,
                                       double block_fraction) {
  check_grid(!ns.empty(), "run_table1: empty n grid");
  check_grid(trials >= 1, "run_table1: trials must be >= 1");
  detail::require(lambda > 0.0, "run_table1: lambda must be positive, got ", lambda);
  config.validate();
  for (Index n : ns) {
    detail::require(n >= 1, "run_table1: n must be >= 1, got ", n);
    detail::require(block_size(n, block_fraction) >= 1, "run_table1: signal block is empty at n=", n);
  }

  const auto per_group = static_cast<std::size_t>(trials);
  std::vector<TrialRecord> records(ns.size() * per_group);
  const auto pred = bbp_wigner_prediction(lambda);
  parallel_for(records.size(), opts.threads, [&](std::size_t idx) {
    const Index n = ns[idx / per_group];
    const auto trial = static_cast<std::uint64_t>(idx % per_group);
    const auto start = Clock::now();

    TrialRecord r;
    r.kind = SweepKind::Table1;
    r.n = n;
    r.lambda = lambda;
    r.trial = trial;
    r.seed = trial_seed(master, trial);
    r.predicted_lambda_hat = pred.eigenvalue_limit;
    r.predicted_overlap = pred.overlap_limit;

    const auto x1 = make_signal_block<double>(n, block_fraction, config.tau);
    const auto noise = sample_goe<double>(n, derive(r.seed, Stream::Noise));
    const auto observed = assemble_spiked(lambda, x1, noise);
    measure_eigen(r, observed, x1.entries(), r.seed, opts);

    try {
      const DescentTrace<double> trace = descend(observed, config, derive(r.seed, Stream::Init));
      r.iterations = trace.iterations;
      r.converged = trace.converged;
      const Vector<double> x_hat = project_box_sphere(trace.x, config.tau);
      r.err_opt = relative_error(x1, x_hat);
      r.tau_violations = (x_hat.array() > config.tau + 1e-9).count();
      r.opt_ok = true;
    } catch (const ProjectionFailure&) {
      add_status(r, "projection_failure");
    } catch (const NumericalFailure& e) {
      r.iterations = e.iteration();
      add_status(r, "descent_numerical_failure");
    }
    r.wall_time = seconds_since(start);
    records[idx] = std::move(r);
  });
  return records;
}

std::vector<SweepSummary> run_table1(const std::vector<Index>& ns, Index trials, const RecoveryConfig& config,
                                     Seed master, const HarnessOptions& opts, double lambda, double block_fraction) {
  return summarize(table1_trials(ns, trials, config, master, opts, lambda, block_fraction));
}

std::vector<SweepSummary> summarize(const std::vector<TrialRecord>& records, GroupBy group_by) {
  detail::require(!records.empty(), "summarize: no records");
  using Key = std::tuple<int, Index, Index, double>;
  struct Group {
    const TrialRecord* first = nullptr;
    Index trials = 0, eig_failed = 0, opt_failed = 0;
    MetricAccumulator lambda_hat, overlap, err_opt, err_eig_raw, err_eig_aligned, iterations;
  };
  std::map<Key, Group> groups;
  for (const TrialRecord& r : records) {
    const Key key{static_cast<int>(r.kind), group_by.n ? r.n : 0, group_by.n ? r.p : 0,
                  group_by.lambda ? r.lambda : 0.0};
    Group& g = groups[key];
    if (!g.first) g.first = &r;
    ++g.trials;
    if (!r.eig_ok) ++g.eig_failed;
    if (r.kind == SweepKind::Table1 && !r.opt_ok) ++g.opt_failed;
    g.lambda_hat.add(r.lambda_hat);
    g.overlap.add(r.overlap);
    g.err_opt.add(r.err_opt);
    g.err_eig_raw.add(r.err_eig_raw);
    g.err_eig_aligned.add(r.err_eig_aligned);
    if (r.kind == SweepKind::Table1) g.iterations.add(static_cast<double>(r.iterations));
  }

  std::vector<SweepSummary> out;
  out.reserve(groups.size());
  for (const auto& [key, g] : groups) {
    SweepSummary s;
    s.kind = g.first->kind;
    s.n = group_by.n ? g.first->n : 0;
    s.p = group_by.n ? g.first->p : 0;
    s.lambda = group_by.lambda ? g.first->lambda : kNaN;
    s.trials = g.trials;
    s.lambda_hat = g.lambda_hat.finish(s.single_record);
    s.overlap = g.overlap.finish(s.single_record);
    s.err_opt = g.err_opt.finish(s.single_record);
    s.err_eig_raw = g.err_eig_raw.finish(s.single_record);
    s.err_eig_aligned = g.err_eig_aligned.finish(s.single_record);
    s.iterations = g.iterations.finish(s.single_record);
    s.eig_excluded = g.eig_failed;
    s.opt_excluded = g.opt_failed;
    if (group_by.lambda) {
      s.predicted_lambda_hat = g.first->predicted_lambda_hat;
      s.predicted_overlap = g.first->predicted_overlap;
    }
    out.push_back(s);
  }
  return out;
}

EsdReport run_esd_experiment(Index n, Index trials, Seed master, const HarnessOptions& opts) {
  check_grid(trials >= 1, "run_esd_experiment: trials must be >= 1");
  detail::require(n >= 1, "run_esd_experiment: n must be >= 1, got ", n);
  detail::require(n <= opts.spectrum_cap, "run_esd_experiment: n=", n, " exceeds the spectrum cap ",
                  opts.spectrum_cap);
  EsdReport report;
  report.n = n;
  report.master = master;
  report.ks.assign(static_cast<std::size_t>(trials), kNaN);
  parallel_for(report.ks.size(), opts.threads, [&](std::size_t t) {
    const auto goe = sample_goe<double>(n, derive(trial_seed(master, t), Stream::Noise));
    try {
      report.ks[t] = ks_distance_to_semicircle(esd_of(full_spectrum(goe, opts.spectrum_cap), 1.0));
    } catch (const ConvergenceError&) {
      // counted below
    }
  });
  double sum = 0;
  Index valid = 0;
  for (double k : report.ks) {
    if (std::isfinite(k)) {
      sum += k;
      ++valid;
    }
  }
  report.excluded = trials - valid;
  if (valid > 0) report.mean_ks = sum / static_cast<double>(valid);
  return report;
}

const std::vector<std::string>& trial_csv_columns() {
  static const std::vector<std::string> cols{
      "kind",          "master_seed",    "trial",         "seed",       "n",
      "p",             "lambda",         "lambda_hat",    "predicted_lambda_hat",
      "overlap",       "predicted_overlap", "err_opt",    "err_eig_raw", "err_eig_aligned",
      "iterations",    "converged",      "tau_violations", "status",    "wall_time"};
  return cols;
}

const std::vector<std::string>& summary_csv_columns() {
  static const std::vector<std::string> cols{
      "kind",           "master_seed",     "n",                    "p",
      "lambda",         "trials",          "err_opt_mean",         "err_eig_raw_mean",
      "err_opt_sd",     "err_eig_raw_sd",  "err_eig_aligned_mean", "err_eig_aligned_sd",
      "lambda_hat_mean", "lambda_hat_sd",  "predicted_lambda_hat", "overlap_mean",
      "overlap_sd",     "predicted_overlap", "iterations_mean",    "iterations_sd",
      "opt_valid",      "eig_valid",       "opt_excluded",         "eig_excluded",
      "single_record"};
  return cols;
}

namespace {

std::string join_header(const std::vector<std::string>& cols) {
  std::string line;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i > 0) line += ',';
    line += cols[i];
  }
  return line + '\n';
}

std::string join_row(std::initializer_list<std::string> fields) {
  std::string line;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) line += ',';
    line += f;
    first = false;
  }
  return line + '\n';
}

}  // namespace

std::string trials_to_csv(const std::vector<TrialRecord>& records, Seed master) {
  std::string out = join_header(trial_csv_columns());
  for (const TrialRecord& r : records) {
    out += join_row({to_string(r.kind), fmt(master.value), fmt(r.trial), fmt(r.seed.value), fmt(r.n), fmt(r.p),
                     fmt(r.lambda), fmt(r.lambda_hat), fmt(r.predicted_lambda_hat), fmt(r.overlap),
                     fmt(r.predicted_overlap), fmt(r.err_opt), fmt(r.err_eig_raw), fmt(r.err_eig_aligned),
                     fmt(r.iterations), fmt(r.converged), fmt(r.tau_violations), r.status, fmt(r.wall_time)});
  }
  return out;
}

std::string summaries_to_csv(const std::vector<SweepSummary>& summaries, Seed master) {
  std::string out = join_header(summary_csv_columns());
  for (const SweepSummary& s : summaries) {
    out += join_row({to_string(s.kind), fmt(master.value), fmt(s.n), fmt(s.p), fmt(s.lambda), fmt(s.trials),
                     fmt(s.err_opt.mean), fmt(s.err_eig_raw.mean), fmt(s.err_opt.sd), fmt(s.err_eig_raw.sd),
                     fmt(s.err_eig_aligned.mean), fmt(s.err_eig_aligned.sd), fmt(s.lambda_hat.mean),
                     fmt(s.lambda_hat.sd), fmt(s.predicted_lambda_hat), fmt(s.overlap.mean), fmt(s.overlap.sd),
                     fmt(s.predicted_overlap), fmt(s.iterations.mean), fmt(s.iterations.sd), fmt(s.err_opt.count),
                     fmt(s.lambda_hat.count), fmt(s.opt_excluded), fmt(s.eig_excluded), fmt(s.single_record)});
  }
  return out;
}

std::string esd_to_csv(const EsdReport& report) {
  std::string out = "master_seed,n,trial,ks_distance\n";
  for (std::size_t t = 0; t < report.ks.size(); ++t)
    out += join_row({fmt(report.master.value), fmt(report.n), fmt(static_cast<std::uint64_t>(t)), fmt(report.ks[t])});
  return out;
}

std::string wigner_predictions_to_csv(const std::vector<double>& lambdas) {
  std::string out = "lambda,eigenvalue_limit,overlap_limit\n";
  for (double l : lambdas) {
    const auto p = bbp_wigner_prediction(l);
    out += join_row({fmt(p.lambda), fmt(p.eigenvalue_limit), fmt(p.overlap_limit)});
  }
  return out;
}

nlohmann::json to_json(const TrialRecord& r) {
  return {{"kind", to_string(r.kind)},
          {"trial", r.trial},
          {"seed", r.seed.value},
          {"n", r.n},
          {"p", r.p},
          {"lambda", r.lambda},
          {"lambda_hat", number_or_null(r.lambda_hat)},
          {"predicted_lambda_hat", number_or_null(r.predicted_lambda_hat)},
          {"overlap", number_or_null(r.overlap)},
          {"predicted_overlap", number_or_null(r.predicted_overlap)},
          {"err_opt", number_or_null(r.err_opt)},
          {"err_eig_raw", number_or_null(r.err_eig_raw)},
          {"err_eig_aligned", number_or_null(r.err_eig_aligned)},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"tau_violations", r.tau_violations},
          {"status", r.status},
          {"wall_time", r.wall_time}};
}

nlohmann::json to_json(const SweepSummary& s) {
  auto metric = [](const MetricSummary& m) {
    return nlohmann::json{{"mean", number_or_null(m.mean)}, {"sd", number_or_null(m.sd)}, {"count", m.count}};
  };
  return {{"kind", to_string(s.kind)},
          {"n", s.n},
          {"p", s.p},
          {"lambda", number_or_null(s.lambda)},
          {"trials", s.trials},
          {"lambda_hat", metric(s.lambda_hat)},
          {"overlap", metric(s.overlap)},
          {"err_opt", metric(s.err_opt)},
          {"err_eig_raw", metric(s.err_eig_raw)},
          {"err_eig_aligned", metric(s.err_eig_aligned)},
          {"iterations", metric(s.iterations)},
          {"eig_excluded", s.eig_excluded},
          {"opt_excluded", s.opt_excluded},
          {"single_record", s.single_record},
          {"predicted_lambda_hat", number_or_null(s.predicted_lambda_hat)},
          {"predicted_overlap", number_or_null(s.predicted_overlap)}};
}

nlohmann::json to_json(const EsdReport& r) {
  nlohmann::json ks = nlohmann::json::array();
  for (double k : r.ks) ks.push_back(number_or_null(k));
  return {{"n", r.n}, {"master_seed", r.master.value}, {"ks", ks}, {"mean_ks", number_or_null(r.mean_ks)},
          {"excluded", r.excluded}};
}

}  // namespace spiked
