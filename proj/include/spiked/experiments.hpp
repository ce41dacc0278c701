#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "spiked/core.hpp"
#include "spiked/eig.hpp"
#include "spiked/recover.hpp"

namespace spiked {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class SweepKind { Wigner, Covariance, Table1, Esd };

std::string to_string(SweepKind k);
SweepKind sweep_kind_from_string(const std::string& s);

/// One Monte-Carlo trial. Metrics that were not measured, or whose computation failed,
/// hold NaN; `status` says why.
struct TrialRecord {
  SweepKind kind = SweepKind::Wigner;
  Index n = 0;
  Index p = 0;  // covariance sweeps only
  double lambda = 0;
  std::uint64_t trial = 0;
  Seed seed;
  double lambda_hat = kNaN;
  double predicted_lambda_hat = kNaN;
  double overlap = kNaN;
  double predicted_overlap = kNaN;
  double err_opt = kNaN;
  double err_eig_raw = kNaN;
  double err_eig_aligned = kNaN;
  Index iterations = 0;
  bool converged = false;
  Index tau_violations = 0;
  bool eig_ok = false;
  bool opt_ok = false;
  /// "ok", or ';'-joined failure tags such as "eig_nonconvergence" or "projection_failure".
  std::string status = "ok";
  double wall_time = 0;  // seconds, reporting only
};

struct MetricSummary {
  double mean = kNaN;
  double sd = kNaN;
  Index count = 0;  // trials contributing (finite values)
};

/// Statistics for one (kind, n, p, lambda) group.
struct SweepSummary {
  SweepKind kind = SweepKind::Wigner;
  Index n = 0;
  Index p = 0;
  double lambda = 0;
  Index trials = 0;
  MetricSummary lambda_hat, overlap, err_opt, err_eig_raw, err_eig_aligned, iterations;
  Index eig_excluded = 0;
  Index opt_excluded = 0;
  /// Some metric had exactly one contributing trial, so its SD is reported as 0.
  bool single_record = false;
  double predicted_lambda_hat = kNaN;
  double predicted_overlap = kNaN;
};

struct GroupBy {
  bool n = true;
  bool lambda = true;
};

struct HarnessOptions {
  /// Worker threads; 0 means std::thread::hardware_concurrency().
  unsigned threads = 1;
  EigenOptions eig;
  Index spectrum_cap = kDefaultSpectrumCap;
};

/// Runs body(0), ..., body(count - 1) on a bounded pool of worker threads.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

/// Seed of trial `trial`; independent of group and thread scheduling.
Seed trial_seed(Seed master, std::uint64_t trial);

/// Spiked Wigner trials for every (lambda, n, trial). Records come back ordered by
/// (lambda, n, trial) in the order the grids were given.
std::vector<TrialRecord> run_wigner_sweep(const std::vector<double>& lambdas, const std::vector<Index>& ns,
                                          Index trials, Seed master, const HarnessOptions& opts = {},
                                          double block_fraction = 0.02);

/// Spiked sample-covariance trials (single spike lambda1) at fixed p, n.
std::vector<TrialRecord> run_covariance_sweep(const std::vector<double>& lambda1s, Index p, Index n, Index trials,
                                              Seed master, const HarnessOptions& opts = {});

/// Trials behind run_table1: descent recovery vs the leading eigenvector, per n.
std::vector<TrialRecord> table1_trials(const std::vector<Index>& ns, Index trials, const RecoveryConfig& config,
                                       Seed master, const HarnessOptions& opts = {}, double lambda = 4.0,
                                       double block_fraction = 0.02);

std::vector<SweepSummary> run_table1(const std::vector<Index>& ns, Index trials, const RecoveryConfig& config,
                                     Seed master, const HarnessOptions& opts = {}, double lambda = 4.0,
                                     double block_fraction = 0.02);

/// Mean and sample SD (denominator count - 1) of every metric, grouped by kind and the
/// selected keys. Groups come back sorted by (kind, n, p, lambda).
std::vector<SweepSummary> summarize(const std::vector<TrialRecord>& records, GroupBy group_by = {});

struct EsdReport {
  Index n = 0;
  Seed master;
  std::vector<double> ks;  // per trial; NaN for failed trials
  double mean_ks = kNaN;
  Index excluded = 0;
};

/// KS distance between the ESD of GOE(n) and the semicircle law, per trial and averaged.
EsdReport run_esd_experiment(Index n, Index trials, Seed master, const HarnessOptions& opts = {});

// CSV / JSON ----------------------------------------------------------------------

/// Fixed column order for trial rows; wall_time is always last.
const std::vector<std::string>& trial_csv_columns();
const std::vector<std::string>& summary_csv_columns();

std::string trials_to_csv(const std::vector<TrialRecord>& records, Seed master);
std::string summaries_to_csv(const std::vector<SweepSummary>& summaries, Seed master);
std::string esd_to_csv(const EsdReport& report);

nlohmann::json to_json(const TrialRecord& r);
nlohmann::json to_json(const SweepSummary& s);
nlohmann::json to_json(const EsdReport& r);

/// lambda, eigenvalue_limit, overlap_limit for each lambda.
std::string wigner_predictions_to_csv(const std::vector<double>& lambdas);

}  // namespace spiked
