#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mlafem/config.hpp"
#include "mlafem/metrics.hpp"

namespace mlafem {

// Adaptive run and uniform levels of one parameter sample, measured against the overkill reference.
struct SampleStudy {
  Parameter y;
  std::vector<AfemIteration> adaptive;
  std::vector<std::size_t> uniform_dofs;
  std::vector<ErrorNorms> uniform;
};

SampleStudy study_sample(const RunConfig& config, const Parameter& y);
std::vector<SampleStudy> study_samples(const RunConfig& config, int workers);

struct StudyRow {
  std::string family;  // "adaptive" or "uniform"
  int step = 0;        // AFEM iteration or uniform level, from 1
  double dofs_mean = 0.0;
  double h1_mean = 0.0, h1_min = 0.0, h1_max = 0.0;
  double l2_mean = 0.0, l2_min = 0.0, l2_max = 0.0;
};

std::vector<StudyRow> summarize(const std::vector<SampleStudy>& studies);

struct MatchPoint {
  double error = 0.0;
  double adaptive_dofs = 0.0;  // mean DOFs of the first adaptive step reaching the error
  double uniform_dofs = 0.0;   // same for the uniform family
};

// Error levels reached by both mean curves, each with the DOFs either family needs to reach it.
std::vector<MatchPoint> matched_error_levels(const std::vector<StudyRow>& rows);
// Uniform DOFs at each adaptive error by log-log interpolation of the uniform curve (NaN outside its range).
std::vector<MatchPoint> interpolated_uniform(const std::vector<StudyRow>& rows);

struct VerifyRow {
  std::string suite;
  int cases = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_deviation <= tolerance; }
};

std::vector<VerifyRow> run_verification(const RunConfig& config);

// Worker count from AFEM_WORKERS, else 1.
int default_workers();

std::string format_csv_number(double v);
std::string afem_report_csv(const std::vector<AfemIteration>& report);
std::string study_csv(const std::vector<StudyRow>& rows);

// Entry points; they throw on failure and return the exit status otherwise.
int cmd_run(const RunConfig& config, int workers, std::ostream& out);
int cmd_convstudy(const RunConfig& config, int workers, std::ostream& out);
int cmd_verify(const RunConfig& config, std::ostream& out);
int cmd_gen_dataset(const RunConfig& config, int workers, std::ostream& out);

}  // namespace mlafem
