#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "massive/types.hpp"

namespace massive {

// Individual-level data: n rows of J candidate columns plus exposure and
// outcome.
struct DataRows {
  Mat g;  // n × J
  Vec x;
  Vec y;
};

// Exact sample raw moments of (G, X, Y). With intercept a constant unit
// column is appended to G, which turns the through-origin residual algebra
// downstream into the familiar centered one. Requires n ≥ J + 3 effective
// columns' worth of rows, a nonsingular candidate covariance (raw always;
// centered additionally when no intercept column is present, since the
// intercept column is constant by design) and nonzero conditional variances,
// so degenerate tables fail here rather than deep inside a fit.
//
// Accumulation is chunked (4096 rows) with partial sums merged in chunk
// order; the parallel variant distributes chunks with OpenMP and is
// bit-identical to the serial reference for any thread count.
SufficientStats moments_from_rows(const DataRows& rows, bool intercept = false);
SufficientStats moments_from_rows_serial(const DataRows& rows, bool intercept = false);

// One candidate's GWAS-style marginal associations.
struct SummaryRecord {
  double eaf = 0.0;       // effect allele frequency, in (0,1)
  double beta_x = 0.0;    // marginal regression coefficient of X on G_j
  double se_x = 0.0;      // its standard error
  std::int64_t n_x = 0;   // its sample size
  double beta_y = 0.0;    // marginal regression coefficient of Y on G_j
  double se_y = 0.0;      // its standard error
  std::int64_t n_y = 0;   // its sample size
};

struct SummaryInput {
  std::vector<SummaryRecord> records;
  int ploidy = 2;          // allele copies m; G_j ~ Binomial(m, eaf_j)
  double beta_obs = 0.0;   // observational regression coefficient of Y on X
  std::optional<std::int64_t> n_obs;  // sample size behind beta_obs

  int j() const { return static_cast<int>(records.size()); }
  void validate() const;
};

// Moment reconstruction from summary statistics:
//   E[G_j] = m·q̂_j, Var(G_j) = m·q̂_j(1−q̂_j)  (binomial identities)
//   E[X] = Σ E[G_j]·β̂x_j, Cov(G_j, X) = Var(G_j)·β̂x_j, same for Y
//   Var(X): median over j of Var(G_j)(β̂x_j² + n_x·se_x²)  (lower middle)
//   Cov(X,Y) = Var(X)·β̂_obs
// Candidates are treated as mutually independent, so centered cross moments
// vanish. Recorded n is the minimum of every provided sample size (n_obs
// included when present). A reconstruction with nonpositive conditional
// variances is rejected as inconsistent.
SufficientStats stats_from_summary(const SummaryInput& s);

// The reverse direction, for round-trip checks and ratio estimators: marginal
// per-candidate regression coefficients and standard errors implied by
// individual-level stats. Requires centered candidate variances > 0, so do
// not call it on stats carrying an intercept column.
SummaryInput summaries_from_stats(const SufficientStats& stats, int ploidy = 2);

// CSV formats. Individual-level header: G1,...,GJ,X,Y. Summary header:
// snp,eaf,beta_x,se_x,n_x,beta_y,se_y,n_y. UTF-8, '.' decimal point, no
// thousands separators; doubles are written as %.17g so reread values are
// bit-exact. Malformed content raises error(errc::parse) with the line
// number.
DataRows read_rows_csv(const std::string& path);
void write_rows_csv(const std::string& path, const DataRows& rows);
std::vector<SummaryRecord> read_summary_csv(const std::string& path);
void write_summary_csv(const std::string& path, const std::vector<SummaryRecord>& records);

// Whole-file write via a temporary plus rename, so readers never observe a
// partially written file.
void write_text_atomic(const std::string& path, const std::string& content);

// %.17g: enough digits that rereading reproduces the exact double.
std::string csv_double(double v);

}  // namespace massive
