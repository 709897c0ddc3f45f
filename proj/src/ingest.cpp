#include "massive/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "massive/likelihood.hpp"
#include "massive/parallel.hpp"

namespace massive {

namespace {

constexpr std::int64_t chunk_rows = 4096;

double median_lower(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];  // lower middle for even counts
}

struct MomentPartial {
  Mat gg;
  Vec g, gx, gy;
  double x = 0.0, y = 0.0, xx = 0.0, yy = 0.0, xy = 0.0;
};

SufficientStats moments_impl(const DataRows& rows, bool intercept, bool parallel) {
  const std::int64_t n = rows.x.size();
  require(rows.y.size() == n && rows.g.rows() == n, errc::precondition,
          "data blocks disagree on the number of rows");
  const int j_in = static_cast<int>(rows.g.cols());
  require(j_in >= 1, errc::precondition, "need at least one candidate column");
  const int j = j_in + (intercept ? 1 : 0);
  require(n >= j + 3, errc::precondition,
          "need at least J + 3 rows to identify the conditional moments");
  require(rows.g.allFinite() && rows.x.allFinite() && rows.y.allFinite(), errc::parse,
          "data table contains a non-finite value");

  const std::int64_t chunks = (n + chunk_rows - 1) / chunk_rows;
  std::vector<MomentPartial> parts(chunks);
  const auto accumulate = [&](std::int64_t c) {
    const std::int64_t lo = c * chunk_rows;
    const std::int64_t len = std::min(chunk_rows, n - lo);
    Mat gc(len, j);
    gc.leftCols(j_in) = rows.g.middleRows(lo, len);
    if (intercept) gc.col(j_in).setOnes();
    const auto xc = rows.x.segment(lo, len);
    const auto yc = rows.y.segment(lo, len);
    MomentPartial& p = parts[c];
    p.gg = gc.transpose() * gc;
    p.g = gc.colwise().sum().transpose();
    p.gx = gc.transpose() * xc;
    p.gy = gc.transpose() * yc;
    p.x = xc.sum();
    p.y = yc.sum();
    p.xx = xc.dot(xc);
    p.yy = yc.dot(yc);
    p.xy = xc.dot(yc);
  };
  if (parallel) {
    parallel_for(chunks, accumulate);
  } else {
    for (std::int64_t c = 0; c < chunks; ++c) accumulate(c);
  }

  // Fixed chunk size and in-order merge make the result independent of both
  // thread count and scheduling.
  Mat gg = Mat::Zero(j, j);
  Vec g = Vec::Zero(j), gx = Vec::Zero(j), gy = Vec::Zero(j);
  double x = 0.0, y = 0.0, xx = 0.0, yy = 0.0, xy = 0.0;
  for (const MomentPartial& p : parts) {
    gg += p.gg;
    g += p.g;
    gx += p.gx;
    gy += p.gy;
    x += p.x;
    y += p.y;
    xx += p.xx;
    yy += p.yy;
    xy += p.xy;
  }

  SufficientStats s;
  s.n = n;
  const double inv = 1.0 / static_cast<double>(n);
  s.mean_g = g * inv;
  s.mean_x = x * inv;
  s.mean_y = y * inv;
  s.m_gg = gg * inv;
  s.m_gx = gx * inv;
  s.m_gy = gy * inv;
  s.m_xx = xx * inv;
  s.m_yy = yy * inv;
  s.m_xy = xy * inv;

  s.validate();
  if (!intercept) {
    // Without an intercept column every candidate must vary: a constant
    // column makes the centered covariance singular and the scaled
    // parameterization meaningless.
    Eigen::LLT<Mat> llt(s.cov_g());
    require(llt.info() == Eigen::Success, errc::degenerate_input,
            "candidate covariance matrix is singular");
  }
  conditional_moments(s);  // fail fast on zero conditional variances
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(const std::string& field, std::size_t line_no, const std::string& path) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  require(ec == std::errc() && ptr == last, errc::parse,
          path + ":" + std::to_string(line_no) + ": cannot parse number '" + field + "'");
  return value;
}

std::int64_t parse_count(const std::string& field, std::size_t line_no,
                         const std::string& path) {
  const double v = parse_double(field, line_no, path);
  const double r = std::nearbyint(v);
  require(std::isfinite(v) && std::abs(v - r) < 1e-9 && r >= 0, errc::parse,
          path + ":" + std::to_string(line_no) + ": '" + field + "' is not a sample size");
  return static_cast<std::int64_t>(r);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::parse, "cannot open file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();

  std::vector<std::string> lines;
  std::string::size_type start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  require(!lines.empty(), errc::parse, path + " is empty");
  return lines;
}

}  // namespace

std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

SufficientStats moments_from_rows(const DataRows& rows, bool intercept) {
  return moments_impl(rows, intercept, true);
}

SufficientStats moments_from_rows_serial(const DataRows& rows, bool intercept) {
  return moments_impl(rows, intercept, false);
}

void SummaryInput::validate() const {
  require(!records.empty(), errc::precondition, "need at least one summary record");
  require(ploidy >= 1, errc::precondition, "ploidy must be at least 1");
  require(std::isfinite(beta_obs), errc::precondition,
          "the observational coefficient must be finite");
  if (n_obs) require(*n_obs >= 2, errc::precondition, "n_obs must be at least 2");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SummaryRecord& r = records[i];
    const std::string at = "summary record " + std::to_string(i + 1) + ": ";
    require(r.eaf > 0.0 && r.eaf < 1.0, errc::precondition,
            at + "allele frequency must lie strictly between 0 and 1");
    require(std::isfinite(r.beta_x) && std::isfinite(r.beta_y), errc::precondition,
            at + "coefficients must be finite");
    require(r.se_x > 0.0 && r.se_y > 0.0, errc::precondition,
            at + "standard errors must be positive");
    require(r.n_x >= 2 && r.n_y >= 2, errc::precondition,
            at + "sample sizes must be at least 2");
  }
}

SufficientStats stats_from_summary(const SummaryInput& s) {
  s.validate();
  const int j = s.j();
  const double m = static_cast<double>(s.ploidy);

  Vec mean_g(j), var_g(j), cov_gx(j), cov_gy(j);
  std::vector<double> var_x_est(j), var_y_est(j);
  std::int64_t n = s.n_obs.value_or(std::numeric_limits<std::int64_t>::max());
  for (int jj = 0; jj < j; ++jj) {
    const SummaryRecord& r = s.records[jj];
    mean_g[jj] = m * r.eaf;
    var_g[jj] = m * r.eaf * (1.0 - r.eaf);
    cov_gx[jj] = var_g[jj] * r.beta_x;
    cov_gy[jj] = var_g[jj] * r.beta_y;
    // Var(X) back-solved from the marginal regression: the coefficient
    // explains Var(G)β², the standard error carries the residual Var/(n·Var(G)).
    var_x_est[jj] = var_g[jj] * (r.beta_x * r.beta_x +
                                 static_cast<double>(r.n_x) * r.se_x * r.se_x);
    var_y_est[jj] = var_g[jj] * (r.beta_y * r.beta_y +
                                 static_cast<double>(r.n_y) * r.se_y * r.se_y);
    n = std::min(n, std::min(r.n_x, r.n_y));
  }
  const double var_x = median_lower(var_x_est);
  const double var_y = median_lower(var_y_est);

  SufficientStats out;
  out.n = n;
  out.mean_g = mean_g;
  out.mean_x = mean_g.dot([&] {
    Vec bx(j);
    for (int jj = 0; jj < j; ++jj) bx[jj] = s.records[jj].beta_x;
    return bx;
  }());
  out.mean_y = mean_g.dot([&] {
    Vec by(j);
    for (int jj = 0; jj < j; ++jj) by[jj] = s.records[jj].beta_y;
    return by;
  }());
  // Candidates treated as independent: centered cross moments are zero, so
  // the raw second moments are diag(Var) plus the mean outer product.
  out.m_gg = var_g.asDiagonal();
  out.m_gg += mean_g * mean_g.transpose();
  out.m_gx = cov_gx + mean_g * out.mean_x;
  out.m_gy = cov_gy + mean_g * out.mean_y;
  out.m_xx = var_x + out.mean_x * out.mean_x;
  out.m_yy = var_y + out.mean_y * out.mean_y;
  out.m_xy = var_x * s.beta_obs + out.mean_x * out.mean_y;

  try {
    out.validate();
    conditional_moments(out);
  } catch (const error& e) {
    fail(errc::inconsistent_input,
         std::string("summary statistics reconstruct an invalid joint distribution: ") +
             e.what());
  }
  return out;
}

SummaryInput summaries_from_stats(const SufficientStats& stats, int ploidy) {
  stats.validate();
  require(ploidy >= 1, errc::precondition, "ploidy must be at least 1");
  const int j = stats.j();
  const double n = static_cast<double>(stats.n);
  const Mat cov_g = stats.cov_g();
  const double var_x = stats.var_x();
  const double var_y = stats.var_y();
  require(var_x > 0.0 && var_y > 0.0, errc::degenerate_input,
          "exposure and outcome must vary");

  SummaryInput out;
  out.ploidy = ploidy;
  out.beta_obs = stats.cov_xy() / var_x;
  out.n_obs = stats.n;
  out.records.resize(j);
  for (int jj = 0; jj < j; ++jj) {
    const double vg = cov_g(jj, jj);
    require(vg > 0.0, errc::degenerate_input,
            "candidate " + std::to_string(jj + 1) +
                " is constant; marginal summaries are undefined");
    SummaryRecord& r = out.records[jj];
    r.eaf = stats.mean_g[jj] / static_cast<double>(ploidy);
    const double cov_jx = stats.m_gx[jj] - stats.mean_g[jj] * stats.mean_x;
    const double cov_jy = stats.m_gy[jj] - stats.mean_g[jj] * stats.mean_y;
    r.beta_x = cov_jx / vg;
    r.beta_y = cov_jy / vg;
    const double resid_x = std::max(var_x - r.beta_x * r.beta_x * vg, 0.0);
    const double resid_y = std::max(var_y - r.beta_y * r.beta_y * vg, 0.0);
    r.se_x = std::sqrt(resid_x / (n * vg));
    r.se_y = std::sqrt(resid_y / (n * vg));
    require(r.se_x > 0.0 && r.se_y > 0.0, errc::degenerate_input,
            "candidate " + std::to_string(jj + 1) + " explains all variation");
    r.n_x = stats.n;
    r.n_y = stats.n;
  }
  return out;
}

DataRows read_rows_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  const std::vector<std::string> header = split_fields(lines[0]);
  require(header.size() >= 3, errc::parse, path + ": header must be G1,...,GJ,X,Y");
  const int j = static_cast<int>(header.size()) - 2;
  for (int jj = 0; jj < j; ++jj)
    require(header[jj] == "G" + std::to_string(jj + 1), errc::parse,
            path + ": expected column G" + std::to_string(jj + 1) + ", got '" + header[jj] +
                "'");
  require(header[j] == "X" && header[j + 1] == "Y", errc::parse,
          path + ": last two columns must be X,Y");

  const std::int64_t n = static_cast<std::int64_t>(lines.size()) - 1;
  require(n >= 1, errc::parse, path + ": no data rows");
  DataRows rows;
  rows.g.resize(n, j);
  rows.x.resize(n);
  rows.y.resize(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::size_t line_no = static_cast<std::size_t>(i) + 2;
    const std::vector<std::string> fields = split_fields(lines[i + 1]);
    require(fields.size() == header.size(), errc::parse,
            path + ":" + std::to_string(line_no) + ": expected " +
                std::to_string(header.size()) + " fields, got " +
                std::to_string(fields.size()));
    for (int jj = 0; jj < j; ++jj) rows.g(i, jj) = parse_double(fields[jj], line_no, path);
    rows.x[i] = parse_double(fields[j], line_no, path);
    rows.y[i] = parse_double(fields[j + 1], line_no, path);
  }
  return rows;
}

void write_rows_csv(const std::string& path, const DataRows& rows) {
  const int j = static_cast<int>(rows.g.cols());
  std::string out;
  for (int jj = 0; jj < j; ++jj) out += "G" + std::to_string(jj + 1) + ",";
  out += "X,Y\n";
  for (std::int64_t i = 0; i < rows.x.size(); ++i) {
    for (int jj = 0; jj < j; ++jj) {
      out += csv_double(rows.g(i, jj));
      out += ',';
    }
    out += csv_double(rows.x[i]);
    out += ',';
    out += csv_double(rows.y[i]);
    out += '\n';
  }
  write_text_atomic(path, out);
}

std::vector<SummaryRecord> read_summary_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  require(lines[0] == "snp,eaf,beta_x,se_x,n_x,beta_y,se_y,n_y", errc::parse,
          path + ": header must be snp,eaf,beta_x,se_x,n_x,beta_y,se_y,n_y");
  std::vector<SummaryRecord> records;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::vector<std::string> fields = split_fields(lines[i]);
    require(fields.size() == 8, errc::parse,
            path + ":" + std::to_string(line_no) + ": expected 8 fields, got " +
                std::to_string(fields.size()));
    SummaryRecord r;
    r.eaf = parse_double(fields[1], line_no, path);
    r.beta_x = parse_double(fields[2], line_no, path);
    r.se_x = parse_double(fields[3], line_no, path);
    r.n_x = parse_count(fields[4], line_no, path);
    r.beta_y = parse_double(fields[5], line_no, path);
    r.se_y = parse_double(fields[6], line_no, path);
    r.n_y = parse_count(fields[7], line_no, path);
    records.push_back(r);
  }
  require(!records.empty(), errc::parse, path + ": no data rows");
  return records;
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRecord>& records) {
  std::string out = "snp,eaf,beta_x,se_x,n_x,beta_y,se_y,n_y\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SummaryRecord& r = records[i];
    out += "snp" + std::to_string(i + 1) + ",";
    out += csv_double(r.eaf) + "," + csv_double(r.beta_x) + "," +
           csv_double(r.se_x) + "," + std::to_string(r.n_x) + "," +
           csv_double(r.beta_y) + "," + csv_double(r.se_y) + "," +
           std::to_string(r.n_y) + "\n";
  }
  write_text_atomic(path, out);
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), errc::parse, "cannot write file " + tmp);
    out << content;
    out.flush();
    require(out.good(), errc::parse, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, errc::parse, "cannot move " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace massive
