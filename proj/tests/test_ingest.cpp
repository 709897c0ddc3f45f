#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "massive/ingest.hpp"
#include "massive/parallel.hpp"
#include "massive/rng.hpp"
#include "support/test_util.hpp"

using namespace massive;

namespace {

std::filesystem::path temp_file(const std::string& tag) {
  return std::filesystem::temp_directory_path() / ("massive_test_" + tag + ".csv");
}

bool stats_equal(const SufficientStats& a, const SufficientStats& b) {
  return a.n == b.n && (a.mean_g.array() == b.mean_g.array()).all() &&
         a.mean_x == b.mean_x && a.mean_y == b.mean_y &&
         (a.m_gg.array() == b.m_gg.array()).all() &&
         (a.m_gx.array() == b.m_gx.array()).all() &&
         (a.m_gy.array() == b.m_gy.array()).all() && a.m_xx == b.m_xx && a.m_yy == b.m_yy &&
         a.m_xy == b.m_xy;
}

DataRows hand_table() {
  DataRows rows;
  rows.g.resize(5, 1);
  rows.g << 0, 1, 2, 1, 0;
  rows.x.resize(5);
  rows.x << 1, 2, 3, 4, 5;
  rows.y.resize(5);
  rows.y << 2, 1, 3, 0, 1;
  return rows;
}

}  // namespace

TEST_CASE("raw moments match hand-computed values exactly") {
  const SufficientStats s = moments_from_rows(hand_table());
  CHECK(s.n == 5);
  CHECK(s.mean_g[0] == 0.8);       // 4/5
  CHECK(s.mean_x == 3.0);          // 15/5
  CHECK(s.mean_y == 1.4);          // 7/5
  CHECK(s.m_gg(0, 0) == 1.2);      // 6/5
  CHECK(s.m_gx[0] == 2.4);         // 12/5
  CHECK(s.m_gy[0] == 1.4);         // 7/5
  CHECK(s.m_xx == 11.0);           // 55/5
  CHECK(s.m_yy == 3.0);            // 15/5
  CHECK(s.m_xy == 3.6);            // 18/5

  // Derived centered quantities follow.
  CHECK(s.cov_g()(0, 0) == doctest::Approx(1.2 - 0.64));
  CHECK(s.var_x() == doctest::Approx(2.0));
  CHECK(s.cov_xy() == doctest::Approx(3.6 - 4.2));
}

TEST_CASE("intercept mode appends an exact unit column") {
  const SufficientStats s = moments_from_rows(hand_table(), true);
  CHECK(s.j() == 2);
  CHECK(s.mean_g[1] == 1.0);
  CHECK(s.m_gg(1, 1) == 1.0);
  CHECK(s.m_gg(0, 1) == 0.8);  // E[G·1]
  CHECK(s.m_gx[1] == 3.0);     // E[1·X]
  CHECK(s.scale_g()[1] == 1.0);  // constant column keeps unit scale
}

TEST_CASE("moment computation rejects unusable tables") {
  DataRows rows = hand_table();

  SUBCASE("row-count mismatch between blocks") {
    rows.x.resize(4);
    CHECK_THROWS_WITH_AS(moments_from_rows(rows), doctest::Contains("disagree"), error);
  }
  SUBCASE("too few rows to identify the conditional moments") {
    rows.g.resize(3, 1);
    rows.g << 0, 1, 2;
    rows.x.resize(3);
    rows.x << 1, 2, 3;
    rows.y.resize(3);
    rows.y << 2, 1, 3;
    try {
      moments_from_rows(rows);
      CHECK(false);
    } catch (const error& e) {
      CHECK(e.kind() == errc::precondition);
    }
  }
  SUBCASE("non-finite cell") {
    rows.x[2] = std::numeric_limits<double>::quiet_NaN();
    try {
      moments_from_rows(rows);
      CHECK(false);
    } catch (const error& e) {
      CHECK(e.kind() == errc::parse);
    }
  }
  SUBCASE("constant candidate column") {
    rows.g.col(0).setConstant(1.0);
    try {
      moments_from_rows(rows);
      CHECK(false);
    } catch (const error& e) {
      CHECK(e.kind() == errc::degenerate_input);
    }
  }
  SUBCASE("constant exposure with an intercept column") {
    rows.x.setConstant(2.0);  // the intercept fits it exactly: zero residual variance
    try {
      moments_from_rows(rows, true);
      CHECK(false);
    } catch (const error& e) {
      CHECK(e.kind() == errc::degenerate_input);
    }
  }
}

TEST_CASE("chunked moments agree with a naive single-pass oracle") {
  Rng rng(23);
  const DataRows rows = test_util::random_rows(rng, 5, 10000);
  const SufficientStats s = moments_from_rows(rows);

  const std::int64_t n = rows.x.size();
  Mat gg = Mat::Zero(5, 5);
  Vec g = Vec::Zero(5), gx = Vec::Zero(5), gy = Vec::Zero(5);
  double x = 0, y = 0, xx = 0, yy = 0, xy = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const Vec gi = rows.g.row(i).transpose();
    gg += gi * gi.transpose();
    g += gi;
    gx += gi * rows.x[i];
    gy += gi * rows.y[i];
    x += rows.x[i];
    y += rows.y[i];
    xx += rows.x[i] * rows.x[i];
    yy += rows.y[i] * rows.y[i];
    xy += rows.x[i] * rows.y[i];
  }
  const double inv = 1.0 / static_cast<double>(n);
  CHECK((s.m_gg - gg * inv).lpNorm<Eigen::Infinity>() < 1e-11);
  CHECK((s.mean_g - g * inv).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((s.m_gx - gx * inv).lpNorm<Eigen::Infinity>() < 1e-11);
  CHECK((s.m_gy - gy * inv).lpNorm<Eigen::Infinity>() < 1e-11);
  CHECK(s.mean_x == doctest::Approx(x * inv).epsilon(1e-12));
  CHECK(s.m_xx == doctest::Approx(xx * inv).epsilon(1e-12));
  CHECK(s.m_yy == doctest::Approx(yy * inv).epsilon(1e-12));
  CHECK(s.m_xy == doctest::Approx(xy * inv).epsilon(1e-12));
}

TEST_CASE("parallel moments are bit-identical to the serial reference") {
  Rng rng(31);
  // 4097 rows straddles the 4096-row chunk boundary; 4096 is exactly one chunk.
  for (const std::int64_t n : {300ll, 4096ll, 4097ll, 10000ll}) {
    const DataRows rows = test_util::random_rows(rng, 4, n);
    const SufficientStats serial = moments_from_rows_serial(rows);
    for (const int threads : {1, 2, 3, 8}) {
      set_num_threads(threads);
      const SufficientStats par = moments_from_rows(rows);
      CHECK(stats_equal(serial, par));
    }
    set_num_threads(0);
  }
}

TEST_CASE("summary reconstruction follows the binomial identities") {
  SummaryInput in;
  in.ploidy = 2;
  in.beta_obs = 0.5;
  in.records.push_back({0.5, 0.3, 0.1, 1000, 0.15, 0.2, 900});

  const SufficientStats s = stats_from_summary(in);
  CHECK(s.n == 900);  // minimum of the per-block sample sizes
  CHECK(s.mean_g[0] == doctest::Approx(1.0));
  CHECK(s.cov_g()(0, 0) == doctest::Approx(0.5));
  CHECK(s.mean_x == doctest::Approx(0.3));
  CHECK(s.m_gx[0] - s.mean_g[0] * s.mean_x == doctest::Approx(0.5 * 0.3));
  // Var(X) = Var(G)(β² + n·se²), Cov(X,Y) = Var(X)·β_obs.
  CHECK(s.var_x() == doctest::Approx(0.5 * (0.09 + 1000 * 0.01)));
  CHECK(s.cov_xy() == doctest::Approx(s.var_x() * 0.5));

  SUBCASE("n_obs participates in the minimum") {
    in.n_obs = 123;
    CHECK(stats_from_summary(in).n == 123);
  }
  SUBCASE("Var(X) is the lower-middle median over candidates") {
    in.records.push_back({0.5, 0.3, 0.2, 1000, 0.15, 0.2, 900});  // implied Var(X) = 20.045
    const SufficientStats s2 = stats_from_summary(in);
    CHECK(s2.var_x() == doctest::Approx(5.045));  // the smaller of the two
  }
}

TEST_CASE("summary validation and consistency failures") {
  SummaryInput in;
  in.records.push_back({0.5, 0.3, 0.1, 1000, 0.15, 0.2, 900});

  SUBCASE("allele frequency on the boundary") {
    in.records[0].eaf = 0.0;
    try {
      stats_from_summary(in);
      CHECK(false);
    } catch (const error& e) {
      CHECK(e.kind() == errc::precondition);
    }
  }
  SUBCASE("nonpositive standard error") {
    in.records[0].se_x = 0.0;
    CHECK_THROWS_AS(stats_from_summary(in), error);
  }
  SUBCASE("summaries implying negative residual variance are inconsistent") {
    // One enormous coefficient with a tiny error makes the median Var(X)
    // smaller than the variance the coefficients explain.
    in.records.clear();
    in.records.push_back({0.5, 10.0, 0.01, 100, 0.1, 0.1, 100});
    in.records.push_back({0.5, 0.1, 0.01, 100, 0.1, 0.1, 100});
    try {
      stats_from_summary(in);
      CHECK(false);
    } catch (const error& e) {
      CHECK(e.kind() == errc::inconsistent_input);
    }
  }
}

TEST_CASE("per-candidate summaries derived from stats invert the reconstruction") {
  Rng rng(47);
  const SufficientStats stats = moments_from_rows(test_util::random_rows(rng, 3, 20000));
  const SummaryInput sum = summaries_from_stats(stats);
  CHECK(sum.j() == 3);
  CHECK(sum.n_obs.has_value());

  // Marginal coefficients match the centered ratio definition.
  for (int jj = 0; jj < 3; ++jj) {
    const double vg = stats.cov_g()(jj, jj);
    const double cov_jx = stats.m_gx[jj] - stats.mean_g[jj] * stats.mean_x;
    CHECK(sum.records[jj].beta_x == doctest::Approx(cov_jx / vg).epsilon(1e-12));
    CHECK(sum.records[jj].se_x > 0.0);
  }
  CHECK(sum.beta_obs == doctest::Approx(stats.cov_xy() / stats.var_x()).epsilon(1e-12));

  // Independent binomial candidates: reconstruction recovers every moment
  // block within a few percent at this n.
  const SufficientStats back = stats_from_summary(sum);
  CHECK(back.mean_g[0] == doctest::Approx(stats.mean_g[0]).epsilon(0.05));
  CHECK(back.var_x() == doctest::Approx(stats.var_x()).epsilon(0.05));
  CHECK(back.var_y() == doctest::Approx(stats.var_y()).epsilon(0.05));
  CHECK(back.cov_xy() == doctest::Approx(stats.cov_xy()).epsilon(0.05));
  for (int jj = 0; jj < 3; ++jj) {
    CHECK(back.m_gx[jj] == doctest::Approx(stats.m_gx[jj]).epsilon(0.05));
    CHECK(back.m_gy[jj] == doctest::Approx(stats.m_gy[jj]).epsilon(0.05));
  }
}

TEST_CASE("row CSV round trip is bit-exact") {
  Rng rng(53);
  DataRows rows = test_util::random_rows(rng, 3, 25);
  // Values that stress the %.17g contract.
  rows.x[0] = 1.0 / 3.0;
  rows.x[1] = 1e-300;
  rows.y[0] = -0.0;
  rows.y[1] = 12345.678901234567;

  const auto path = temp_file("rows_roundtrip");
  write_rows_csv(path.string(), rows);
  const DataRows back = read_rows_csv(path.string());
  REQUIRE(back.x.size() == rows.x.size());
  CHECK((back.g.array() == rows.g.array()).all());
  CHECK((back.x.array() == rows.x.array()).all());
  CHECK((back.y.array() == rows.y.array()).all());
  std::filesystem::remove(path);

  // Header shape is part of the format.
  std::ifstream in(path.string());
  CHECK(!in.good());
}

TEST_CASE("summary CSV round trip is bit-exact") {
  std::vector<SummaryRecord> recs;
  recs.push_back({0.25, 1.0 / 3.0, 0.01, 1000, -0.5, 0.25, 999});
  recs.push_back({0.75, -1e-12, 1e-7, 12345678, 2.0, 1e300, 2});

  const auto path = temp_file("summary_roundtrip");
  write_summary_csv(path.string(), recs);
  const std::vector<SummaryRecord> back = read_summary_csv(path.string());
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].eaf == recs[i].eaf);
    CHECK(back[i].beta_x == recs[i].beta_x);
    CHECK(back[i].se_x == recs[i].se_x);
    CHECK(back[i].n_x == recs[i].n_x);
    CHECK(back[i].beta_y == recs[i].beta_y);
    CHECK(back[i].se_y == recs[i].se_y);
    CHECK(back[i].n_y == recs[i].n_y);
  }
  std::filesystem::remove(path);
}

TEST_CASE("malformed CSV content fails as a parse error naming the line") {
  const auto path = temp_file("malformed");

  SUBCASE("wrong header") {
    write_text_atomic(path.string(), "A,B,C\n1,2,3\n");
    try {
      read_rows_csv(path.string());
      CHECK(false);
    } catch (const error& e) {
      CHECK(e.kind() == errc::parse);
    }
  }
  SUBCASE("non-numeric cell carries its line number") {
    write_text_atomic(path.string(), "G1,X,Y\n1,2,3\n1,oops,3\n");
    try {
      read_rows_csv(path.string());
      CHECK(false);
    } catch (const error& e) {
      CHECK(e.kind() == errc::parse);
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
  }
  SUBCASE("ragged row") {
    write_text_atomic(path.string(), "G1,X,Y\n1,2\n");
    CHECK_THROWS_AS(read_rows_csv(path.string()), error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_rows_csv((path / "nope").string()), error);
  }
  SUBCASE("summary header mismatch") {
    write_text_atomic(path.string(), "snp,eaf\nrs1,0.5\n");
    CHECK_THROWS_AS(read_summary_csv(path.string()), error);
  }
  SUBCASE("summary with a non-numeric count") {
    write_text_atomic(path.string(),
                      "snp,eaf,beta_x,se_x,n_x,beta_y,se_y,n_y\nrs1,0.5,1,0.1,abc,1,0.1,10\n");
    CHECK_THROWS_AS(read_summary_csv(path.string()), error);
  }
  std::filesystem::remove(path);
}

TEST_CASE("atomic text write replaces content wholesale") {
  const auto path = temp_file("atomic");
  write_text_atomic(path.string(), "first\n");
  write_text_atomic(path.string(), "second\n");
  std::ifstream in(path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(content == "second\n");
  std::filesystem::remove(path);
}

TEST_CASE("csv_double prints doubles that reread bit-exactly") {
  for (const double v : {1.0 / 3.0, 0.1, 1e-300, 1e300, -12345.678901234567, 2.0,
                         std::numeric_limits<double>::denorm_min()}) {
    const double back = std::stod(csv_double(v));
    CHECK(back == v);
  }
  CHECK(std::signbit(std::stod(csv_double(-0.0))));
}
