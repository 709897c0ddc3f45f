#include "massive/types.hpp"

#include <bit>
#include <cmath>

namespace massive {

Vec SufficientStats::scale_g() const {
  const int J = j();
  Vec s(J);
  for (int k = 0; k < J; ++k) {
    const double var = m_gg(k, k) - mean_g[k] * mean_g[k];
    // Columns with (numerically) zero spread are constant candidates, e.g.
    // an intercept column; they keep unit scale.
    const double tol = 1e-12 * std::max(1.0, m_gg(k, k));
    s[k] = var > tol ? std::sqrt(var) : 1.0;
  }
  return s;
}

void SufficientStats::validate() const {
  const int J = j();
  require(n >= 1, errc::degenerate_input, "sample size must be at least 1");
  require(J >= 1, errc::degenerate_input, "at least one candidate is required");
  require(m_gg.rows() == J && m_gg.cols() == J && m_gx.size() == J && m_gy.size() == J,
          errc::precondition, "moment block dimensions are inconsistent");
  require(m_gg.isApprox(m_gg.transpose(), 1e-12), errc::precondition,
          "E[GG'] must be symmetric");
  auto finite = [](double v) { return std::isfinite(v); };
  require(finite(mean_x) && finite(mean_y) && finite(m_xx) && finite(m_yy) && finite(m_xy) &&
              mean_g.allFinite() && m_gg.allFinite() && m_gx.allFinite() && m_gy.allFinite(),
          errc::precondition, "moments must be finite");
  Eigen::LLT<Mat> llt(m_gg);
  require(llt.info() == Eigen::Success, errc::degenerate_input,
          "raw second-moment matrix E[GG'] is not positive definite");
}

Vec ScaledParams::pack() const {
  const int J = j();
  Vec v(dim(J));
  v.head(J) = alpha_t;
  v.segment(J, J) = kappa_t;
  v[2 * J] = beta_t;
  v[2 * J + 1] = log_sd_x;
  v[2 * J + 2] = log_sd_y;
  v[2 * J + 3] = gamma_x_t;
  v[2 * J + 4] = gamma_y_t;
  return v;
}

ScaledParams ScaledParams::unpack(const Vec& v) {
  const int J = static_cast<int>((v.size() - 5) / 2);
  require(dim(J) == v.size(), errc::precondition, "packed parameter vector has invalid length");
  ScaledParams p;
  p.alpha_t = v.head(J);
  p.kappa_t = v.segment(J, J);
  p.beta_t = v[2 * J];
  p.log_sd_x = v[2 * J + 1];
  p.log_sd_y = v[2 * J + 2];
  p.gamma_x_t = v[2 * J + 3];
  p.gamma_y_t = v[2 * J + 4];
  return p;
}

ScaledParams scale_params(const UnscaledParams& p, const Vec& sd_g) {
  require(p.sd_x > 0 && p.sd_y > 0, errc::precondition, "noise scales must be positive");
  require(sd_g.size() == p.alpha.size() && p.kappa.size() == p.alpha.size(), errc::precondition,
          "scale vector length must match parameter length");
  require((sd_g.array() > 0).all(), errc::precondition, "candidate scales must be positive");
  ScaledParams s;
  s.alpha_t = sd_g.cwiseProduct(p.alpha) / p.sd_x;
  s.kappa_t = sd_g.cwiseProduct(p.kappa) / p.sd_y;
  s.beta_t = p.sd_x * p.beta / p.sd_y;
  s.log_sd_x = std::log(p.sd_x);
  s.log_sd_y = std::log(p.sd_y);
  s.gamma_x_t = p.gamma_x / p.sd_x;
  s.gamma_y_t = p.gamma_y / p.sd_y;
  return s;
}

UnscaledParams unscale_params(const ScaledParams& p, const Vec& sd_g) {
  require(sd_g.size() == p.alpha_t.size(), errc::precondition,
          "scale vector length must match parameter length");
  require((sd_g.array() > 0).all(), errc::precondition, "candidate scales must be positive");
  UnscaledParams u;
  u.sd_x = std::exp(p.log_sd_x);
  u.sd_y = std::exp(p.log_sd_y);
  u.alpha = u.sd_x * p.alpha_t.cwiseQuotient(sd_g);
  u.kappa = u.sd_y * p.kappa_t.cwiseQuotient(sd_g);
  u.beta = unscaled_beta(p);
  u.gamma_x = u.sd_x * p.gamma_x_t;
  u.gamma_y = u.sd_y * p.gamma_y_t;
  return u;
}

ModelIndicator ModelIndicator::all_spike(int j) {
  require(j >= 1 && j <= max_j, errc::precondition, "candidate count must be in [1, 64]");
  return ModelIndicator{0, j};
}

ModelIndicator ModelIndicator::all_slab(int j) {
  require(j >= 1 && j <= max_j, errc::precondition, "candidate count must be in [1, 64]");
  const std::uint64_t bits = j == 64 ? ~0ull : (1ull << j) - 1ull;
  return ModelIndicator{bits, j};
}

ModelIndicator ModelIndicator::with_flip(int idx) const {
  require(idx >= 0 && idx < j, errc::precondition, "indicator index out of range");
  return ModelIndicator{bits ^ (1ull << idx), j};
}

int ModelIndicator::slab_count() const { return std::popcount(bits); }

std::string ModelIndicator::to_hex() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(bits));
  return std::string(buf);
}

}  // namespace massive
