#include "cleanup/stats/regression.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "cleanup/common/errors.hpp"
#include "cleanup/common/rng.hpp"
#include "cleanup/stats/distributions.hpp"

namespace cleanup::stats {

OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto n = X.rows(), k = X.cols();
  if (y.size() != n) throw ConfigError("ols: design and response differ in length");
  if (n <= k) throw ConfigError("ols: need more observations than coefficients");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < k) throw NumericError("ols: singular design matrix");
  OlsFit fit;
  fit.beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * fit.beta;
  fit.rss = resid.squaredNorm();
  fit.df = static_cast<int>(n - k);
  const double sigma2 = fit.rss / fit.df;
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
  fit.se = (sigma2 * xtx_inv.diagonal()).cwiseSqrt();
  return fit;
}

namespace {

TestResult coefficient(const OlsFit& fit, int i, const char* name) {
  TestResult r;
  r.name = name;
  r.estimate = fit.beta(i);
  r.df1 = fit.df;
  const double se = fit.se(i);
  if (se == 0.0) {
    r.degenerate = true;
    r.note = "exact fit";
    r.statistic = r.estimate == 0.0 ? 0.0 : std::copysign(INFINITY, r.estimate);
    r.p = r.estimate == 0.0 ? 1.0 : 0.0;
    r.ci_low = r.ci_high = r.estimate;
    return r;
  }
  r.statistic = r.estimate / se;
  r.p = std::min(1.0, 2.0 * student_t_sf(std::fabs(r.statistic), fit.df));
  const double q = student_t_quantile(0.975, fit.df);
  r.ci_low = r.estimate - q * se;
  r.ci_high = r.estimate + q * se;
  return r;
}

Eigen::MatrixXd design(std::initializer_list<std::span<const double>> cols, std::size_t n) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size() + 1));
  X.col(0).setOnes();
  Eigen::Index c = 1;
  for (auto col : cols) {
    for (std::size_t i = 0; i < n; ++i) X(static_cast<Eigen::Index>(i), c) = col[i];
    ++c;
  }
  return X;
}

Eigen::VectorXd vec(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct Paths {
  OlsFit am, bc_prime, c;
};

Paths fit_paths(std::span<const double> x, std::span<const double> m, std::span<const double> y) {
  const auto n = x.size();
  return {ols(design({x}, n), vec(m)), ols(design({x, m}, n), vec(y)), ols(design({x}, n), vec(y))};
}

double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

}  // namespace

Regression ols_regression(std::span<const double> y, std::span<const double> x) {
  if (x.size() != y.size()) throw ConfigError("ols_regression: x and y differ in length");
  if (x.size() < 3) throw ConfigError("ols_regression: need at least 3 points");
  const auto fit = ols(design({x}, x.size()), vec(y));
  Regression r;
  r.slope = coefficient(fit, 1, "slope");
  r.intercept = coefficient(fit, 0, "intercept");
  const Eigen::VectorXd yv = vec(y);
  const double tss = (yv.array() - yv.mean()).square().sum();
  r.r_squared = tss > 0.0 ? 1.0 - fit.rss / tss : 1.0;
  return r;
}

Mediation mediation(std::span<const double> x, std::span<const double> m, std::span<const double> y, int resamples,
                    std::uint64_t seed, int threads) {
  if (x.size() != m.size() || x.size() != y.size()) throw ConfigError("mediation: inputs differ in length");
  if (x.size() < 4) throw ConfigError("mediation: need at least 4 observations");
  if (resamples < 100) throw ConfigError("mediation: need at least 100 resamples");
  const auto n = x.size();
  const auto paths = fit_paths(x, m, y);
  Mediation out;
  out.resamples = resamples;
  out.a = paths.am.beta(1);
  out.b = paths.bc_prime.beta(2);
  out.c_prime = paths.bc_prime.beta(1);
  out.c = paths.c.beta(1);
  out.total = coefficient(paths.c, 1, "mediation_total");
  out.direct = coefficient(paths.bc_prime, 1, "mediation_direct");

  std::vector<double> boot(static_cast<std::size_t>(resamples));
  const auto draw = [&](int r) {
    Rng rng(derive_seed(seed, "mediation-bootstrap", static_cast<std::uint64_t>(r)));
    std::vector<double> bx(n), bm(n), by(n);
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto j = rng.uniform_int(n);
        bx[i] = x[j];
        bm[i] = m[j];
        by[i] = y[j];
      }
      try {
        const auto am = ols(design({bx}, n), vec(bm));
        const auto bc = ols(design({bx, bm}, n), vec(by));
        boot[static_cast<std::size_t>(r)] = am.beta(1) * bc.beta(2);
        return;
      } catch (const NumericError&) {
      }
    }
    throw NumericError("mediation: bootstrap resamples are persistently degenerate");
  };
  const int workers = std::max(1, std::min(threads, resamples));
  if (workers == 1) {
    for (int r = 0; r < resamples; ++r) draw(r);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int r = w; r < resamples; r += workers) draw(r);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::sort(boot.begin(), boot.end());
  const double le = static_cast<double>(std::count_if(boot.begin(), boot.end(), [](double v) { return v <= 0.0; }));
  const double ge = static_cast<double>(std::count_if(boot.begin(), boot.end(), [](double v) { return v >= 0.0; }));
  out.ab.name = "mediation_indirect";
  out.ab.estimate = out.a * out.b;
  out.ab.statistic = out.ab.estimate;
  out.ab.ci_low = percentile(boot, 0.025);
  out.ab.ci_high = percentile(boot, 0.975);
  out.ab.p = std::min(1.0, 2.0 * std::min(le, ge) / resamples);
  out.ab.df1 = resamples;
  return out;
}

}  // namespace cleanup::stats
