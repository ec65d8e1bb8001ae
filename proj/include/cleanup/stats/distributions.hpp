#pragma once

namespace cleanup::stats {

// Tail probabilities; infinite statistics map to 0 or 1.
double student_t_cdf(double t, double df);
double student_t_sf(double t, double df);
double student_t_quantile(double p, double df);
double f_sf(double f, double df1, double df2);
double chi2_sf(double x, double df);
double normal_cdf(double z);
double normal_quantile(double p);

/// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2), the limiting
/// distribution of sqrt(n) * D_n.
double kolmogorov_sf(double lambda);

}  // namespace cleanup::stats
