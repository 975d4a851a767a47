#include "bolosim/histogram.hpp"

#include <algorithm>
#include <cmath>

namespace bolo {

double scott_bin_width(const Eigen::ArrayXd& samples) {
  const auto n = samples.size();
  if (n < 2) throw std::invalid_argument("scott_bin_width: need at least 2 samples");
  const double mean = samples.mean();
  const double var = (samples - mean).square().sum() / static_cast<double>(n - 1);
  return 3.49 * std::sqrt(var) * std::pow(static_cast<double>(n), -1.0 / 3.0);
}

Histogram build_histogram(const Eigen::ArrayXd& samples, double bin_width) {
  const auto n = samples.size();
  if (n < 1) throw std::invalid_argument("build_histogram: empty sample set");
  double w = bin_width > 0.0 ? bin_width : scott_bin_width(samples);
  const double lo = samples.minCoeff();
  const double hi = samples.maxCoeff();
  if (!(w > 0.0)) w = 1.0; // all samples identical: any single bin will do

  // Small slack so the max value is strictly inside the last bin instead of
  // creating an extra one through rounding.
  const auto nbins = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::ceil((hi - lo) / w - 1e-9)));

  Histogram h;
  h.bin_edges = lo + w * Eigen::ArrayXd::LinSpaced(nbins + 1, 0.0, static_cast<double>(nbins));
  h.counts = Eigen::ArrayXi::Zero(nbins);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto bin = static_cast<Eigen::Index>(std::floor((samples[i] - lo) / w));
    bin = std::clamp<Eigen::Index>(bin, 0, nbins - 1);
    ++h.counts[bin];
  }
  return h;
}

} // namespace bolo
