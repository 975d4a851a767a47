#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>

namespace bolo {

enum class HistNormalization { counts, probability };

struct Histogram {
  Eigen::ArrayXd bin_edges; // strictly increasing, size = bins + 1
  Eigen::ArrayXi counts;
  HistNormalization normalization = HistNormalization::counts;

  Eigen::Index n_bins() const { return counts.size(); }
  std::int64_t total() const { return counts.cast<std::int64_t>().sum(); }
  double bin_width(Eigen::Index i) const { return bin_edges[i + 1] - bin_edges[i]; }
  Eigen::ArrayXd centers() const {
    return 0.5 * (bin_edges.head(bin_edges.size() - 1) + bin_edges.tail(bin_edges.size() - 1));
  }

  void validate() const {
    if (counts.size() + 1 != bin_edges.size())
      throw std::invalid_argument("Histogram: counts length must be edges length - 1");
    for (Eigen::Index i = 0; i + 1 < bin_edges.size(); ++i)
      if (!(bin_edges[i] < bin_edges[i + 1]))
        throw std::invalid_argument("Histogram: edges must be strictly increasing");
    if ((counts < 0).any())
      throw std::invalid_argument("Histogram: counts must be nonnegative");
  }
};

// Scott's bin width 3.49 * sigma_hat * n^(-1/3), with sigma_hat the sample
// standard deviation (n-1 denominator).
double scott_bin_width(const Eigen::ArrayXd& samples);

// Uniform binning from min to max; bin_width <= 0 selects Scott's rule. The
// maximum value lands in the last bin, so the counts always sum to n.
Histogram build_histogram(const Eigen::ArrayXd& samples, double bin_width = 0.0);

} // namespace bolo
