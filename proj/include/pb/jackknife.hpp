// Generic delete-one-block jackknife. Block statistics must be additive
// (operator+= / operator-=); the estimator maps pooled statistics to a vector
// of estimates, so arbitrarily long chains (regression slopes through the
// adjustment formulas) get standard errors that propagate all upstream noise.
#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pb/errors.hpp"

namespace pb {

struct JackknifeResult {
  Eigen::VectorXd estimate;  // full-data estimate
  Eigen::VectorXd se;        // sqrt((B-1)/B * sum_i (theta_i - mean)^2)
  Eigen::MatrixXd loo;       // B x k leave-one-block-out estimates

  Eigen::Index block_count() const { return loo.rows(); }
};

/// Contiguous near-equal [begin, end) ranges; the remainder goes to the final
/// block. Throws if fewer items than blocks or fewer than 2 blocks.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> block_ranges(Eigen::Index n,
                                                                       int n_blocks) {
  if (n_blocks < 2) throw InputError("block jackknife needs at least 2 blocks");
  if (n < n_blocks) {
    throw InputError("block jackknife: " + std::to_string(n) + " items for " +
                     std::to_string(n_blocks) + " blocks");
  }
  const Eigen::Index base = n / n_blocks;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
  ranges.reserve(static_cast<std::size_t>(n_blocks));
  Eigen::Index lo = 0;
  for (int b = 0; b < n_blocks; ++b) {
    const Eigen::Index hi = (b == n_blocks - 1) ? n : lo + base;
    ranges.emplace_back(lo, hi);
    lo = hi;
  }
  return ranges;
}

/// est(pooled) must return Eigen::VectorXd. An estimator failure on any
/// leave-one-out pool is rethrown naming the offending block.
template <typename Stat, typename Estimator>
JackknifeResult block_jackknife(const std::vector<Stat>& blocks, Estimator&& est) {
  const Eigen::Index n_blocks = static_cast<Eigen::Index>(blocks.size());
  if (n_blocks < 2) throw InputError("block jackknife needs at least 2 blocks");

  Stat pooled = blocks[0];
  for (Eigen::Index b = 1; b < n_blocks; ++b) pooled += blocks[static_cast<std::size_t>(b)];

  JackknifeResult res;
  res.estimate = est(pooled);
  const Eigen::Index k = res.estimate.size();
  res.loo.resize(n_blocks, k);
  for (Eigen::Index b = 0; b < n_blocks; ++b) {
    Stat left = pooled;
    left -= blocks[static_cast<std::size_t>(b)];
    try {
      res.loo.row(b) = est(left).transpose();
    } catch (const std::exception& e) {
      throw NumericError("jackknife: estimator failed on leave-one-out block " +
                         std::to_string(b) + ": " + e.what());
    }
  }
  const Eigen::RowVectorXd mean = res.loo.colwise().mean();
  const double scale = static_cast<double>(n_blocks - 1) / static_cast<double>(n_blocks);
  res.se = (scale * (res.loo.rowwise() - mean).array().square().colwise().sum())
               .sqrt()
               .matrix()
               .transpose();
  return res;
}

/// Convenience wrapper for scalar estimators.
template <typename Stat, typename Estimator>
JackknifeResult block_jackknife_scalar(const std::vector<Stat>& blocks, Estimator&& est) {
  return block_jackknife(blocks, [&](const Stat& s) {
    Eigen::VectorXd v(1);
    v(0) = est(s);
    return v;
  });
}

}  // namespace pb
