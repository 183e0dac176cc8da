#include "syndecomp/prediction.hpp"

#include <cmath>

#include "syndecomp/error.hpp"

namespace syndecomp {

Eigen::VectorXd synthetic_arf(const Eigen::MatrixXd& source_arfs_post, const Eigen::VectorXd& w) {
  if (source_arfs_post.cols() != w.size()) {
    throw Error(ErrorKind::validation, "prediction", "weight length does not match the number of sources");
  }
  return source_arfs_post * w;
}

ThetaDecomposition decompose_theta(const MatchedGroup& matched, const Eigen::VectorXd& target_arf_post,
                                   const Eigen::MatrixXd& source_arfs_post) {
  const Eigen::Index n0 = source_arfs_post.rows();
  if (target_arf_post.size() != n0 || static_cast<Eigen::Index>(matched.indicator.size()) != n0 || n0 == 0) {
    throw Error(ErrorKind::validation, "prediction", "ARF vectors are not aligned with the target sample");
  }
  ThetaDecomposition d;
  d.unmatched = Eigen::VectorXd::Zero(source_arfs_post.cols());
  for (Eigen::Index i = 0; i < n0; ++i) {
    if (matched.matched(static_cast<std::size_t>(i))) {
      const double v = target_arf_post(i);
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::numeric, "prediction",
                    "non-finite target ARF value at matched observation " + std::to_string(i));
      }
      d.matched += v;
    } else {
      const auto row = source_arfs_post.row(i);
      if (!row.allFinite()) {
        throw Error(ErrorKind::numeric, "prediction",
                    "non-finite source ARF value at unmatched observation " + std::to_string(i));
      }
      d.unmatched += row.transpose();
    }
  }
  const double scale = 1.0 / static_cast<double>(n0);
  d.matched *= scale;
  d.unmatched *= scale;
  d.matched_fraction = static_cast<double>(matched.matched_count) / static_cast<double>(n0);
  return d;
}

PredictionResult predict_theta(const MatchedGroup& matched, const Eigen::VectorXd& target_arf_post,
                               const Eigen::MatrixXd& source_arfs_post, const Eigen::VectorXd& w) {
  if (source_arfs_post.cols() != w.size()) {
    throw Error(ErrorKind::validation, "prediction", "weight length does not match the number of sources");
  }
  const ThetaDecomposition d = decompose_theta(matched, target_arf_post, source_arfs_post);
  PredictionResult r;
  r.matched_contribution = d.matched;
  r.per_source_unmatched_means = d.unmatched;
  r.unmatched_contribution = d.unmatched.dot(w);
  r.theta = r.matched_contribution + r.unmatched_contribution;
  r.matched_fraction = d.matched_fraction;
  return r;
}

StatusQuoCheck null_policy_cross_check(const Eigen::VectorXd& synthetic_status_quo,
                                       const Eigen::VectorXd& target_outcomes) {
  StatusQuoCheck c;
  const auto n = static_cast<double>(target_outcomes.size());
  c.synthetic = synthetic_status_quo.mean();
  c.direct = target_outcomes.mean();
  c.discrepancy = std::abs(c.synthetic - c.direct);
  const double var = (target_outcomes.array() - c.direct).square().sum() / std::max(n - 1.0, 1.0);
  c.direct_standard_error = std::sqrt(var / n);
  return c;
}

}  // namespace syndecomp
