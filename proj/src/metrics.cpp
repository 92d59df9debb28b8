#include "styletalk/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace styletalk {

double pairwise_auc(std::span<const double> pos, std::span<const double> neg) {
  require(!pos.empty() && !neg.empty(), "AUC needs positive and negative scores");
  double wins = 0.0;
  for (double a : pos)
    for (double b : neg) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double silhouette_score(const MatrixD& points, std::span<const int> labels) {
  const Eigen::Index n = points.rows();
  require(static_cast<std::size_t>(n) == labels.size(), "silhouette: one label per row required");
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  require(counts.size() >= 2, "silhouette needs at least 2 clusters");

  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::map<int, double> dist_sum;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dist_sum[labels[j]] += (points.row(i) - points.row(j)).norm();
    const int own = labels[i];
    if (counts[own] == 1) continue;  // singleton clusters score 0
    const double a = dist_sum[own] / (counts[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, count] : counts)
      if (label != own) b = std::min(b, dist_sum[label] / count);
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

namespace {

std::map<int, Eigen::RowVectorXd> centroids(const MatrixD& pts, std::span<const int> labels,
                                            Eigen::Index skip = -1) {
  std::map<int, Eigen::RowVectorXd> sums;
  std::map<int, int> counts;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    if (i == skip) continue;
    auto [it, fresh] = sums.try_emplace(labels[i], Eigen::RowVectorXd::Zero(pts.cols()));
    it->second += pts.row(i);
    ++counts[labels[i]];
  }
  for (auto& [label, s] : sums) s /= counts[label];
  return sums;
}

int nearest(const std::map<int, Eigen::RowVectorXd>& cents, const Eigen::RowVectorXd& x) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [label, c] : cents) {
    const double d = (x - c).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = label;
    }
  }
  return best;
}

}  // namespace

double nearest_centroid_accuracy(const MatrixD& ref, std::span<const int> ref_labels, const MatrixD& query,
                                 std::span<const int> query_labels) {
  require(static_cast<std::size_t>(ref.rows()) == ref_labels.size() &&
              static_cast<std::size_t>(query.rows()) == query_labels.size(),
          "nearest centroid: one label per row required");
  require(ref.rows() > 0 && query.rows() > 0 && ref.cols() == query.cols(), "nearest centroid: bad shapes");
  const auto cents = centroids(ref, ref_labels);
  int correct = 0;
  for (Eigen::Index i = 0; i < query.rows(); ++i) correct += nearest(cents, query.row(i)) == query_labels[i];
  return static_cast<double>(correct) / static_cast<double>(query.rows());
}

double nearest_centroid_loo_accuracy(const MatrixD& points, std::span<const int> labels) {
  require(static_cast<std::size_t>(points.rows()) == labels.size() && points.rows() > 1,
          "nearest centroid: one label per row required");
  int correct = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    correct += nearest(centroids(points, labels, i), points.row(i)) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(points.rows());
}

Projection principal_projection(const MatrixD& points, int k) {
  require(points.rows() >= 1 && k >= 1 && k <= points.cols(), "projection: bad dimensions");
  Projection p;
  p.mean = points.colwise().mean();
  const MatrixD centred = points.rowwise() - p.mean;
  const MatrixD cov = centred.transpose() * centred;
  Eigen::SelfAdjointEigenSolver<MatrixD> eig(cov);
  // Eigenvalues come back ascending.
  p.directions.resize(points.cols(), k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd d = eig.eigenvectors().col(points.cols() - 1 - j);
    Eigen::Index arg = 0;
    d.cwiseAbs().maxCoeff(&arg);
    if (d(arg) < 0.0) d = -d;
    p.directions.col(j) = d;
  }
  p.coords = centred * p.directions;
  return p;
}

LandmarkDistance landmark_distance(const MotionSequence& gt, const MotionSequence& pred, const FaceBasis& basis) {
  require(gt.size() == pred.size(), "landmark distance: sequence lengths differ");
  gt.validate();
  pred.validate();
  basis.validate();
  // The mean shape cancels in the difference.
  const MatrixD diff = (gt.to_double() - pred.to_double()) * basis.vertex_basis.transpose();  // F x 3P
  const Eigen::Index verts = basis.vertex_basis.rows() / 3;
  LandmarkDistance out;
  for (Eigen::Index f = 0; f < diff.rows(); ++f) {
    double full = 0.0;
    for (Eigen::Index v = 0; v < verts; ++v) full += diff.row(f).segment(3 * v, 3).norm();
    double mouth = 0.0;
    for (int v : basis.mouth_vertex_ids) mouth += diff.row(f).segment(3 * v, 3).norm();
    out.full += full / static_cast<double>(verts);
    out.mouth += mouth / static_cast<double>(basis.mouth_vertex_ids.size());
  }
  out.full /= static_cast<double>(diff.rows());
  out.mouth /= static_cast<double>(diff.rows());
  return out;
}

}  // namespace styletalk
