#pragma once

// Evaluation metrics: ranking AUC, clustering scores, a principal-direction
// projection and landmark distances on the synthetic face mesh.

#include <span>

#include "styletalk/core.hpp"

namespace styletalk {

/// P(score_pos > score_neg) over every pair; ties count one half.
double pairwise_auc(std::span<const double> pos, std::span<const double> neg);

/// Mean silhouette coefficient (Euclidean) of the rows of `points`.
double silhouette_score(const MatrixD& points, std::span<const int> labels);

/// Centroids from the reference rows, accuracy of assigning the query rows.
double nearest_centroid_accuracy(const MatrixD& ref, std::span<const int> ref_labels, const MatrixD& query,
                                 std::span<const int> query_labels);

/// Leave-one-out variant: each row is classified against centroids of the others.
double nearest_centroid_loo_accuracy(const MatrixD& points, std::span<const int> labels);

struct Projection {
  Eigen::RowVectorXd mean;
  MatrixD directions;  // dim x k, unit columns, largest-magnitude entry positive
  MatrixD coords;      // n x k
};

/// Projection onto the top-k principal directions of the centred rows.
Projection principal_projection(const MatrixD& points, int k = 2);

struct LandmarkDistance {
  double full = 0.0;   // mean vertex L2 over the whole mesh
  double mouth = 0.0;  // mean vertex L2 over mouth vertices
};

LandmarkDistance landmark_distance(const MotionSequence& gt, const MotionSequence& pred, const FaceBasis& basis);

}  // namespace styletalk
