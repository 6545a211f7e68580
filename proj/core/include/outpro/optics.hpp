#pragma once

#include <Eigen/Core>

namespace outpro {

// Reachability assigned to the query row by an OPTICS pass over all rows
// (epsilon = infinity). Core distance of a point is its distance to the
// min_pts-th nearest row, the point itself included. The ordering starts
// from the non-query point with the smallest core distance (ties to the
// lowest index) and stops once the query is reached.
double optics_reachability(const Eigen::MatrixXd& points, int query_index, int min_pts);

}  // namespace outpro
