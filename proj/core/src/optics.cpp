#include "outpro/optics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace outpro {

double optics_reachability(const Eigen::MatrixXd& points, int query_index, int min_pts) {
  const int m = static_cast<int>(points.rows());
  if (min_pts < 1) throw std::invalid_argument("optics_reachability: min_pts must be >= 1");
  if (m < min_pts) {
    throw std::invalid_argument(
        "optics_reachability: fewer points than min_pts; increase the neighborhood size K");
  }
  if (query_index < 0 || query_index >= m) {
    throw std::invalid_argument("optics_reachability: query index out of range");
  }

  Eigen::MatrixXd dist(m, m);
  for (int i = 0; i < m; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < m; ++j) {
      const double d = (points.row(i) - points.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }

  // Core distance: min_pts-th smallest entry of the row (self included).
  std::vector<double> core(static_cast<std::size_t>(m));
  std::vector<double> row(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) row[static_cast<std::size_t>(j)] = dist(i, j);
    std::nth_element(row.begin(), row.begin() + (min_pts - 1), row.end());
    core[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(min_pts - 1)];
  }

  int start = -1;
  for (int i = 0; i < m; ++i) {
    if (i == query_index) continue;
    if (start < 0 || core[static_cast<std::size_t>(i)] < core[static_cast<std::size_t>(start)]) {
      start = i;
    }
  }
  if (start < 0) {
    throw std::invalid_argument("optics_reachability: needs at least one non-query point");
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> reach(static_cast<std::size_t>(m), inf);
  std::vector<char> processed(static_cast<std::size_t>(m), 0);

  int current = start;
  for (int step = 0; step < m; ++step) {
    processed[static_cast<std::size_t>(current)] = 1;
    if (current == query_index) break;
    // With epsilon = infinity every unprocessed point is a neighbor.
    for (int o = 0; o < m; ++o) {
      if (processed[static_cast<std::size_t>(o)]) continue;
      const double r = std::max(core[static_cast<std::size_t>(current)], dist(current, o));
      if (r < reach[static_cast<std::size_t>(o)]) reach[static_cast<std::size_t>(o)] = r;
    }
    int next = -1;
    for (int o = 0; o < m; ++o) {
      if (processed[static_cast<std::size_t>(o)]) continue;
      if (next < 0 || reach[static_cast<std::size_t>(o)] < reach[static_cast<std::size_t>(next)]) {
        next = o;
      }
    }
    if (next < 0) break;
    current = next;
  }
  return reach[static_cast<std::size_t>(query_index)];
}

}  // namespace outpro
