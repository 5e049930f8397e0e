#pragma once

#include <cstddef>
#include <vector>

#include "nearfield/array_model.hpp"

namespace nearfield {

/// perm[i] is the estimate index assigned to truth i.
struct Assignment {
  std::vector<std::size_t> perm;
  double cost = 0.0;  // total squared distance
};

/// Minimum total squared Euclidean distance matching. Exhaustive for K <= 6,
/// Hungarian algorithm beyond.
Assignment match_sources(const std::vector<Vec3>& estimates, const std::vector<Vec3>& truths);
Assignment match_sources(const std::vector<SourcePosition>& estimates, const std::vector<SourcePosition>& truths);

/// O(K^3) optimal assignment on a square cost matrix (row -> column).
Assignment hungarian(const std::vector<std::vector<double>>& cost);

struct Trial {
  std::vector<Vec3> truths;
  std::vector<Vec3> estimates;
};

/// sqrt(sum of matched squared errors / (3 K L)).
double rmse(const std::vector<Trial>& trials);

std::vector<Vec3> cartesian_of(const std::vector<SourcePosition>& sources);

}  // namespace nearfield
