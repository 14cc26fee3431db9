#pragma once

#include <string>
#include <utility>
#include <vector>

#include "diffeo/geometry.hpp"

namespace diffeo {

struct KeyPoint {
  std::string id;
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

/// Ordered, id-labelled landmarks defining one workspace configuration.
struct KeyPointSet {
  std::string name;
  std::vector<KeyPoint> points;

  std::size_t size() const { return points.size(); }
  Vec3 centroid() const;
  /// Axis-aligned bounds of the positions. Throws std::invalid_argument
  /// when the set is empty.
  std::pair<Vec3, Vec3> bounding_box() const;
  /// Throws std::invalid_argument on empty set, duplicate ids or
  /// non-finite positions.
  void validate() const;
};

/// A paired workspace configuration: the fit carries inits onto goals.
struct Environment {
  KeyPointSet inits;
  KeyPointSet goals;
};

/// Throws std::invalid_argument unless both sets have the same size and
/// pairwise matching ids.
void require_aligned(const KeyPointSet& a, const KeyPointSet& b);

}  // namespace diffeo
