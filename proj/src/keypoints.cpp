#include "diffeo/keypoints.hpp"

#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace diffeo {

Vec3 KeyPointSet::centroid() const {
  if (points.empty()) {
    throw std::invalid_argument("KeyPointSet: centroid of empty set");
  }
  Vec3 sum = Vec3::Zero();
  for (const auto& kp : points) sum += kp.position;
  return sum / static_cast<double>(points.size());
}

std::pair<Vec3, Vec3> KeyPointSet::bounding_box() const {
  if (points.empty()) {
    throw std::invalid_argument("KeyPointSet: bounding box of empty set");
  }
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& kp : points) {
    lo = lo.cwiseMin(kp.position);
    hi = hi.cwiseMax(kp.position);
  }
  return {lo, hi};
}

void KeyPointSet::validate() const {
  if (points.empty()) {
    throw std::invalid_argument("KeyPointSet: at least one key point required");
  }
  std::unordered_set<std::string> seen;
  for (const auto& kp : points) {
    if (!seen.insert(kp.id).second) {
      throw std::invalid_argument("KeyPointSet: duplicate id '" + kp.id + "'");
    }
    if (!kp.position.allFinite() || !kp.orientation.coeffs().allFinite()) {
      throw std::invalid_argument("KeyPointSet: non-finite key point '" +
                                  kp.id + "'");
    }
  }
}

void require_aligned(const KeyPointSet& a, const KeyPointSet& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("key point sets differ in size (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.points[i].id != b.points[i].id) {
      throw std::invalid_argument("key point id mismatch at index " +
                                  std::to_string(i) + ": '" +
                                  a.points[i].id + "' vs '" +
                                  b.points[i].id + "'");
    }
  }
}

}  // namespace diffeo
