#pragma once

#include "ovseg/types.hpp"

#include <span>
#include <utility>
#include <vector>

namespace ovseg {

/// Static 3D kd-tree. Query results are deterministic: k-NN ties are broken by
/// lower index, radius results come back in ascending index order.
class KdTree {
  public:
    KdTree() = default;
    explicit KdTree(std::span<const Vec3> points);

    std::size_t size() const { return points_.size(); }

    /// k nearest points (including an exact duplicate of q, if present),
    /// ordered by (distance, index).
    std::vector<std::pair<PointIndex, double>> knn(const Vec3& q, std::size_t k) const;

    /// All points with ||p - q|| <= r, ascending by index.
    void radius(const Vec3& q, double r, std::vector<PointIndex>& out) const;

    PointIndex nearest(const Vec3& q) const;

    const Vec3& point(PointIndex i) const { return points_[i]; }

  private:
    struct Node {
        std::uint32_t begin = 0, end = 0;
        std::int32_t left = -1, right = -1;
        int axis = 0;
        double split = 0.0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<Vec3> points_;
    std::vector<PointIndex> order_;
    std::vector<Node> nodes_;
};

} // namespace ovseg
