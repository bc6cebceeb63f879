#include "ovseg/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace ovseg {

namespace {
constexpr std::uint32_t kLeafSize = 12;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0U);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<std::uint32_t>(points_.size()));
    }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Vec3 lo = points_[order_[begin]], hi = lo;
    for (auto i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id; // all coincident: keep as a leaf

    auto mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](PointIndex a, PointIndex b) {
                         double pa = points_[a][axis], pb = points_[b][axis];
                         return pa < pb || (pa == pb && a < b);
                     });
    double split = points_[order_[mid]][axis];
    auto left = build(begin, mid);
    auto right = build(mid, end);
    auto& n = nodes_[static_cast<std::size_t>(id)];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
}

std::vector<std::pair<PointIndex, double>> KdTree::knn(const Vec3& q, std::size_t k) const {
    std::vector<std::pair<PointIndex, double>> out;
    if (k == 0 || points_.empty()) return out;
    // max-heap on (d2, index): top is the current worst candidate
    auto worse = [](const std::pair<double, PointIndex>& a, const std::pair<double, PointIndex>& b) {
        return a.first < b.first || (a.first == b.first && a.second < b.second);
    };
    std::priority_queue<std::pair<double, PointIndex>, std::vector<std::pair<double, PointIndex>>,
                        decltype(worse)>
        heap(worse);

    auto visit = [&](auto&& self, std::int32_t node_id) -> void {
        const Node& n = nodes_[static_cast<std::size_t>(node_id)];
        if (n.left < 0) {
            for (auto i = n.begin; i < n.end; ++i) {
                auto idx = order_[i];
                double d2 = (points_[idx] - q).squaredNorm();
                std::pair<double, PointIndex> cand{d2, idx};
                if (heap.size() < k) {
                    heap.push(cand);
                } else if (worse(cand, heap.top())) {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        double diff = q[n.axis] - n.split;
        auto near = diff < 0 ? n.left : n.right;
        auto far = diff < 0 ? n.right : n.left;
        self(self, near);
        if (heap.size() < k || diff * diff <= heap.top().first) self(self, far);
    };
    visit(visit, 0);

    out.resize(heap.size());
    for (auto i = out.size(); i-- > 0;) {
        out[i] = {heap.top().second, heap.top().first};
        heap.pop();
    }
    for (auto& [idx, d] : out) d = std::sqrt(d);
    return out;
}

void KdTree::radius(const Vec3& q, double r, std::vector<PointIndex>& out) const {
    out.clear();
    if (points_.empty()) return;
    const double r2 = r * r;
    auto visit = [&](auto&& self, std::int32_t node_id) -> void {
        const Node& n = nodes_[static_cast<std::size_t>(node_id)];
        if (n.left < 0) {
            for (auto i = n.begin; i < n.end; ++i) {
                auto idx = order_[i];
                if ((points_[idx] - q).squaredNorm() <= r2) out.push_back(idx);
            }
            return;
        }
        double diff = q[n.axis] - n.split;
        if (diff <= r) self(self, n.left);
        if (diff >= -r) self(self, n.right);
    };
    visit(visit, 0);
    std::sort(out.begin(), out.end());
}

PointIndex KdTree::nearest(const Vec3& q) const { return knn(q, 1).front().first; }

} // namespace ovseg
