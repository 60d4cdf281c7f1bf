#pragma once

#include "splat/model.hpp"

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace splat {

/// Exact 3-d kd-tree over a borrowed point array. Median split on the
/// widest axis, leaves of up to 8 points. Queries prune on the squared
/// distance to the splitting plane, so results are exact.
class KdTree {
public:
    explicit KdTree(const std::vector<Vec3>& points) : points_(points) {
        indices_.resize(points.size());
        std::iota(indices_.begin(), indices_.end(), std::size_t{0});
        if (!indices_.empty()) root_ = build(0, indices_.size());
    }

    std::size_t size() const { return points_.size(); }

    /// Index of the nearest point to q. `exclude` skips one index (use the
    /// query point's own index for self-queries). Returns npos if empty.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t nearest(const Vec3& q, std::size_t exclude = npos) const {
        std::size_t best = npos;
        double best_d2 = std::numeric_limits<double>::infinity();
        if (root_ != -1) nearest_rec(root_, q, exclude, best, best_d2);
        return best;
    }

    double nearest_dist2(const Vec3& q, std::size_t exclude = npos) const {
        std::size_t i = nearest(q, exclude);
        return i == npos ? std::numeric_limits<double>::infinity()
                         : (points_[i] - q).squaredNorm();
    }

    /// k nearest points to q, ascending by distance (ties by index).
    /// Returns fewer than k when the tree is smaller.
    std::vector<std::size_t> knearest(const Vec3& q, std::size_t k,
                                      std::size_t exclude = npos) const {
        std::vector<std::pair<double, std::size_t>> heap;  // max-heap on (d2, idx)
        if (root_ != -1 && k > 0) knearest_rec(root_, q, k, exclude, heap);
        std::sort_heap(heap.begin(), heap.end());
        std::vector<std::size_t> out;
        out.reserve(heap.size());
        for (const auto& [d2, i] : heap) out.push_back(i);
        return out;
    }

private:
    struct Node {
        int axis = 0;
        double split = 0;
        int left = -1, right = -1;
        std::size_t begin = 0, end = 0;  // leaf range into indices_
        bool leaf = false;
    };

    int build(std::size_t begin, std::size_t end) {
        Node node;
        if (end - begin <= 8) {
            node.leaf = true;
            node.begin = begin;
            node.end = end;
            nodes_.push_back(node);
            return static_cast<int>(nodes_.size() - 1);
        }
        Vec3 lo = points_[indices_[begin]], hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(points_[indices_[i]]);
            hi = hi.cwiseMax(points_[indices_[i]]);
        }
        int axis;
        (hi - lo).maxCoeff(&axis);
        std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(indices_.begin() + begin, indices_.begin() + mid,
                         indices_.begin() + end, [&](std::size_t a, std::size_t b) {
                             return points_[a][axis] < points_[b][axis];
                         });
        node.axis = axis;
        node.split = points_[indices_[mid]][axis];
        int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        int left = build(begin, mid);
        int right = build(mid, end);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void nearest_rec(int ni, const Vec3& q, std::size_t exclude, std::size_t& best,
                     double& best_d2) const {
        const Node& n = nodes_[ni];
        if (n.leaf) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                std::size_t idx = indices_[i];
                if (idx == exclude) continue;
                double d2 = (points_[idx] - q).squaredNorm();
                if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                    best_d2 = d2;
                    best = idx;
                }
            }
            return;
        }
        double delta = q[n.axis] - n.split;
        int near = delta < 0 ? n.left : n.right;
        int far = delta < 0 ? n.right : n.left;
        nearest_rec(near, q, exclude, best, best_d2);
        if (delta * delta <= best_d2) nearest_rec(far, q, exclude, best, best_d2);
    }

    void knearest_rec(int ni, const Vec3& q, std::size_t k, std::size_t exclude,
                      std::vector<std::pair<double, std::size_t>>& heap) const {
        const Node& n = nodes_[ni];
        if (n.leaf) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                std::size_t idx = indices_[i];
                if (idx == exclude) continue;
                double d2 = (points_[idx] - q).squaredNorm();
                if (heap.size() < k) {
                    heap.emplace_back(d2, idx);
                    std::push_heap(heap.begin(), heap.end());
                } else if (std::make_pair(d2, idx) < heap.front()) {
                    std::pop_heap(heap.begin(), heap.end());
                    heap.back() = {d2, idx};
                    std::push_heap(heap.begin(), heap.end());
                }
            }
            return;
        }
        double delta = q[n.axis] - n.split;
        int near = delta < 0 ? n.left : n.right;
        int far = delta < 0 ? n.right : n.left;
        knearest_rec(near, q, k, exclude, heap);
        if (heap.size() < k || delta * delta <= heap.front().first)
            knearest_rec(far, q, k, exclude, heap);
    }

    const std::vector<Vec3>& points_;
    std::vector<std::size_t> indices_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace splat
