#pragma once

#include "partsum/tensor.hpp"

namespace partsum {

// Axis-aligned box in normalized center form; all coordinates in [0,1].
struct Box {
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;

    // Corner form (x1,y1,x2,y2), clamped to the unit square.
    double x1() const;
    double y1() const;
    double x2() const;
    double y2() const;
    double area() const;

    static Box from_corners(double x1, double y1, double x2, double y2);

    bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);
double giou(const Box& a, const Box& b);
Box union_box(const Box& a, const Box& b);
// Sum of absolute center-form coordinate differences.
double l1_box(const Box& a, const Box& b);

// Differentiable counterparts on [N x 4] center-form tensors (rows are boxes).
// Values agree with the plain functions to 1e-12 on non-degenerate inputs.
// Corner derivation clamps to [0,1] with straight-through gradients.
// Both return [N x 1] tensors of per-row values.
Tensor box_l1_rows(const Tensor& pred, const Tensor& target);
Tensor box_giou_rows(const Tensor& pred, const Tensor& target);

}  // namespace partsum
