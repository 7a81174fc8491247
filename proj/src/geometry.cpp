#include "partsum/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace partsum {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

double Box::x1() const { return clamp01(cx - 0.5 * w); }
double Box::y1() const { return clamp01(cy - 0.5 * h); }
double Box::x2() const { return clamp01(cx + 0.5 * w); }
double Box::y2() const { return clamp01(cy + 0.5 * h); }
double Box::area() const { return (x2() - x1()) * (y2() - y1()); }

Box Box::from_corners(double x1, double y1, double x2, double y2) {
    Box b;
    b.cx = 0.5 * (x1 + x2);
    b.cy = 0.5 * (y1 + y2);
    b.w = x2 - x1;
    b.h = y2 - y1;
    return b;
}

double iou(const Box& a, const Box& b) {
    const double ix1 = std::max(a.x1(), b.x1());
    const double iy1 = std::max(a.y1(), b.y1());
    const double ix2 = std::min(a.x2(), b.x2());
    const double iy2 = std::min(a.y2(), b.y2());
    const double inter = std::max(0.0, ix2 - ix1) * std::max(0.0, iy2 - iy1);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const Box& a, const Box& b) {
    const double ix1 = std::max(a.x1(), b.x1());
    const double iy1 = std::max(a.y1(), b.y1());
    const double ix2 = std::min(a.x2(), b.x2());
    const double iy2 = std::min(a.y2(), b.y2());
    const double inter = std::max(0.0, ix2 - ix1) * std::max(0.0, iy2 - iy1);
    const double uni = a.area() + b.area() - inter;
    const double i = uni > 0.0 ? inter / uni : 0.0;
    const double ex1 = std::min(a.x1(), b.x1());
    const double ey1 = std::min(a.y1(), b.y1());
    const double ex2 = std::max(a.x2(), b.x2());
    const double ey2 = std::max(a.y2(), b.y2());
    const double enclose = (ex2 - ex1) * (ey2 - ey1);
    if (enclose <= 0.0) return i;
    return i - (enclose - uni) / enclose;
}

Box union_box(const Box& a, const Box& b) {
    return Box::from_corners(std::min(a.x1(), b.x1()), std::min(a.y1(), b.y1()), std::max(a.x2(), b.x2()),
                             std::max(a.y2(), b.y2()));
}

double l1_box(const Box& a, const Box& b) {
    return std::fabs(a.cx - b.cx) + std::fabs(a.cy - b.cy) + std::fabs(a.w - b.w) + std::fabs(a.h - b.h);
}

namespace {

void require_boxes(const Tensor& t, const char* op) {
    if (t.ndim() != 2 || t.dim(1) != 4) {
        throw ShapeError(std::string(op) + ": expected [N x 4] center-form boxes, got " + shape_str(t.shape()));
    }
}

struct Corners {
    Tensor x1, y1, x2, y2;
};

Corners to_corners(const Tensor& boxes) {
    Tensor cx = slice_cols(boxes, 0, 1);
    Tensor cy = slice_cols(boxes, 1, 1);
    Tensor hw = scale(slice_cols(boxes, 2, 1), 0.5);
    Tensor hh = scale(slice_cols(boxes, 3, 1), 0.5);
    Corners c;
    c.x1 = clamp01_straight_through(sub(cx, hw));
    c.y1 = clamp01_straight_through(sub(cy, hh));
    c.x2 = clamp01_straight_through(add(cx, hw));
    c.y2 = clamp01_straight_through(add(cy, hh));
    return c;
}

}  // namespace

Tensor box_l1_rows(const Tensor& pred, const Tensor& target) {
    require_boxes(pred, "box_l1_rows");
    require_boxes(target, "box_l1_rows");
    if (pred.dim(0) != target.dim(0)) {
        throw ShapeError("box_l1_rows: row count mismatch: " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    }
    Tensor diff = abs(sub(pred, target));
    return matmul(diff, Tensor::full({4, 1}, 1.0));
}

Tensor box_giou_rows(const Tensor& pred, const Tensor& target) {
    require_boxes(pred, "box_giou_rows");
    require_boxes(target, "box_giou_rows");
    if (pred.dim(0) != target.dim(0)) {
        throw ShapeError("box_giou_rows: row count mismatch: " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    }
    Corners a = to_corners(pred);
    Corners b = to_corners(target);
    Tensor zero = Tensor::zeros({pred.dim(0), 1});

    Tensor iw = maximum(sub(minimum(a.x2, b.x2), maximum(a.x1, b.x1)), zero);
    Tensor ih = maximum(sub(minimum(a.y2, b.y2), maximum(a.y1, b.y1)), zero);
    Tensor inter = mul(iw, ih);
    Tensor area_a = mul(sub(a.x2, a.x1), sub(a.y2, a.y1));
    Tensor area_b = mul(sub(b.x2, b.x1), sub(b.y2, b.y1));
    Tensor uni = sub(add(area_a, area_b), inter);
    Tensor iou_t = div(inter, uni);

    Tensor ew = sub(maximum(a.x2, b.x2), minimum(a.x1, b.x1));
    Tensor eh = sub(maximum(a.y2, b.y2), minimum(a.y1, b.y1));
    Tensor enclose = mul(ew, eh);
    return sub(iou_t, div(sub(enclose, uni), enclose));
}

}  // namespace partsum
