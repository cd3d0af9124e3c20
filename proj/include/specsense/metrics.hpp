#pragma once

#include "specsense/types.hpp"

#include <span>

namespace specsense::metrics {

// Intersection-over-union of two boxes in continuous seconds x Hz.
// Zero if either box has zero area (even against itself).
double iou(const BoundingBox& a, const BoundingBox& b);

// Dense IoU matrix: rows = ground-truth boxes, columns = detections.
struct IoUMatrix {
    int n_gt = 0;
    int n_det = 0;
    std::vector<double> v; // row-major n_gt x n_det

    double at(int gt, int det) const { return v[static_cast<std::size_t>(gt) * n_det + det]; }
    double row_max(int gt) const;
    double col_max(int det) const;
};

IoUMatrix iou_matrix(std::span<const BoundingBox> gt, std::span<const BoundingBox> detections);

struct MatchCounts {
    int n_true = 0;  // ground-truth boxes whose best IoU exceeds theta
    int n_false = 0; // detections whose best IoU is below theta
};

// Strict comparisons on both sides: a box whose best IoU equals theta exactly
// is neither detected nor false.
MatchCounts count_matches(const IoUMatrix& m, double theta);

struct EvalResult {
    double theta = 0.0;
    int n_gt = 0;
    int n_det = 0;
    int n_true = 0;
    int n_false = 0;
    double p_d = 0.0;     // n_true / n_gt, 0 when n_gt == 0
    double p_fa = 0.0;    // n_false / n_det, 0 when n_det == 0
    double mean_iou = 0.0; // mean over ground truth of its best IoU (0 if unmatched)
};

EvalResult evaluate(const IoUMatrix& m, double theta);
EvalResult evaluate(std::span<const BoundingBox> gt, std::span<const BoundingBox> detections,
                    double theta);

// evaluate() at each theta, reusing one IoU matrix. mean_iou is
// theta-independent and identical across rows.
std::vector<EvalResult> sweep(std::span<const BoundingBox> gt,
                              std::span<const BoundingBox> detections,
                              std::span<const double> thetas);

} // namespace specsense::metrics
