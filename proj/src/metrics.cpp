#include "specsense/metrics.hpp"

#include <algorithm>

namespace specsense::metrics {

double iou(const BoundingBox& a, const BoundingBox& b) {
    const double area_a = a.area();
    const double area_b = b.area();
    if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
    const double fi = std::max(0.0, std::min(a.f1_hz, b.f1_hz) - std::max(a.f0_hz, b.f0_hz));
    const double ti = std::max(0.0, std::min(a.t1_s, b.t1_s) - std::max(a.t0_s, b.t0_s));
    const double inter = fi * ti;
    return inter / (area_a + area_b - inter);
}

double IoUMatrix::row_max(int gt) const {
    double best = 0.0;
    for (int d = 0; d < n_det; ++d) best = std::max(best, at(gt, d));
    return best;
}

double IoUMatrix::col_max(int det) const {
    double best = 0.0;
    for (int g = 0; g < n_gt; ++g) best = std::max(best, at(g, det));
    return best;
}

IoUMatrix iou_matrix(std::span<const BoundingBox> gt, std::span<const BoundingBox> detections) {
    IoUMatrix m;
    m.n_gt = static_cast<int>(gt.size());
    m.n_det = static_cast<int>(detections.size());
    m.v.resize(static_cast<std::size_t>(m.n_gt) * m.n_det);
    for (int g = 0; g < m.n_gt; ++g)
        for (int d = 0; d < m.n_det; ++d)
            m.v[static_cast<std::size_t>(g) * m.n_det + d] =
                iou(gt[static_cast<std::size_t>(g)], detections[static_cast<std::size_t>(d)]);
    return m;
}

MatchCounts count_matches(const IoUMatrix& m, double theta) {
    MatchCounts c;
    for (int g = 0; g < m.n_gt; ++g)
        if (m.row_max(g) > theta) ++c.n_true;
    for (int d = 0; d < m.n_det; ++d)
        if (m.col_max(d) < theta) ++c.n_false;
    return c;
}

EvalResult evaluate(const IoUMatrix& m, double theta) {
    const MatchCounts c = count_matches(m, theta);
    EvalResult r;
    r.theta = theta;
    r.n_gt = m.n_gt;
    r.n_det = m.n_det;
    r.n_true = c.n_true;
    r.n_false = c.n_false;
    r.p_d = m.n_gt > 0 ? static_cast<double>(c.n_true) / m.n_gt : 0.0;
    r.p_fa = m.n_det > 0 ? static_cast<double>(c.n_false) / m.n_det : 0.0;
    double iou_sum = 0.0;
    for (int g = 0; g < m.n_gt; ++g) iou_sum += m.row_max(g);
    r.mean_iou = m.n_gt > 0 ? iou_sum / m.n_gt : 0.0;
    return r;
}

EvalResult evaluate(std::span<const BoundingBox> gt, std::span<const BoundingBox> detections,
                    double theta) {
    return evaluate(iou_matrix(gt, detections), theta);
}

std::vector<EvalResult> sweep(std::span<const BoundingBox> gt,
                              std::span<const BoundingBox> detections,
                              std::span<const double> thetas) {
    const IoUMatrix m = iou_matrix(gt, detections);
    std::vector<EvalResult> out;
    out.reserve(thetas.size());
    for (double theta : thetas) out.push_back(evaluate(m, theta));
    return out;
}

} // namespace specsense::metrics
