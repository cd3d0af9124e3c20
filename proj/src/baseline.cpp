#include "specsense/baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <tuple>
#include <vector>

namespace specsense::baseline {

namespace {

// Inclusive-exclusive integral image over cell powers |X|^2; sums of any
// rectangle come out in four lookups.
struct SummedArea {
    int rows = 0;
    int cols = 0;
    std::vector<double> s; // (rows+1) x (cols+1)

    explicit SummedArea(const frontend::TFPlotView& plot) : rows(plot.rows), cols(plot.cols) {
        s.assign(static_cast<std::size_t>(rows + 1) * (cols + 1), 0.0);
        for (int t = 0; t < rows; ++t) {
            const float* src = plot.row(t);
            double* cur = s.data() + static_cast<std::size_t>(t + 1) * (cols + 1);
            const double* prev = s.data() + static_cast<std::size_t>(t) * (cols + 1);
            double row_acc = 0.0;
            for (int f = 0; f < cols; ++f) {
                row_acc += static_cast<double>(src[f]) * src[f];
                cur[f + 1] = prev[f + 1] + row_acc;
            }
        }
    }

    // Sum over rows [t0, t1) x cols [f0, f1).
    double sum(int t0, int t1, int f0, int f1) const {
        const auto* p = s.data();
        const std::size_t w = static_cast<std::size_t>(cols + 1);
        return p[t1 * w + f1] - p[t0 * w + f1] - p[t1 * w + f0] + p[t0 * w + f0];
    }

    double mean(int t0, int t1, int f0, int f1) const {
        const long long n = static_cast<long long>(t1 - t0) * (f1 - f0);
        return sum(t0, t1, f0, f1) / static_cast<double>(n);
    }
};

struct Rect {
    int t0, t1, f0, f1; // half-open bins
};

bool overlaps(const Rect& a, const Rect& b) {
    return a.t0 < b.t1 && b.t0 < a.t1 && a.f0 < b.f1 && b.f0 < a.f1;
}

// Grows the box one bin per side while the newly exposed strip keeps at
// least rate_change_threshold of the current box mean.
Rect expand_box(Rect box, const SummedArea& sat, double rate_change_threshold) {
    bool grew = true;
    while (grew) {
        grew = false;
        double box_mean = sat.mean(box.t0, box.t1, box.f0, box.f1);
        const double need = rate_change_threshold * box_mean;
        if (box.t0 > 0 && sat.mean(box.t0 - 1, box.t0, box.f0, box.f1) >= need) {
            --box.t0;
            grew = true;
        }
        box_mean = sat.mean(box.t0, box.t1, box.f0, box.f1);
        if (box.t1 < sat.rows &&
            sat.mean(box.t1, box.t1 + 1, box.f0, box.f1) >= rate_change_threshold * box_mean) {
            ++box.t1;
            grew = true;
        }
        box_mean = sat.mean(box.t0, box.t1, box.f0, box.f1);
        if (box.f0 > 0 &&
            sat.mean(box.t0, box.t1, box.f0 - 1, box.f0) >= rate_change_threshold * box_mean) {
            --box.f0;
            grew = true;
        }
        box_mean = sat.mean(box.t0, box.t1, box.f0, box.f1);
        if (box.f1 < sat.cols &&
            sat.mean(box.t0, box.t1, box.f1, box.f1 + 1) >= rate_change_threshold * box_mean) {
            ++box.f1;
            grew = true;
        }
    }
    return box;
}

} // namespace

void BaselineConfig::validate() const {
    if (conv_threshold <= 0.0) throw ValidationError("conv_threshold must be > 0");
    if (rate_change_threshold <= 0.0) throw ValidationError("rate_change_threshold must be > 0");
    if (max_kernel_rows < 0 || max_kernel_cols < 0)
        throw ValidationError("kernel caps must be >= 0");
}

std::vector<std::pair<int, int>> kernel_sizes(int rows, int cols, const BaselineConfig& config) {
    config.validate();
    if (rows < 1 || cols < 1) throw ValidationError("plot must be non-empty");
    const int row_cap = config.max_kernel_rows > 0 ? std::min(config.max_kernel_rows, rows) : rows;
    const int col_cap = config.max_kernel_cols > 0 ? std::min(config.max_kernel_cols, cols) : cols;
    std::vector<std::pair<int, int>> sizes;
    for (int kr = 1; kr <= row_cap; kr *= 2)
        for (int kc = 1; kc <= col_cap; kc *= 2) sizes.emplace_back(kr, kc);
    return sizes;
}

std::vector<BoundingBox> baseline_detect(const frontend::TFPlotView& plot,
                                         const BaselineConfig& config) {
    config.validate();
    const int rows = plot.rows;
    const int cols = plot.cols;

    detector::DetectorConfig dc;
    dc.validate(cols);
    detector::PsdProfile profile;
    profile.raw = detector::estimate_psd(plot);
    detector::smooth_and_floor(profile, dc);
    const double floor_power =
        static_cast<double>(profile.noise_floor) * std::pow(10.0, config.noise_offset_db / 10.0);
    const double seed_threshold = config.conv_threshold * floor_power;

    const SummedArea sat(plot);
    detector::Mask covered(rows, cols);
    std::vector<Rect> boxes;

    for (const auto& [kr, kc] : kernel_sizes(rows, cols, config)) {
        const int rhalf_lo = (kr - 1) / 2, rhalf_hi = kr / 2;
        const int chalf_lo = (kc - 1) / 2, chalf_hi = kc / 2;
        for (int t = 0; t < rows; ++t) {
            const int t0 = std::max(0, t - rhalf_lo);
            const int t1 = std::min(rows, t + rhalf_hi + 1);
            const std::uint8_t* cov = covered.row(t);
            for (int f = 0; f < cols; ++f) {
                if (cov[f]) continue;
                const int f0 = std::max(0, f - chalf_lo);
                const int f1 = std::min(cols, f + chalf_hi + 1);
                if (sat.mean(t0, t1, f0, f1) <= seed_threshold) continue;
                const Rect box = expand_box({t0, t1, f0, f1}, sat, config.rate_change_threshold);
                boxes.push_back(box);
                for (int bt = box.t0; bt < box.t1; ++bt) {
                    std::uint8_t* crow = covered.row(bt);
                    std::fill(crow + box.f0, crow + box.f1, std::uint8_t{1});
                }
            }
        }
    }

    // Fold overlapping boxes into their common bounding rectangle until the
    // set is pairwise disjoint.
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i < boxes.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < boxes.size(); ++j) {
                if (!overlaps(boxes[i], boxes[j])) continue;
                boxes[i].t0 = std::min(boxes[i].t0, boxes[j].t0);
                boxes[i].t1 = std::max(boxes[i].t1, boxes[j].t1);
                boxes[i].f0 = std::min(boxes[i].f0, boxes[j].f0);
                boxes[i].f1 = std::max(boxes[i].f1, boxes[j].f1);
                boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
                merged = true;
                break;
            }
        }
    }

    std::sort(boxes.begin(), boxes.end(), [](const Rect& a, const Rect& b) {
        return std::tie(a.t0, a.f0, a.t1, a.f1) < std::tie(b.t0, b.f0, b.t1, b.f1);
    });
    std::vector<BoundingBox> out;
    out.reserve(boxes.size());
    for (const Rect& r : boxes)
        out.push_back(detector::bin_box_to_physical({r.t0, r.t1, r.f0, r.f1}, plot));
    return out;
}

CompareRow make_compare_row(const std::string& name,
                            std::span<const std::vector<BoundingBox>> detections_per_plot,
                            std::span<const std::vector<BoundingBox>> truth_per_plot,
                            double theta, double mean_latency_s) {
    if (detections_per_plot.size() != truth_per_plot.size())
        throw ValidationError("detections/truth plot counts differ");
    long long n_gt = 0, n_det = 0, n_true = 0, n_false = 0;
    double iou_sum = 0.0;
    for (std::size_t p = 0; p < truth_per_plot.size(); ++p) {
        const metrics::IoUMatrix m = metrics::iou_matrix(truth_per_plot[p], detections_per_plot[p]);
        const metrics::MatchCounts c = metrics::count_matches(m, theta);
        n_gt += m.n_gt;
        n_det += m.n_det;
        n_true += c.n_true;
        n_false += c.n_false;
        for (int g = 0; g < m.n_gt; ++g) iou_sum += m.row_max(g);
    }
    CompareRow row;
    row.detector = name;
    row.mean_latency_s = mean_latency_s;
    row.p_d = n_gt > 0 ? static_cast<double>(n_true) / static_cast<double>(n_gt) : 0.0;
    row.p_fa = n_det > 0 ? static_cast<double>(n_false) / static_cast<double>(n_det) : 0.0;
    row.mean_iou = n_gt > 0 ? iou_sum / static_cast<double>(n_gt) : 0.0;
    return row;
}

Comparison compare(std::span<const frontend::TFPlotView> plots,
                   std::span<const std::vector<BoundingBox>> truth_per_plot,
                   const detector::DetectorConfig& detector_config,
                   const BaselineConfig& baseline_config, double theta) {
    if (plots.size() != truth_per_plot.size())
        throw ValidationError("plots/truth counts differ");
    if (plots.empty()) throw ValidationError("compare needs at least one plot");

    using Clock = std::chrono::steady_clock;
    std::vector<std::vector<BoundingBox>> pipe_boxes(plots.size());
    std::vector<std::vector<BoundingBox>> base_boxes(plots.size());
    double pipe_s = 0.0, base_s = 0.0;
    for (std::size_t p = 0; p < plots.size(); ++p) {
        auto t0 = Clock::now();
        pipe_boxes[p] = detector::detect(plots[p], detector_config).boxes;
        pipe_s += std::chrono::duration<double>(Clock::now() - t0).count();
        t0 = Clock::now();
        base_boxes[p] = baseline_detect(plots[p], baseline_config);
        base_s += std::chrono::duration<double>(Clock::now() - t0).count();
    }
    const double n = static_cast<double>(plots.size());

    Comparison cmp;
    cmp.rows.push_back(make_compare_row("pipeline", pipe_boxes, truth_per_plot, theta, pipe_s / n));
    cmp.rows.push_back(make_compare_row("baseline", base_boxes, truth_per_plot, theta, base_s / n));
    cmp.speedup = pipe_s > 0.0 ? base_s / pipe_s : 0.0;
    return cmp;
}

} // namespace specsense::baseline
