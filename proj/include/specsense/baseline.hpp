#pragma once

#include "specsense/detector.hpp"
#include "specsense/frontend.hpp"
#include "specsense/metrics.hpp"
#include "specsense/types.hpp"

#include <span>
#include <string>

namespace specsense::baseline {

// Reference detector: dyadic mean-filter bank (all-ones kernels 2^i x 2^j)
// over the power plot, threshold against the noise floor, then grow each
// seed box outward while the next edge strip keeps comparable power.
struct BaselineConfig {
    double conv_threshold = 2.0;        // kernel mean > conv_threshold * floor seeds a box
    double rate_change_threshold = 0.5; // expansion continues while strip mean >= this * box mean
    double noise_offset_db = 3.0;       // added to the detector-style floor estimate
    int max_kernel_rows = 0;            // 0 = up to the plot height
    int max_kernel_cols = 0;            // 0 = up to the plot width

    void validate() const;
};

// Kernel side lengths used for a T x F plot: powers of two up to the plot
// (or the configured caps). Size = (floor(log2 T)+1) * (floor(log2 F)+1).
std::vector<std::pair<int, int>> kernel_sizes(int rows, int cols, const BaselineConfig& config = {});

std::vector<BoundingBox> baseline_detect(const frontend::TFPlotView& plot,
                                         const BaselineConfig& config = {});

struct CompareRow {
    std::string detector;
    double mean_latency_s = 0.0;
    double p_d = 0.0;
    double p_fa = 0.0;
    double mean_iou = 0.0;
};

struct Comparison {
    std::vector<CompareRow> rows; // pipeline first, baseline second
    double speedup = 0.0;         // baseline mean latency / pipeline mean latency
};

// Builds one table row from per-plot detections already in hand (shared by
// compare(); exposed so rows can be checked without timing noise).
CompareRow make_compare_row(const std::string& name,
                            std::span<const std::vector<BoundingBox>> detections_per_plot,
                            std::span<const std::vector<BoundingBox>> truth_per_plot,
                            double theta, double mean_latency_s);

// Runs both detectors single-threaded over the same plots and evaluates both
// against the same ground truth at theta.
Comparison compare(std::span<const frontend::TFPlotView> plots,
                   std::span<const std::vector<BoundingBox>> truth_per_plot,
                   const detector::DetectorConfig& detector_config,
                   const BaselineConfig& baseline_config, double theta);

} // namespace specsense::baseline
