#pragma once

#include "specsense/frontend.hpp"
#include "specsense/types.hpp"

#include <optional>
#include <span>

namespace specsense::detector {

struct DetectorConfig {
    int savgol_window = 31; // odd, >= 5
    int savgol_order = 3;   // >= 1, < savgol_window
    double psd_margin_db = 3.0;
    int min_component_area = 4;
    // The 1x3 opening that clears residual speckle runs along the frequency
    // axis by default; set true to run it along time (3x1) instead.
    bool one_d_opening_along_time = false;

    // Throws ValidationError on bad window/order combinations or a window
    // larger than the spectrum (n_cols).
    void validate(int n_cols) const;
};

// Column power profile of one plot plus the derived noise floor.
struct PsdProfile {
    std::vector<float> raw;      // mean |X|^2 per column
    std::vector<float> smoothed; // raw Savitzky-Golay smoothed on the dB scale, stored linear
    float noise_floor = 0.0f;    // lowest local minimum of smoothed
    float threshold = 0.0f;      // noise_floor * 10^(psd_margin_db/10)
};

// Binary TF mask, row-major, one byte per cell (0 background, 1 foreground).
struct Mask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> v;

    Mask() = default;
    Mask(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0) {}
    std::uint8_t* row(int t) { return v.data() + static_cast<std::size_t>(t) * cols; }
    const std::uint8_t* row(int t) const { return v.data() + static_cast<std::size_t>(t) * cols; }
    std::uint8_t at(int t, int f) const { return row(t)[f]; }
    void set(int t, int f, std::uint8_t val) { row(t)[f] = val; }
    bool operator==(const Mask& other) const = default;
};

// All-ones rectangular structuring element, odd dimensions.
struct StructuringElement {
    int rows = 1;
    int cols = 1;
};

enum class MorphOp { Erode, Dilate, Open, Close };

// Mean |X|^2 over rows, per column.
std::vector<float> estimate_psd(const frontend::TFPlotView& plot);

// Column-range form backing the slab-parallel runtime; writes the per-column
// means for [col_begin, col_end) into out[0..col_end-col_begin). Identical
// arithmetic to estimate_psd.
void estimate_psd_into(const frontend::TFPlotView& plot, int col_begin, int col_end, float* out);

// Savitzky-Golay smoothing with mirror padding (reflect without repeating
// the edge sample). window odd, order < window.
std::vector<float> savgol_smooth(std::span<const float> values, int window, int order);

// Fills smoothed/noise_floor/threshold from profile.raw. The floor is the
// lowest strict local minimum of the smoothed curve (plateaus count once, at
// their first index); if none exists, the global minimum.
void smooth_and_floor(PsdProfile& profile, const DetectorConfig& config);

// Indices of columns whose raw PSD reaches the threshold (raw >= threshold).
std::vector<int> prune_columns(const PsdProfile& profile);

struct OtsuResult {
    bool valid = false;     // false when the column is constant
    float threshold = 0.0f; // foreground = value > threshold
};

// Otsu threshold over a 256-bin histogram spanning [min, max] of the values.
// Maximizes between-class variance; ties resolve to the lowest threshold.
OtsuResult otsu_threshold(std::span<const float> values);

// Per-column Otsu over the active columns only. Inactive or constant columns
// come out all background.
Mask binarize(const frontend::TFPlotView& plot, std::span<const int> active_columns);

// Column-range form backing the slab-parallel runtime: writes columns
// [col_begin, col_end) of every row of out (which must already have the
// plot's shape), leaving other columns untouched. Per-column output is
// identical to binarize(); active_columns indices are plot-wide.
void binarize_columns(const frontend::TFPlotView& plot, std::span<const int> active_columns,
                      int col_begin, int col_end, Mask& out);

// Binary morphology with clipped neighborhoods (out-of-image = background).
Mask morphology(const Mask& mask, MorphOp op, StructuringElement se);

// Reusable buffers for the allocation-free morphology form below.
struct MorphScratch {
    Mask a;
    Mask b;
};

// Computes columns [col_begin, col_end) of morphology(src, op, se) into the
// same columns of dst, leaving other dst columns untouched. src must be
// valid on [col_begin - h, col_end + h) where h is the op's total horizontal
// radius (2 for open/close with a 3-wide SE); ranges are clamped to the
// image, where clipping applies as usual. dst must match src's shape and not
// alias it. Safe to run concurrently on disjoint column ranges of one dst.
void morphology_cols(const Mask& src, Mask& dst, MorphOp op, StructuringElement se,
                     int col_begin, int col_end, MorphScratch& scratch);

// Fixed cleanup chain: close 3x3, open 3x3, then the 1x3 opening
// (orientation per the flag).
Mask consolidate(const Mask& mask, bool one_d_opening_along_time = false);

struct ComponentExtent {
    int min_t = 0, max_t = 0; // inclusive bin extents
    int min_f = 0, max_f = 0;
    long long area = 0;
};

struct LabeledComponents {
    int rows = 0, cols = 0;
    std::vector<std::int32_t> labels; // 0 = background, components numbered from 1
    std::vector<ComponentExtent> extents; // extents[i] is component i+1
};

// 4-connected components with area >= min_component_area; smaller ones are
// relabeled to background. Component ids are dense, ordered by first
// (row-major) foreground pixel.
LabeledComponents label_components(const Mask& mask, int min_component_area);

// Same components in the same order, skipping the label image. This is the
// runtime's hot path; label_components(mask, n).extents is always identical.
std::vector<ComponentExtent> component_extents(const Mask& mask, int min_component_area);

// Half-open bin box from an inclusive extent.
BinBox extent_to_bin_box(const ComponentExtent& e);

// Physical box for a bin box of `plot`: f = (k - F/2) * df, t = (start_seq + r) * dt,
// upper edges one bin past the extent.
BoundingBox bin_box_to_physical(const BinBox& b, const frontend::TFPlotView& plot);

// Wall-time spent in each stage of one detect() call, seconds. Under the
// parallel runtime the per-stage numbers are summed across workers.
struct StageTimes {
    double psd = 0.0;
    double floor_prune = 0.0;
    double binarize = 0.0;
    double morphology = 0.0;
    double label = 0.0;

    double total() const { return psd + floor_prune + binarize + morphology + label; }
    StageTimes& operator+=(const StageTimes& o);
};

struct Detections {
    std::vector<BoundingBox> boxes;
    std::vector<BinBox> bin_boxes;
    PsdProfile psd;
    std::vector<int> active_columns;
};

// Full single-threaded pipeline on one plot:
// PSD -> floor -> prune -> per-column Otsu -> consolidate -> label -> boxes.
Detections detect(const frontend::TFPlotView& plot, const DetectorConfig& config,
                  StageTimes* times = nullptr);

} // namespace specsense::detector
