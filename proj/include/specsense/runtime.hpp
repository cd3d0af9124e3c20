#pragma once

#include "specsense/detector.hpp"
#include "specsense/frontend.hpp"
#include "specsense/types.hpp"

#include <functional>
#include <span>
#include <utility>

namespace specsense::runtime {

struct RuntimeConfig {
    int n_compute_workers = 1; // FFT/row threads
    int n_sensing_workers = 1; // slab threads
    int halo_bins = 4;         // slab overlap; must cover the consolidate radius (3)
    int chunk_queue_capacity = 0; // 0 = auto (2 * plot_rows, clamped to [64, 8192])
    double deadline_s = 0.0;      // 0 = plot span (T * dt)

    // Throws ValidationError on non-positive worker counts, halo_bins < 3,
    // or a negative deadline.
    void validate() const;
};

// One worker's share of the spectrum: [core_begin, core_end) is owned
// exclusively; [ext_begin, ext_end) adds halo columns on each side so
// morphology is exact on the core.
struct Slab {
    int core_begin = 0;
    int core_end = 0;
    int ext_begin = 0;
    int ext_end = 0;

    int core_width() const { return core_end - core_begin; }
    int ext_width() const { return ext_end - ext_begin; }
};

// Balanced column partition: cores tile [0, n_cols) exactly, widths differ by
// at most one; extended ranges clamp core +/- halo to the image.
// Requires 1 <= n_slabs <= n_cols and halo >= 3 (ValidationError otherwise).
std::vector<Slab> partition(int n_cols, int n_slabs, int halo);

// Slab-parallel equivalent of detector::consolidate, bit-exact for any slab
// count: the three morphology operations run as separate rounds with the
// stitched mask re-shared in between, so each round's column dependency
// radius (2, one dilate plus one erode) stays inside the halo.
detector::Mask consolidate_sliced(const detector::Mask& mask, int n_slabs, int halo,
                                  bool one_d_opening_along_time = false);

// Manager/worker traffic. Task queues flow manager -> workers, completion
// queues worker -> manager; ids are unique per TF window.
enum class TaskKind { RxComplete, FftTask, FftDone, SenseTask, SenseDone };

struct TaskMessage {
    TaskKind kind = TaskKind::RxComplete;
    std::uint64_t plot_index = 0; // window id
    int bank = 0;
    int slab = 0;
    int phase = 0; // sensing phase: 0 = PSD partials, 1 = binarize + consolidate
};

struct PlotRecord {
    std::uint64_t plot_index = 0;
    std::uint64_t start_seq = 0;
    double latency_s = 0.0; // bank complete -> boxes emitted
    double deadline_s = 0.0;
    bool met = false;
    int n_boxes = 0;
};

struct RunReport {
    std::vector<PlotRecord> records;
    std::uint64_t plots = 0;
    std::uint64_t overruns = 0; // TF windows dropped at the ping-pong buffer
    double deadline_s = 0.0;
    double fraction_met = 0.0;
    bool realtime_met = false; // fraction_met >= 0.99
    double p50_s = 0.0;
    double p90_s = 0.0;
    double p99_s = 0.0;
    double max_s = 0.0;
    bool percentiles_valid = false; // nearest-rank needs >= 100 samples
    detector::StageTimes stage_totals; // summed across sensing workers
    double fft_time_s = 0.0;           // summed across compute workers
    double wall_time_s = 0.0;

    // (latency_s, fraction of plots with latency strictly greater), one point
    // per distinct latency, ascending. Fractions are non-increasing.
    std::vector<std::pair<double, double>> ccdf() const;
};

// Nearest-rank percentile of an ascending-sorted sample: element at index
// ceil(q * n), 1-based, clamped to [1, n].
double nearest_rank(std::span<const double> sorted, double q);

// Pure aggregation step so reports can be built from scripted records.
RunReport summarize(std::vector<PlotRecord> records, std::uint64_t overruns,
                    double deadline_s);

using DetectionHandler =
    std::function<void(const PlotRecord& record, std::span<const BoundingBox> boxes)>;

// Runs the full pipeline: ingest -> FFT workers -> ping-pong banks ->
// slab-parallel sensing -> global labeling, until the source ends. Plots are
// sensed one at a time in window order; detections for each plot are handed
// to on_detections (may be null) before its bank is released. Worker
// exceptions abort the run and rethrow as Error.
RunReport run(frontend::ChunkSource& source, const frontend::FrontendConfig& frontend_config,
              const detector::DetectorConfig& detector_config, const RuntimeConfig& runtime_config,
              const DetectionHandler& on_detections = nullptr);

} // namespace specsense::runtime
