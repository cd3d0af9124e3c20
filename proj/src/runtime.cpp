#include "specsense/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

#ifdef __linux__
#include <sys/resource.h>
#include <sys/syscall.h>
#include <unistd.h>
#endif

namespace specsense::runtime {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Raises the calling thread's nice value so latency-critical threads win the
// CPU when cores are scarce. Raising nice needs no privileges; failure is
// harmless and ignored.
void lower_thread_priority() {
#ifdef __linux__
    const pid_t tid = static_cast<pid_t>(syscall(SYS_gettid));
    (void)setpriority(PRIO_PROCESS, static_cast<id_t>(tid), 10);
#endif
}

template <typename T>
class BoundedQueue {
  public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

    bool push(T v) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) return false;
        items_.push_back(std::move(v));
        not_empty_.notify_one();
        return true;
    }

    bool try_push(T v) {
        std::lock_guard lock(mutex_);
        if (closed_ || items_.size() >= capacity_) return false;
        items_.push_back(std::move(v));
        not_empty_.notify_one();
        return true;
    }

    bool pop(T& out) {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return false; // closed and drained
        out = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return true;
    }

    template <typename Rep, typename Period>
    bool pop_for(T& out, std::chrono::duration<Rep, Period> timeout) {
        std::unique_lock lock(mutex_);
        if (!not_empty_.wait_for(lock, timeout, [&] { return !items_.empty() || closed_; }))
            return false;
        if (items_.empty()) return false;
        out = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return true;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_full_.notify_all();
        not_empty_.notify_all();
    }

  private:
    std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    std::size_t capacity_;
    bool closed_ = false;
};

struct ErrorFlag {
    std::mutex mutex;
    std::string message;
    std::atomic<bool> raised{false};

    void capture(const char* where, const std::exception& e) {
        std::lock_guard lock(mutex);
        if (!raised.load()) {
            message = std::string(where) + ": " + e.what();
            raised.store(true);
        }
    }

    std::string take() {
        std::lock_guard lock(mutex);
        return message;
    }
};

} // namespace

void RuntimeConfig::validate() const {
    if (n_compute_workers < 1) throw ValidationError("n_compute_workers must be >= 1");
    if (n_sensing_workers < 1) throw ValidationError("n_sensing_workers must be >= 1");
    if (halo_bins < 3) throw ValidationError("halo_bins must be >= 3");
    if (chunk_queue_capacity < 0) throw ValidationError("chunk_queue_capacity must be >= 0");
    if (deadline_s < 0.0) throw ValidationError("deadline_s must be >= 0");
}

std::vector<Slab> partition(int n_cols, int n_slabs, int halo) {
    if (n_slabs < 1 || n_slabs > n_cols)
        throw ValidationError("n_slabs must be in [1, n_cols]");
    if (halo < 3) throw ValidationError("halo must be >= 3");
    std::vector<Slab> slabs(static_cast<std::size_t>(n_slabs));
    const int base = n_cols / n_slabs;
    const int rem = n_cols % n_slabs;
    int begin = 0;
    for (int i = 0; i < n_slabs; ++i) {
        const int width = base + (i < rem ? 1 : 0);
        Slab& s = slabs[static_cast<std::size_t>(i)];
        s.core_begin = begin;
        s.core_end = begin + width;
        s.ext_begin = std::max(0, s.core_begin - halo);
        s.ext_end = std::min(n_cols, s.core_end + halo);
        begin = s.core_end;
    }
    return slabs;
}

detector::Mask consolidate_sliced(const detector::Mask& mask, int n_slabs, int halo,
                                  bool one_d_opening_along_time) {
    const auto slabs = partition(mask.cols, n_slabs, halo);
    const detector::StructuringElement line =
        one_d_opening_along_time ? detector::StructuringElement{3, 1}
                                 : detector::StructuringElement{1, 3};
    const std::pair<detector::MorphOp, detector::StructuringElement> rounds[3] = {
        {detector::MorphOp::Close, {3, 3}},
        {detector::MorphOp::Open, {3, 3}},
        {detector::MorphOp::Open, line},
    };

    detector::Mask src = mask;
    detector::Mask dst(mask.rows, mask.cols);
    detector::MorphScratch scratch;
    for (const auto& [op, se] : rounds) {
        for (const Slab& slab : slabs)
            detector::morphology_cols(src, dst, op, se, slab.core_begin, slab.core_end, scratch);
        std::swap(src, dst);
    }
    return src;
}

double nearest_rank(std::span<const double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const auto n = static_cast<long long>(sorted.size());
    long long rank = static_cast<long long>(std::ceil(q * static_cast<double>(n)));
    rank = std::clamp<long long>(rank, 1, n);
    return sorted[static_cast<std::size_t>(rank - 1)];
}

RunReport summarize(std::vector<PlotRecord> records, std::uint64_t overruns, double deadline_s) {
    RunReport report;
    std::sort(records.begin(), records.end(),
              [](const PlotRecord& a, const PlotRecord& b) { return a.plot_index < b.plot_index; });
    report.records = std::move(records);
    report.plots = report.records.size();
    report.overruns = overruns;
    report.deadline_s = deadline_s;

    if (!report.records.empty()) {
        std::vector<double> lat;
        lat.reserve(report.records.size());
        std::uint64_t met = 0;
        for (const PlotRecord& r : report.records) {
            lat.push_back(r.latency_s);
            if (r.met) ++met;
        }
        std::sort(lat.begin(), lat.end());
        report.fraction_met = static_cast<double>(met) / static_cast<double>(lat.size());
        report.p50_s = nearest_rank(lat, 0.50);
        report.p90_s = nearest_rank(lat, 0.90);
        report.p99_s = nearest_rank(lat, 0.99);
        report.max_s = lat.back();
        report.percentiles_valid = lat.size() >= 100;
    }
    report.realtime_met = report.fraction_met >= 0.99;
    return report;
}

std::vector<std::pair<double, double>> RunReport::ccdf() const {
    std::vector<double> lat;
    lat.reserve(records.size());
    for (const PlotRecord& r : records) lat.push_back(r.latency_s);
    std::sort(lat.begin(), lat.end());
    std::vector<std::pair<double, double>> points;
    const double n = static_cast<double>(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) {
        if (i + 1 < lat.size() && lat[i + 1] == lat[i]) continue; // keep last duplicate
        points.emplace_back(lat[i], static_cast<double>(lat.size() - (i + 1)) / n);
    }
    return points;
}

RunReport run(frontend::ChunkSource& source, const frontend::FrontendConfig& frontend_config,
              const detector::DetectorConfig& detector_config,
              const RuntimeConfig& runtime_config, const DetectionHandler& on_detections) {
    frontend_config.validate();
    detector_config.validate(frontend_config.n_fft);
    runtime_config.validate();

    const int t_rows = frontend_config.plot_rows;
    const int f_bins = frontend_config.n_fft;
    const auto slabs = partition(f_bins, runtime_config.n_sensing_workers, runtime_config.halo_bins);
    const int n_slabs = static_cast<int>(slabs.size());
    const double deadline_s =
        runtime_config.deadline_s > 0.0 ? runtime_config.deadline_s : frontend_config.plot_span_s();

    const std::size_t chunk_cap =
        runtime_config.chunk_queue_capacity > 0
            ? static_cast<std::size_t>(runtime_config.chunk_queue_capacity)
            : std::clamp<std::size_t>(2 * static_cast<std::size_t>(t_rows), 64, 8192);

    struct BankEvent {
        int bank = 0;
        frontend::TFPlotView view;
        Clock::time_point completed_at;
    };

    // One plot is sensed at a time; workers share this context across phases.
    struct SenseJob {
        frontend::TFPlotView view;
        detector::PsdProfile psd;
        std::vector<int> active_columns;
        detector::Mask mask_a;
        detector::Mask mask_b;
        std::vector<detector::StageTimes> slab_times;
    };

    ErrorFlag error;
    BoundedQueue<frontend::IQChunk> chunk_queue(chunk_cap);
    BoundedQueue<BankEvent> bank_queue(4);
    BoundedQueue<TaskMessage> sense_tasks(static_cast<std::size_t>(2 * n_slabs + 4));
    BoundedQueue<TaskMessage> sense_done(static_cast<std::size_t>(2 * n_slabs + 4));

    frontend::PingPongBuffer buffer(frontend_config, [&](int bank, const frontend::TFPlotView& view) {
        bank_queue.push({bank, view, Clock::now()});
    });

    SenseJob job;
    job.psd.raw.assign(static_cast<std::size_t>(f_bins), 0.0f);
    job.active_columns.reserve(static_cast<std::size_t>(f_bins));
    job.mask_a = detector::Mask(t_rows, f_bins);
    job.mask_b = detector::Mask(t_rows, f_bins);
    job.slab_times.assign(static_cast<std::size_t>(n_slabs), {});

    std::atomic<std::uint64_t> total_rows{0};
    std::atomic<bool> ingest_done{false};
    const bool paced = source.paced();

    const auto wall_t0 = Clock::now();

    // Ingest: pulls chunks in stream order. Paced sources shed to the buffer's
    // overrun accounting instead of blocking.
    std::thread ingest([&] {
        std::uint64_t expected = 0;
        try {
            frontend::IQChunk chunk;
            while (!error.raised.load(std::memory_order_relaxed) && source.next(chunk)) {
                if (chunk.seq > expected) buffer.mark_lost_range(expected, chunk.seq);
                expected = chunk.seq + 1;
                const std::uint64_t seq = chunk.seq;
                if (paced) {
                    if (!chunk_queue.try_push(std::move(chunk)))
                        buffer.mark_lost_range(seq, seq + 1);
                } else {
                    if (!chunk_queue.push(std::move(chunk))) break;
                }
            }
        } catch (const std::exception& e) {
            error.capture("ingest", e);
        }
        total_rows.store(expected);
        ingest_done.store(true);
        chunk_queue.close();
    });

    // Compute workers: FFT each chunk row straight into its bank slot. FFT
    // work has a full window span of slack before its bank is due, while the
    // sensing burst after a bank completes is the latency-critical path, so
    // compute threads run at a lower scheduling priority and yield the CPU to
    // sensing whenever both are runnable. Paced sources shed rows when a bank
    // is still held; unpaced sources block on it (back-pressure, no loss).
    std::vector<double> fft_seconds(static_cast<std::size_t>(runtime_config.n_compute_workers), 0.0);
    std::vector<std::thread> compute;
    compute.reserve(static_cast<std::size_t>(runtime_config.n_compute_workers));
    for (int w = 0; w < runtime_config.n_compute_workers; ++w) {
        compute.emplace_back([&, w] {
            lower_thread_priority();
            double local_fft = 0.0;
            try {
                frontend::IQChunk chunk;
                while (chunk_queue.pop(chunk)) {
                    float* slot = paced ? buffer.row_slot(chunk.seq)
                                        : buffer.row_slot_blocking(chunk.seq);
                    if (!slot) continue;
                    const auto t0 = Clock::now();
                    frontend::fft_row(chunk.samples, {slot, static_cast<std::size_t>(f_bins)});
                    local_fft += seconds_since(t0);
                    buffer.commit_row(chunk.seq);
                }
            } catch (const std::exception& e) {
                error.capture("compute worker", e);
            }
            fft_seconds[static_cast<std::size_t>(w)] = local_fft;
        });
    }

    // Sensing workers: execute one slab phase per task. Masks are shared
    // whole-image buffers; each phase writes only its slab's core columns, so
    // concurrent slabs touch disjoint bytes, and reads outside the core see
    // the previous phase's fully stitched result.
    std::vector<std::thread> sensing;
    sensing.reserve(static_cast<std::size_t>(runtime_config.n_sensing_workers));
    for (int w = 0; w < runtime_config.n_sensing_workers; ++w) {
        sensing.emplace_back([&] {
            detector::MorphScratch scratch;
            try {
                TaskMessage msg;
                while (sense_tasks.pop(msg)) {
                    const Slab& slab = slabs[static_cast<std::size_t>(msg.slab)];
                    detector::StageTimes& times = job.slab_times[static_cast<std::size_t>(msg.slab)];
                    const auto t0 = Clock::now();
                    switch (msg.phase) {
                    case 0: // PSD partial sums on core columns
                        detector::estimate_psd_into(job.view, slab.core_begin, slab.core_end,
                                                    job.psd.raw.data() + slab.core_begin);
                        times.psd += seconds_since(t0);
                        break;
                    case 1: // per-column Otsu on active core columns
                        detector::binarize_columns(job.view, job.active_columns, slab.core_begin,
                                                   slab.core_end, job.mask_a);
                        times.binarize += seconds_since(t0);
                        break;
                    case 2:
                        detector::morphology_cols(job.mask_a, job.mask_b, detector::MorphOp::Close,
                                                  {3, 3}, slab.core_begin, slab.core_end, scratch);
                        times.morphology += seconds_since(t0);
                        break;
                    case 3:
                        detector::morphology_cols(job.mask_b, job.mask_a, detector::MorphOp::Open,
                                                  {3, 3}, slab.core_begin, slab.core_end, scratch);
                        times.morphology += seconds_since(t0);
                        break;
                    case 4: {
                        const detector::StructuringElement line =
                            detector_config.one_d_opening_along_time
                                ? detector::StructuringElement{3, 1}
                                : detector::StructuringElement{1, 3};
                        detector::morphology_cols(job.mask_a, job.mask_b, detector::MorphOp::Open,
                                                  line, slab.core_begin, slab.core_end, scratch);
                        times.morphology += seconds_since(t0);
                        break;
                    }
                    default: break;
                    }
                    msg.kind = TaskKind::SenseDone;
                    sense_done.push(msg);
                }
            } catch (const std::exception& e) {
                error.capture("sensing worker", e);
            }
        });
    }

    // Manager: drives the five slab phases per completed bank, then labels
    // the stitched mask and emits boxes.
    std::vector<PlotRecord> records;
    detector::StageTimes stage_totals;
    std::uint64_t plots_processed = 0;

    auto run_phase = [&](int phase, std::uint64_t window, int bank) -> bool {
        for (int s = 0; s < n_slabs; ++s) {
            TaskMessage msg{TaskKind::SenseTask, window, bank, s, phase};
            if (!sense_tasks.push(std::move(msg))) return false;
        }
        int done = 0;
        TaskMessage msg;
        while (done < n_slabs) {
            if (error.raised.load(std::memory_order_relaxed)) return false;
            if (sense_done.pop_for(msg, std::chrono::milliseconds(50))) ++done;
        }
        return true;
    };

    try {
        BankEvent ev;
        for (;;) {
            if (error.raised.load(std::memory_order_relaxed)) break;
            if (!bank_queue.pop_for(ev, std::chrono::milliseconds(20))) {
                if (ingest_done.load() && buffer.rows_retired() == total_rows.load() &&
                    buffer.windows_completed() == plots_processed)
                    break;
                continue;
            }

            const std::uint64_t window = ev.view.start_seq / static_cast<std::uint64_t>(t_rows);
            job.view = ev.view;
            for (auto& t : job.slab_times) t = {};

            if (!run_phase(0, window, ev.bank)) break;

            auto t0 = Clock::now();
            detector::smooth_and_floor(job.psd, detector_config);
            job.active_columns = detector::prune_columns(job.psd);
            const double floor_s = seconds_since(t0);

            bool ok = true;
            for (int phase = 1; phase <= 4 && ok; ++phase) ok = run_phase(phase, window, ev.bank);
            if (!ok) break;

            t0 = Clock::now();
            const std::vector<detector::ComponentExtent> extents =
                detector::component_extents(job.mask_b, detector_config.min_component_area);
            std::vector<BoundingBox> boxes;
            boxes.reserve(extents.size());
            for (const detector::ComponentExtent& e : extents)
                boxes.push_back(
                    detector::bin_box_to_physical(detector::extent_to_bin_box(e), job.view));
            const double label_s = seconds_since(t0);

            PlotRecord record;
            record.plot_index = window;
            record.start_seq = ev.view.start_seq;
            record.latency_s = seconds_since(ev.completed_at);
            record.deadline_s = deadline_s;
            record.met = record.latency_s <= deadline_s;
            record.n_boxes = static_cast<int>(boxes.size());
            records.push_back(record);

            for (const detector::StageTimes& t : job.slab_times) stage_totals += t;
            stage_totals.floor_prune += floor_s;
            stage_totals.label += label_s;

            if (on_detections) on_detections(record, boxes);
            buffer.release(ev.bank);
            ++plots_processed;
        }
    } catch (const std::exception& e) {
        error.capture("manager", e);
    }

    chunk_queue.close();
    sense_tasks.close();
    sense_done.close();
    bank_queue.close();
    buffer.shutdown();
    ingest.join();
    for (auto& t : compute) t.join();
    for (auto& t : sensing) t.join();

    if (error.raised.load()) throw Error("engine aborted, " + error.take());

    RunReport report = summarize(std::move(records), buffer.overruns(), deadline_s);
    report.stage_totals = stage_totals;
    double fft_total = 0.0;
    for (double s : fft_seconds) fft_total += s;
    report.fft_time_s = fft_total;
    report.wall_time_s = seconds_since(wall_t0);
    return report;
}

} // namespace specsense::runtime
