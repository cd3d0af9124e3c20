#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "specsense/detector.hpp"
#include "specsense/frontend.hpp"
#include "specsense/runtime.hpp"
#include "specsense/signals.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <thread>
#include <vector>

using namespace specsense;
using detector::Mask;
using runtime::PlotRecord;
using runtime::RunReport;
using runtime::RuntimeConfig;
using runtime::Slab;

namespace {

signals::Synthesis burst_synthesis(double duration_s, unsigned seed) {
    signals::Scenario sc;
    sc.sample_rate_hz = 1e6;
    sc.duration_s = duration_s;
    sc.noise_power = 1.0;
    sc.seed = seed;

    signals::SignalSpec a;
    a.kind = signals::SignalKind::ToneBurst;
    a.center_freq_hz = -180e3;
    a.bandwidth_hz = 20e3;
    a.t_start_s = 0.002;
    a.duration_s = duration_s * 0.6;
    a.power = 1.0;
    sc.signals.push_back(a);

    signals::SignalSpec b;
    b.kind = signals::SignalKind::OfdmLike;
    b.center_freq_hz = 150e3;
    b.bandwidth_hz = 120e3;
    b.t_start_s = duration_s * 0.25;
    b.duration_s = duration_s * 0.5;
    b.power = 1.0;
    sc.signals.push_back(b);

    return signals::synthesize(signals::with_snr(sc, 18.0));
}

using BoxesByPlot = std::map<std::uint64_t, std::vector<BoundingBox>>;

BoxesByPlot run_collect(const std::vector<cfloat>& samples, const frontend::FrontendConfig& fc,
                        const RuntimeConfig& rc, RunReport* report_out = nullptr) {
    frontend::MemorySource source(samples, fc.n_fft);
    BoxesByPlot by_plot;
    const RunReport report = runtime::run(
        source, fc, detector::DetectorConfig{}, rc,
        [&](const PlotRecord& record, std::span<const BoundingBox> boxes) {
            by_plot[record.plot_index].assign(boxes.begin(), boxes.end());
        });
    if (report_out) *report_out = report;
    return by_plot;
}

bool same_boxes(const std::vector<BoundingBox>& a, const std::vector<BoundingBox>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].t0_s != b[i].t0_s || a[i].t1_s != b[i].t1_s || a[i].f0_hz != b[i].f0_hz ||
            a[i].f1_hz != b[i].f1_hz)
            return false;
    return true;
}

class ThrowingSource final : public frontend::ChunkSource {
  public:
    explicit ThrowingSource(int n_fft) : n_fft_(n_fft) {}
    bool next(frontend::IQChunk& out) override {
        if (emitted_ >= 5) throw std::runtime_error("device unplugged");
        out.seq = emitted_++;
        out.samples.assign(static_cast<std::size_t>(n_fft_), cfloat{0.0f, 0.0f});
        return true;
    }

  private:
    int n_fft_;
    std::uint64_t emitted_ = 0;
};

} // namespace

TEST_CASE("column partition balances cores and clamps halos") {
    SUBCASE("single slab owns the whole spectrum") {
        const std::vector<Slab> slabs = runtime::partition(1024, 1, 4);
        REQUIRE(slabs.size() == 1);
        CHECK(slabs[0].core_begin == 0);
        CHECK(slabs[0].core_end == 1024);
        CHECK(slabs[0].ext_begin == 0);
        CHECK(slabs[0].ext_end == 1024);
    }

    SUBCASE("1024 columns over four slabs with halo 4") {
        const std::vector<Slab> slabs = runtime::partition(1024, 4, 4);
        REQUIRE(slabs.size() == 4);
        for (const Slab& s : slabs) CHECK(s.core_width() == 256);
        CHECK(slabs[0].ext_width() == 260);
        CHECK(slabs[1].ext_width() == 264);
        CHECK(slabs[2].ext_width() == 264);
        CHECK(slabs[3].ext_width() == 260);
        CHECK(slabs[1].ext_begin == 252);
        CHECK(slabs[1].ext_end == 516);
    }

    SUBCASE("cores tile the spectrum for any viable configuration") {
        std::mt19937 rng(3);
        std::uniform_int_distribution<int> cols_dist(16, 200);
        for (int trial = 0; trial < 50; ++trial) {
            const int n_cols = cols_dist(rng);
            const int n_slabs = 1 + static_cast<int>(rng() % 8u);
            if (n_slabs > n_cols) continue;
            const int halo = 3 + static_cast<int>(rng() % 5u);
            const std::vector<Slab> slabs = runtime::partition(n_cols, n_slabs, halo);
            REQUIRE(static_cast<int>(slabs.size()) == n_slabs);

            int cursor = 0;
            int min_w = n_cols, max_w = 0;
            for (const Slab& s : slabs) {
                CHECK(s.core_begin == cursor);
                cursor = s.core_end;
                min_w = std::min(min_w, s.core_width());
                max_w = std::max(max_w, s.core_width());
                CHECK(s.ext_begin == std::max(0, s.core_begin - halo));
                CHECK(s.ext_end == std::min(n_cols, s.core_end + halo));
            }
            CHECK(cursor == n_cols);
            CHECK(max_w - min_w <= 1);
        }
    }

    SUBCASE("invalid arguments are rejected") {
        CHECK_THROWS_AS(runtime::partition(8, 9, 4), ValidationError);
        CHECK_THROWS_AS(runtime::partition(8, 0, 4), ValidationError);
        CHECK_THROWS_AS(runtime::partition(1024, 4, 2), ValidationError);
    }
}

TEST_CASE("sliced consolidation is bit-exact against the serial pass") {
    std::mt19937 rng(19);
    for (int trial = 0; trial < 25; ++trial) {
        const int cols = trial % 2 == 0 ? 64 : 37;
        const Mask m = oracles::random_blob_mask(rng, 24, cols);
        for (bool along_time : {false, true}) {
            const Mask serial = detector::consolidate(m, along_time);
            for (int n_slabs : {1, 2, 4, 8}) {
                CHECK(runtime::consolidate_sliced(m, n_slabs, 4, along_time) == serial);
            }
        }
    }
}

TEST_CASE("nearest-rank percentiles") {
    std::vector<double> sorted(1000);
    for (int i = 0; i < 1000; ++i) sorted[static_cast<std::size_t>(i)] = i + 1;

    CHECK(runtime::nearest_rank(sorted, 0.99) == 990.0);
    CHECK(runtime::nearest_rank(sorted, 0.50) == 500.0);
    CHECK(runtime::nearest_rank(sorted, 0.90) == 900.0);
    CHECK(runtime::nearest_rank(sorted, 1.0) == 1000.0);
    CHECK(runtime::nearest_rank(sorted, 1e-9) == 1.0);

    const std::vector<double> one = {7.5};
    CHECK(runtime::nearest_rank(one, 0.5) == 7.5);
    CHECK(runtime::nearest_rank(one, 0.99) == 7.5);
}

TEST_CASE("report aggregation from scripted records") {
    auto record = [](std::uint64_t idx, double latency, bool met) {
        PlotRecord r;
        r.plot_index = idx;
        r.latency_s = latency;
        r.deadline_s = 0.01;
        r.met = met;
        return r;
    };

    SUBCASE("one miss in a hundred still passes the 99% bar") {
        std::vector<PlotRecord> records;
        for (int i = 0; i < 100; ++i)
            records.push_back(record(static_cast<std::uint64_t>(i), 0.005, i != 37));
        const RunReport report = runtime::summarize(std::move(records), 0, 0.01);
        CHECK(report.plots == 100);
        CHECK(report.fraction_met == doctest::Approx(0.99));
        CHECK(report.realtime_met);
        CHECK(report.percentiles_valid);
        CHECK(report.p50_s == 0.005);

        // Records come back ordered by plot index.
        for (std::size_t i = 1; i < report.records.size(); ++i)
            CHECK(report.records[i].plot_index > report.records[i - 1].plot_index);
    }

    SUBCASE("two misses in a hundred fail it") {
        std::vector<PlotRecord> records;
        for (int i = 0; i < 100; ++i)
            records.push_back(record(static_cast<std::uint64_t>(i), 0.005, i > 1));
        const RunReport report = runtime::summarize(std::move(records), 0, 0.01);
        CHECK(report.fraction_met == doctest::Approx(0.98));
        CHECK_FALSE(report.realtime_met);
    }

    SUBCASE("percentiles need at least a hundred samples") {
        std::vector<PlotRecord> records;
        for (int i = 0; i < 99; ++i)
            records.push_back(record(static_cast<std::uint64_t>(i), 0.001 * (i + 1), true));
        const RunReport report = runtime::summarize(std::move(records), 2, 0.2);
        CHECK_FALSE(report.percentiles_valid);
        CHECK(report.overruns == 2);
        CHECK(report.max_s == doctest::Approx(0.099));
    }

    SUBCASE("ccdf counts strictly-greater fractions per distinct latency") {
        std::vector<PlotRecord> records = {record(0, 1.0, true), record(1, 1.0, true),
                                           record(2, 2.0, true), record(3, 3.0, true)};
        const RunReport report = runtime::summarize(std::move(records), 0, 5.0);
        const auto points = report.ccdf();
        REQUIRE(points.size() == 3);
        CHECK(points[0] == std::pair{1.0, 0.5});
        CHECK(points[1] == std::pair{2.0, 0.25});
        CHECK(points[2] == std::pair{3.0, 0.0});
        for (std::size_t i = 1; i < points.size(); ++i) {
            CHECK(points[i].first > points[i - 1].first);
            CHECK(points[i].second <= points[i - 1].second);
        }
    }
}

TEST_CASE("runtime config validation") {
    RuntimeConfig rc;
    CHECK_NOTHROW(rc.validate());
    rc.n_sensing_workers = 0;
    CHECK_THROWS_AS(rc.validate(), ValidationError);
    rc.n_sensing_workers = 4;
    rc.n_compute_workers = -1;
    CHECK_THROWS_AS(rc.validate(), ValidationError);
    rc.n_compute_workers = 2;
    rc.halo_bins = 2;
    CHECK_THROWS_AS(rc.validate(), ValidationError);
    rc.halo_bins = 4;
    rc.deadline_s = -0.1;
    CHECK_THROWS_AS(rc.validate(), ValidationError);
}

TEST_CASE("engine output matches the serial detector exactly") {
    const double duration = 0.131072; // four (128, 256) plots at 1 MSps
    const signals::Synthesis synth = burst_synthesis(duration, 404);

    frontend::FrontendConfig fc;
    fc.sample_rate_hz = 1e6;
    fc.n_fft = 256;
    fc.plot_rows = 128;

    RuntimeConfig rc;
    rc.n_sensing_workers = 1;
    rc.n_compute_workers = 1;

    RunReport report;
    const BoxesByPlot single = run_collect(synth.samples, fc, rc, &report);

    const std::vector<frontend::TFPlot> plots = frontend::make_plots(synth.samples, fc);
    REQUIRE(plots.size() == 4);
    REQUIRE(single.size() == 4);

    SUBCASE("single worker reproduces detect() per plot") {
        std::size_t boxes_total = 0;
        for (std::size_t p = 0; p < plots.size(); ++p) {
            const detector::Detections serial =
                detector::detect(plots[p].view(), detector::DetectorConfig{});
            const auto it = single.find(static_cast<std::uint64_t>(p));
            REQUIRE(it != single.end());
            CHECK(same_boxes(it->second, serial.boxes));
            boxes_total += serial.boxes.size();
        }
        CHECK(boxes_total >= 2); // the scenario plants two bursts
    }

    SUBCASE("worker counts do not change detections") {
        for (const auto& [sensing, compute] : {std::pair{2, 1}, {4, 2}, {8, 2}}) {
            RuntimeConfig more = rc;
            more.n_sensing_workers = sensing;
            more.n_compute_workers = compute;
            const BoxesByPlot parallel = run_collect(synth.samples, fc, more);
            REQUIRE(parallel.size() == single.size());
            for (const auto& [idx, boxes] : single)
                CHECK(same_boxes(parallel.at(idx), boxes));
        }
    }

    SUBCASE("records carry per-plot accounting") {
        CHECK(report.plots == 4);
        CHECK(report.overruns == 0);
        CHECK(report.deadline_s == doctest::Approx(fc.plot_span_s()));
        for (const PlotRecord& r : report.records) {
            CHECK(r.start_seq == r.plot_index * 128);
            CHECK(r.latency_s > 0.0);
            CHECK(r.met == (r.latency_s <= r.deadline_s));
            CHECK(r.deadline_s == report.deadline_s);
        }
        CHECK(report.stage_totals.total() > 0.0);
        CHECK(report.fft_time_s > 0.0);
        CHECK(report.wall_time_s > 0.0);
    }
}

TEST_CASE("deadline defaults to the plot span and can be overridden") {
    frontend::FrontendConfig fc;
    fc.sample_rate_hz = 100e6;
    fc.n_fft = 1024;
    fc.plot_rows = 2000;

    // Ten chunks cannot finish a 2000-row window; the report still carries
    // the configured deadline.
    {
        frontend::MemorySource source(std::vector<cfloat>(1024), 1024, 10);
        const RunReport report =
            runtime::run(source, fc, detector::DetectorConfig{}, RuntimeConfig{});
        CHECK(report.plots == 0);
        CHECK(report.deadline_s == doctest::Approx(0.02048));
    }
    {
        frontend::MemorySource source(std::vector<cfloat>(1024), 1024, 10);
        RuntimeConfig rc;
        rc.deadline_s = 0.005;
        const RunReport report = runtime::run(source, fc, detector::DetectorConfig{}, rc);
        CHECK(report.deadline_s == 0.005);
    }
}

TEST_CASE("source failures abort the run as an engine error") {
    frontend::FrontendConfig fc;
    fc.sample_rate_hz = 1e6;
    fc.n_fft = 64;
    fc.plot_rows = 16;
    ThrowingSource source(64);
    CHECK_THROWS_AS(runtime::run(source, fc, detector::DetectorConfig{}, RuntimeConfig{}),
                    Error);
}

TEST_CASE("a paced source sheds windows instead of stalling when the reader lags") {
    signals::Scenario sc;
    sc.sample_rate_hz = 1e6;
    sc.duration_s = 0.131072; // eight (64, 256) windows
    sc.noise_power = 1.0;
    sc.seed = 9;
    const signals::Synthesis synth = signals::synthesize(sc);

    frontend::FrontendConfig fc;
    fc.sample_rate_hz = sc.sample_rate_hz;
    fc.n_fft = 256;
    fc.plot_rows = 64;

    frontend::MemorySource source(synth.samples, fc.n_fft, 0, true, fc.sample_rate_hz);
    RuntimeConfig rc;
    const RunReport report = runtime::run(
        source, fc, detector::DetectorConfig{}, rc,
        [](const PlotRecord&, std::span<const BoundingBox>) {
            std::this_thread::sleep_for(std::chrono::milliseconds(45));
        });

    CHECK(report.overruns >= 1);
    CHECK(report.plots >= 1);
    CHECK(report.plots + report.overruns <= 8);
}
