// Command-line front door for the spectrum sensing pipeline: synthesize test
// streams, run the detector over files or live UDP, score detections against
// ground truth, and benchmark against the reference detector.

#include "specsense/baseline.hpp"
#include "specsense/detector.hpp"
#include "specsense/frontend.hpp"
#include "specsense/metrics.hpp"
#include "specsense/runtime.hpp"
#include "specsense/signals.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef SPECSENSE_VERSION
#define SPECSENSE_VERSION "0.0.0"
#endif

namespace {

using namespace specsense;
using nlohmann::json;

// Reproducibility record: one run_manifest.json in the directory of the
// command's outputs, capturing the exact configuration that produced them.
void write_manifest(const std::string& command, const json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double wall_s) {
    if (outputs.empty()) return;
    const std::filesystem::path dir = std::filesystem::path(outputs.front()).parent_path();
    json j;
    j["command"] = command;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_s"] = wall_s;
    j["version"] = SPECSENSE_VERSION;
    const std::filesystem::path path = dir / "run_manifest.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct DetectionRow {
    std::uint64_t plot_index = 0;
    BoundingBox box;
};

void write_detections_csv(const std::string& path, std::span<const DetectionRow> rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "plot_index,t0_s,t1_s,f0_hz,f1_hz\n";
    char line[256];
    for (const DetectionRow& r : rows) {
        std::snprintf(line, sizeof line, "%" PRIu64 ",%.17g,%.17g,%.17g,%.17g\n", r.plot_index,
                      r.box.t0_s, r.box.t1_s, r.box.f0_hz, r.box.f1_hz);
        out << line;
    }
}

std::vector<DetectionRow> read_detections_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<DetectionRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first && line.rfind("plot_index", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        DetectionRow r;
        if (std::sscanf(line.c_str(), "%" SCNu64 ",%lg,%lg,%lg,%lg", &r.plot_index, &r.box.t0_s,
                        &r.box.t1_s, &r.box.f0_hz, &r.box.f1_hz) != 5)
            throw FormatError("bad detections row: " + line);
        rows.push_back(r);
    }
    return rows;
}

json report_to_json(const runtime::RunReport& report) {
    json j;
    j["plots"] = report.plots;
    j["overruns"] = report.overruns;
    j["deadline_s"] = report.deadline_s;
    j["fraction_met"] = report.fraction_met;
    j["realtime_met"] = report.realtime_met;
    j["latency_s"] = {{"p50", report.p50_s},
                      {"p90", report.p90_s},
                      {"p99", report.p99_s},
                      {"max", report.max_s},
                      {"percentiles_valid", report.percentiles_valid}};
    j["stage_totals_s"] = {{"psd", report.stage_totals.psd},
                           {"floor_prune", report.stage_totals.floor_prune},
                           {"binarize", report.stage_totals.binarize},
                           {"morphology", report.stage_totals.morphology},
                           {"label", report.stage_totals.label}};
    j["fft_time_s"] = report.fft_time_s;
    j["wall_time_s"] = report.wall_time_s;
    return j;
}

specsense::frontend::SampleFormat parse_format(const std::string& name) {
    if (name == "f32") return frontend::SampleFormat::F32;
    if (name == "i16") return frontend::SampleFormat::I16;
    throw ValidationError("unknown sample format: " + name);
}

int cmd_synth(const std::string& scenario_path, const std::string& out_path,
              std::string truth_path, std::optional<double> snr_db,
              std::optional<std::uint64_t> seed, bool print_snr) {
    const auto t0 = std::chrono::steady_clock::now();
    signals::Scenario scenario = signals::load_scenario(scenario_path);
    if (seed) scenario.seed = *seed;
    if (snr_db) scenario = signals::with_snr(scenario, *snr_db);

    const signals::Synthesis synth = signals::synthesize(scenario);
    signals::write_iq32(out_path, synth.samples);
    if (truth_path.empty()) truth_path = out_path + ".gt.json";
    signals::write_ground_truth(truth_path, synth.truth);

    std::printf("wrote %zu samples (%.6f s at %.3f MSps), %zu signals -> %s\n",
                synth.samples.size(), scenario.duration_s, scenario.sample_rate_hz / 1e6,
                synth.truth.boxes.size(), out_path.c_str());
    std::printf("ground truth -> %s\n", truth_path.c_str());

    if (print_snr) {
        const std::vector<double> snrs =
            signals::measure_snr_db(synth.samples, scenario.sample_rate_hz, synth.truth);
        for (std::size_t i = 0; i < snrs.size(); ++i)
            std::printf("  box %zu [%s]: %.2f dB\n", i,
                        signals::kind_name(synth.truth.boxes[i].kind), snrs[i]);
    }

    json cfg;
    cfg["seed"] = scenario.seed;
    if (snr_db) cfg["snr_db"] = *snr_db;
    write_manifest("synth", cfg, {scenario_path}, {out_path, truth_path}, seconds_since(t0));
    return 0;
}

int cmd_detect(const std::string& input, int udp_port, const std::string& format_name,
               double sample_rate, int n_fft, int rows, int sensing_workers, int compute_workers,
               int halo, double deadline_ms, bool pace, const detector::DetectorConfig& dc,
               const std::string& out_csv, const std::string& report_path,
               const std::string& ccdf_path) {
    const auto t0 = std::chrono::steady_clock::now();
    frontend::FrontendConfig fc;
    fc.sample_rate_hz = sample_rate;
    fc.n_fft = n_fft;
    fc.plot_rows = rows;

    runtime::RuntimeConfig rc;
    rc.n_sensing_workers = sensing_workers;
    rc.n_compute_workers = compute_workers;
    rc.halo_bins = halo;
    rc.deadline_s = deadline_ms / 1000.0;

    const frontend::SampleFormat format = parse_format(format_name);
    std::unique_ptr<frontend::ChunkSource> source;
    frontend::UdpSource* udp = nullptr;
    if (udp_port >= 0) {
        auto u = std::make_unique<frontend::UdpSource>(static_cast<std::uint16_t>(udp_port), n_fft,
                                                       format);
        udp = u.get();
        std::fprintf(stderr, "listening on udp port %u\n", udp->port());
        source = std::move(u);
    } else {
        source = std::make_unique<frontend::FileReplaySource>(input, n_fft, format, pace,
                                                              sample_rate);
    }

    std::vector<DetectionRow> detections;
    const runtime::RunReport report =
        runtime::run(*source, fc, dc, rc,
                     [&](const runtime::PlotRecord& rec, std::span<const BoundingBox> boxes) {
                         for (const BoundingBox& b : boxes)
                             detections.push_back({rec.plot_index, b});
                     });

    if (!out_csv.empty()) write_detections_csv(out_csv, detections);
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw IoError("cannot open " + report_path + " for writing");
        out << report_to_json(report).dump(2) << "\n";
    }
    if (!ccdf_path.empty()) {
        std::ofstream out(ccdf_path);
        if (!out) throw IoError("cannot open " + ccdf_path + " for writing");
        out << "latency_s,fraction_exceeding\n";
        for (const auto& [lat, frac] : report.ccdf()) out << lat << "," << frac << "\n";
    }

    std::printf("%" PRIu64 " plots, %zu boxes, %" PRIu64
                " overruns, p99 %.3f ms vs deadline %.3f ms, met %.2f%%\n",
                report.plots, detections.size(), report.overruns, report.p99_s * 1e3,
                report.deadline_s * 1e3, report.fraction_met * 100.0);
    if (udp && udp->timed_out())
        std::fprintf(stderr, "note: udp receive timed out before an end-of-stream marker\n");

    json cfg;
    cfg["sample_rate_hz"] = sample_rate;
    cfg["n_fft"] = n_fft;
    cfg["rows"] = rows;
    cfg["sensing_workers"] = sensing_workers;
    cfg["compute_workers"] = compute_workers;
    cfg["halo"] = halo;
    cfg["deadline_ms"] = deadline_ms;
    cfg["pace"] = pace;
    cfg["format"] = format_name;
    cfg["margin_db"] = dc.psd_margin_db;
    cfg["min_area"] = dc.min_component_area;
    cfg["open_along_time"] = dc.one_d_opening_along_time;
    cfg["overruns"] = report.overruns;
    std::vector<std::string> outputs;
    for (const std::string& p : {out_csv, report_path, ccdf_path})
        if (!p.empty()) outputs.push_back(p);
    const std::string in_name = udp_port >= 0 ? "udp:" + std::to_string(udp_port) : input;
    write_manifest("detect", cfg, {in_name}, outputs, seconds_since(t0));
    return 0;
}

int cmd_eval(const std::string& det_path, const std::string& truth_path,
             std::vector<double> thetas, const std::string& out_csv) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<DetectionRow> det_rows = read_detections_csv(det_path);
    const signals::GroundTruth truth = signals::read_ground_truth(truth_path);

    std::vector<BoundingBox> detections;
    detections.reserve(det_rows.size());
    for (const DetectionRow& r : det_rows) detections.push_back(r.box);
    std::vector<BoundingBox> gt;
    gt.reserve(truth.boxes.size());
    for (const signals::LabeledBox& b : truth.boxes) gt.push_back(b.box);

    if (thetas.empty()) thetas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    const std::vector<metrics::EvalResult> results = metrics::sweep(gt, detections, thetas);

    std::ostringstream csv;
    csv << "theta,n_gt,n_det,n_true,n_false,p_d,p_fa,mean_iou\n";
    for (const metrics::EvalResult& r : results) {
        char line[256];
        std::snprintf(line, sizeof line, "%.3f,%d,%d,%d,%d,%.6f,%.6f,%.6f\n", r.theta, r.n_gt,
                      r.n_det, r.n_true, r.n_false, r.p_d, r.p_fa, r.mean_iou);
        csv << line;
    }
    if (!out_csv.empty()) {
        std::ofstream out(out_csv);
        if (!out) throw IoError("cannot open " + out_csv + " for writing");
        out << csv.str();
    }
    std::fputs(csv.str().c_str(), stdout);

    json cfg;
    cfg["thetas"] = thetas;
    std::vector<std::string> outputs;
    if (!out_csv.empty()) outputs.push_back(out_csv);
    write_manifest("eval", cfg, {det_path, truth_path}, outputs, seconds_since(t0));
    return 0;
}

// Latency benchmark: replays the synthesized scenario through the full engine
// once per worker count (cycling the sample buffer until `plots` windows have
// streamed), writes one CCDF per worker count plus a summary, and optionally
// appends the single-threaded reference-detector comparison.
int cmd_bench(const std::string& scenario_path, const std::string& out_dir, int rows, int n_fft,
              int plots, std::vector<int> worker_counts, double theta, bool with_baseline,
              int baseline_plots) {
    const auto t0 = std::chrono::steady_clock::now();
    if (plots < 1) throw ValidationError("bench needs plots >= 1");
    if (worker_counts.empty()) worker_counts = {1};
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);

    const signals::Scenario scenario = signals::load_scenario(scenario_path);
    const signals::Synthesis synth = signals::synthesize(scenario);

    frontend::FrontendConfig fc;
    fc.sample_rate_hz = scenario.sample_rate_hz;
    fc.n_fft = n_fft;
    fc.plot_rows = rows;
    fc.validate();

    std::vector<std::string> outputs;
    std::ostringstream summary;
    summary << "workers,plots,overruns,fraction_met,realtime_met,p50_s,p90_s,p99_s,max_s\n";

    for (int workers : worker_counts) {
        const std::uint64_t total_chunks =
            static_cast<std::uint64_t>(plots) * static_cast<std::uint64_t>(rows);
        frontend::MemorySource source(synth.samples, n_fft, total_chunks);

        runtime::RuntimeConfig rc;
        rc.n_sensing_workers = workers;
        const runtime::RunReport report = runtime::run(source, fc, detector::DetectorConfig{}, rc);

        const std::string ccdf_name = "ccdf_w" + std::to_string(workers) + ".csv";
        std::ofstream ccdf(dir / ccdf_name);
        if (!ccdf) throw IoError("cannot open " + (dir / ccdf_name).string() + " for writing");
        ccdf << "latency_s,fraction_exceeding\n";
        for (const auto& [lat, frac] : report.ccdf()) ccdf << lat << "," << frac << "\n";
        outputs.push_back((dir / ccdf_name).string());

        char line[256];
        std::snprintf(line, sizeof line, "%d,%" PRIu64 ",%" PRIu64 ",%.6f,%d,%.6f,%.6f,%.6f,%.6f\n",
                      workers, report.plots, report.overruns, report.fraction_met,
                      report.realtime_met ? 1 : 0, report.p50_s, report.p90_s, report.p99_s,
                      report.max_s);
        summary << line;
        std::printf("workers %2d: %" PRIu64 " plots, p99 %.3f ms vs deadline %.3f ms, "
                    "met %.2f%% -> %s\n",
                    workers, report.plots, report.p99_s * 1e3, report.deadline_s * 1e3,
                    report.fraction_met * 100.0, report.realtime_met ? "pass" : "FAIL");
    }

    {
        std::ofstream out(dir / "latency_summary.csv");
        if (!out) throw IoError("cannot open latency_summary.csv for writing");
        out << summary.str();
        outputs.push_back((dir / "latency_summary.csv").string());
    }

    if (with_baseline) {
        std::vector<frontend::TFPlot> tf_plots = frontend::make_plots(synth.samples, fc);
        if (baseline_plots > 0 && static_cast<int>(tf_plots.size()) > baseline_plots)
            tf_plots.resize(static_cast<std::size_t>(baseline_plots));
        if (tf_plots.empty()) throw ValidationError("scenario shorter than one plot");

        std::vector<frontend::TFPlotView> views;
        views.reserve(tf_plots.size());
        for (const frontend::TFPlot& p : tf_plots) views.push_back(p.view());

        // Each plot sees the portion of a ground-truth box that falls inside its
        // time window, so bursts crossing plot boundaries are clipped, not dropped.
        const double span = fc.plot_span_s();
        std::vector<std::vector<BoundingBox>> truth_per_plot(tf_plots.size());
        for (std::size_t p = 0; p < truth_per_plot.size(); ++p) {
            const double w0 = static_cast<double>(p) * span;
            const double w1 = w0 + span;
            for (const signals::LabeledBox& b : synth.truth.boxes) {
                BoundingBox clipped = b.box;
                clipped.t0_s = std::max(clipped.t0_s, w0);
                clipped.t1_s = std::min(clipped.t1_s, w1);
                if (clipped.t1_s > clipped.t0_s) truth_per_plot[p].push_back(clipped);
            }
        }

        const baseline::Comparison cmp =
            baseline::compare(views, truth_per_plot, detector::DetectorConfig{},
                              baseline::BaselineConfig{}, theta);

        std::ostringstream csv;
        csv << "detector,mean_latency_s,p_d,p_fa,mean_iou\n";
        for (const baseline::CompareRow& row : cmp.rows) {
            char line[256];
            std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f,%.6f\n", row.detector.c_str(),
                          row.mean_latency_s, row.p_d, row.p_fa, row.mean_iou);
            csv << line;
        }
        std::ofstream out(dir / "comparison.csv");
        if (!out) throw IoError("cannot open comparison.csv for writing");
        out << csv.str();
        outputs.push_back((dir / "comparison.csv").string());
        std::fputs(csv.str().c_str(), stdout);
        std::printf("speedup: %.2fx over %zu plots at theta %.2f\n", cmp.speedup, tf_plots.size(),
                    theta);
    }

    json cfg;
    cfg["rows"] = rows;
    cfg["n_fft"] = n_fft;
    cfg["plots"] = plots;
    cfg["workers"] = worker_counts;
    cfg["theta"] = theta;
    cfg["baseline"] = with_baseline;
    write_manifest("bench", cfg, {scenario_path}, outputs, seconds_since(t0));
    return 0;
}

int cmd_send(const std::string& host, int port, const std::string& input, int n_fft,
             const std::string& format_name, double pace_sps, std::uint64_t first_seq) {
    const std::vector<cfloat> samples = signals::read_iq32(input);
    frontend::udp_send_stream(host, static_cast<std::uint16_t>(port), samples, n_fft,
                              parse_format(format_name), pace_sps, first_seq);
    std::printf("sent %zu samples (%zu chunks of %d) to %s:%d\n", samples.size(),
                samples.size() / static_cast<std::size_t>(n_fft), n_fft, host.c_str(), port);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TF-plot spectrum sensing pipeline"};
    app.require_subcommand(1);

    // synth
    std::string scenario_path, out_path, truth_path;
    double snr_db_val = 0.0;
    std::uint64_t seed_val = 0;
    bool print_snr = false;
    auto* synth = app.add_subcommand("synth", "Render a scenario to a .32cf file + ground truth");
    synth->add_option("--scenario", scenario_path, "Scenario JSON")->required();
    synth->add_option("-o,--out", out_path, "Output .32cf path")->required();
    synth->add_option("--truth", truth_path, "Ground-truth JSON path (default: <out>.gt.json)");
    auto* snr_opt = synth->add_option("--snr-db", snr_db_val, "Rescale every signal to this SNR");
    auto* seed_opt = synth->add_option("--seed", seed_val, "Override the scenario seed");
    synth->add_flag("--print-snr", print_snr, "Measure and print per-box SNR");

    // detect
    std::string input, format_name = "f32", det_csv, report_path, ccdf_path;
    int udp_port = -1, n_fft = 1024, rows = 2000;
    int sensing_workers = 1, compute_workers = 1, halo = 4;
    double sample_rate = 0.0, deadline_ms = 0.0;
    bool pace = false;
    detector::DetectorConfig dc;
    auto* detect = app.add_subcommand("detect", "Run the detector over a file or UDP stream");
    auto* in_opt = detect->add_option("-i,--input", input, "Input sample file");
    detect->add_option("--udp-port", udp_port, "Listen for UDP chunks instead of reading a file");
    detect->add_option("--format", format_name, "Sample format: f32 | i16")->capture_default_str();
    detect->add_option("--sample-rate", sample_rate, "Sample rate in Hz")->required();
    detect->add_option("--n-fft", n_fft, "FFT size / frequency bins")->capture_default_str();
    detect->add_option("--rows", rows, "Rows per TF plot")->capture_default_str();
    detect->add_option("--sensing-workers", sensing_workers, "Slab sensing threads")->capture_default_str();
    detect->add_option("--compute-workers", compute_workers, "FFT threads")->capture_default_str();
    detect->add_option("--halo", halo, "Slab halo columns")->capture_default_str();
    detect->add_option("--deadline-ms", deadline_ms, "Latency deadline (0 = one plot span)")
        ->capture_default_str();
    detect->add_flag("--pace", pace, "Replay the file at the sample rate");
    detect->add_option("--margin-db", dc.psd_margin_db, "Noise-floor margin")->capture_default_str();
    detect->add_option("--min-area", dc.min_component_area, "Minimum component area")->capture_default_str();
    detect->add_flag("--open-along-time", dc.one_d_opening_along_time,
                     "Run the 1x3 opening along the time axis");
    detect->add_option("-o,--out", det_csv, "Detections CSV path");
    detect->add_option("--report", report_path, "Run report JSON path");
    detect->add_option("--ccdf", ccdf_path, "Latency CCDF CSV path");

    // eval
    std::string eval_det, eval_truth, eval_csv;
    std::vector<double> thetas;
    auto* eval = app.add_subcommand("eval", "Score detections against ground truth");
    eval->add_option("--detections", eval_det, "Detections CSV from `detect`")->required();
    eval->add_option("--truth", eval_truth, "Ground-truth JSON")->required();
    eval->add_option("--theta", thetas, "IoU thresholds (default 0.1..0.9)")->delimiter(',');
    eval->add_option("-o,--out", eval_csv, "Metrics CSV path");

    // bench
    std::string bench_scenario, bench_dir = "bench_out";
    int bench_rows = 500, bench_fft = 1024, bench_plots = 100, bench_baseline_plots = 4;
    double bench_theta = 0.5;
    bool bench_baseline = false;
    std::vector<int> bench_workers;
    auto* bench = app.add_subcommand("bench", "Latency benchmark per worker count, with an "
                                              "optional reference-detector comparison");
    bench->add_option("--scenario", bench_scenario, "Scenario JSON")->required();
    bench->add_option("--out-dir", bench_dir, "Output directory")->capture_default_str();
    bench->add_option("--rows", bench_rows, "Rows per TF plot")->capture_default_str();
    bench->add_option("--n-fft", bench_fft, "FFT size / frequency bins")->capture_default_str();
    bench->add_option("--plots", bench_plots, "TF plots to stream per worker count")
        ->capture_default_str();
    bench->add_option("--workers", bench_workers, "Sensing worker counts (default 1)")
        ->delimiter(',');
    bench->add_option("--theta", bench_theta, "IoU threshold for p_d/p_fa")->capture_default_str();
    bench->add_flag("--baseline", bench_baseline, "Also run the reference-detector comparison");
    bench->add_option("--baseline-plots", bench_baseline_plots,
                      "Plot cap for the comparison (0 = all)")
        ->capture_default_str();

    // send
    std::string send_host = "127.0.0.1", send_input, send_format = "f32";
    int send_port = 0, send_n_fft = 1024;
    double pace_sps = 0.0;
    std::uint64_t first_seq = 0;
    auto* send = app.add_subcommand("send", "Stream a .32cf file over UDP");
    send->add_option("--host", send_host, "Destination host")->capture_default_str();
    send->add_option("--port", send_port, "Destination port")->required();
    send->add_option("-i,--input", send_input, "Input .32cf file")->required();
    send->add_option("--n-fft", send_n_fft, "Samples per datagram")->capture_default_str();
    send->add_option("--format", send_format, "Wire format: f32 | i16")->capture_default_str();
    send->add_option("--pace-sps", pace_sps, "Throttle to this sample rate (0 = full speed)")
        ->capture_default_str();
    send->add_option("--first-seq", first_seq, "Sequence number of the first chunk")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth(scenario_path, out_path, truth_path,
                             snr_opt->count() ? std::optional<double>(snr_db_val) : std::nullopt,
                             seed_opt->count() ? std::optional<std::uint64_t>(seed_val)
                                               : std::nullopt,
                             print_snr);
        if (detect->parsed()) {
            if (udp_port < 0 && in_opt->count() == 0)
                throw ValidationError("detect needs --input or --udp-port");
            return cmd_detect(input, udp_port, format_name, sample_rate, n_fft, rows,
                              sensing_workers, compute_workers, halo, deadline_ms, pace, dc,
                              det_csv, report_path, ccdf_path);
        }
        if (eval->parsed()) return cmd_eval(eval_det, eval_truth, thetas, eval_csv);
        if (bench->parsed()) {
            if (bench_workers.empty()) bench_workers.push_back(1);
            return cmd_bench(bench_scenario, bench_dir, bench_rows, bench_fft, bench_plots,
                             bench_workers, bench_theta, bench_baseline, bench_baseline_plots);
        }
        if (send->parsed())
            return cmd_send(send_host, send_port, send_input, send_n_fft, send_format, pace_sps,
                            first_seq);
    } catch (const specsense::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fatal: %s\n", e.what());
        return 2;
    }
    return 0;
}
