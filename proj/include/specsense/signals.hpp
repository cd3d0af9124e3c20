#pragma once

#include "specsense/types.hpp"

#include <span>
#include <string_view>

namespace specsense::signals {

enum class SignalKind {
    ToneBurst, // complex sinusoid at center_freq, bandwidth_hz is its nominal box width
    OfdmLike,  // flat band-limited noise, brick-wall spectral edges
    NoiseLike  // band-limited noise with raised-cosine edge taper, -3 dB at +/-B/2
};

const char* kind_name(SignalKind kind);
SignalKind kind_from_name(std::string_view name);

struct SignalSpec {
    SignalKind kind = SignalKind::ToneBurst;
    double center_freq_hz = 0.0; // baseband-relative, DC = 0
    double bandwidth_hz = 0.0;   // occupied band at the 3 dB definition
    double t_start_s = 0.0;
    double duration_s = 0.0;
    double power = 0.0; // mean |s[n]|^2 over the burst, linear
};

struct Scenario {
    double sample_rate_hz = 0.0;
    double duration_s = 0.0;
    double noise_power = 0.0; // per-sample variance E|n|^2 (band-flat across fs)
    std::uint64_t seed = 0;
    std::vector<SignalSpec> signals;

    // One-sided noise power spectral density in power/Hz.
    double noise_density() const { return noise_power / sample_rate_hz; }

    // Throws ValidationError on non-positive rates/durations, bands outside
    // [-fs/2, fs/2], bursts outside [0, duration_s], or non-positive power.
    void validate() const;
};

struct LabeledBox {
    BoundingBox box;
    SignalKind kind = SignalKind::ToneBurst;
};

struct GroundTruth {
    std::vector<LabeledBox> boxes;
};

struct Synthesis {
    std::vector<cfloat> samples;
    GroundTruth truth;
};

// Renders the scenario to complex baseband. Deterministic: identical
// Scenario (including seed) yields bit-identical samples and ground truth.
Synthesis synthesize(const Scenario& scenario);

// Per-box SNR estimate in dB: signal power over noise power integrated across
// the box's own bandwidth. Noise density is estimated from TF cells outside
// every ground-truth box (median with exponential-distribution correction).
// Returns +infinity for a box when no measurable noise exists, NaN for a box
// too small to cover any TF cell.
std::vector<double> measure_snr_db(std::span<const cfloat> samples,
                                   double sample_rate_hz,
                                   const GroundTruth& truth,
                                   int n_fft = 1024);

// Copy of the scenario with every signal's power rescaled so its SNR over its
// own bandwidth equals snr_db against the scenario's noise density.
Scenario with_snr(Scenario scenario, double snr_db);

// Raw interleaved float32 little-endian I/Q, no header (.32cf).
void write_iq32(const std::string& path, std::span<const cfloat> samples);
std::vector<cfloat> read_iq32(const std::string& path);

// Ground-truth JSON: {"version":1,"boxes":[{f0_hz,f1_hz,t0_s,t1_s,kind}]}.
// Readers reject missing fields (SchemaError naming the field) and ignore
// unknown ones.
void write_ground_truth(const std::string& path, const GroundTruth& truth);
GroundTruth read_ground_truth(const std::string& path);
GroundTruth ground_truth_from_json(const std::string& text);
std::string ground_truth_to_json(const GroundTruth& truth);

// Scenario config JSON. Each signal carries exactly one of "power" (linear)
// or "snr_db" (sugar resolved against the scenario noise density at load).
Scenario scenario_from_json(const std::string& text);
Scenario load_scenario(const std::string& path);

} // namespace specsense::signals
