#include "specsense/signals.hpp"

#include "specsense/frontend.hpp"
#include "fft_util.hpp"

#include <fftw3.h>
#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "raw I/Q containers assume a little-endian host");

namespace specsense::signals {

using json = nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Independent RNG stream per scenario component; stream 0 is the noise.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed;
    std::uint64_t derived = 0;
    for (std::uint64_t i = 0; i <= stream; ++i) derived = splitmix64(state);
    return std::mt19937_64(derived);
}

// Band-limited complex noise burst of length n: white Gaussian spectrum
// masked by `weight` (amplitude weight per absolute bin frequency offset from
// the band center), inverse-transformed and scaled to exactly `power` mean
// square. Weights and bin draws are deterministic in rng order.
std::vector<std::complex<double>> shaped_noise_burst(std::size_t n, double sample_rate_hz,
                                                     double center_freq_hz, double power,
                                                     std::mt19937_64& rng,
                                                     const std::function<double(double)>& weight) {
    std::vector<std::complex<double>> spectrum(n, {0.0, 0.0});
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double bin_hz = sample_rate_hz / static_cast<double>(n);
    bool any = false;
    std::size_t nearest = 0;
    double nearest_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const double f = (k < (n + 1) / 2 ? static_cast<double>(k)
                                          : static_cast<double>(k) - static_cast<double>(n)) *
                         bin_hz;
        const double dist = std::abs(f - center_freq_hz);
        if (dist < nearest_dist) {
            nearest_dist = dist;
            nearest = k;
        }
        const double w = weight(dist);
        if (w > 0.0) {
            spectrum[k] = {w * gauss(rng), w * gauss(rng)};
            any = true;
        }
    }
    if (!any) {
        // Band narrower than one spectral bin: park it all on the closest bin.
        spectrum[nearest] = {gauss(rng), gauss(rng)};
    }

    std::vector<std::complex<double>> burst(n);
    {
        fftw_plan plan;
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            plan = fftw_plan_dft_1d(static_cast<int>(n),
                                    reinterpret_cast<fftw_complex*>(spectrum.data()),
                                    reinterpret_cast<fftw_complex*>(burst.data()),
                                    FFTW_BACKWARD, FFTW_ESTIMATE);
        }
        fftw_execute(plan);
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan);
        }
    }

    double mean_sq = 0.0;
    for (const auto& s : burst) mean_sq += std::norm(s);
    mean_sq /= static_cast<double>(n);
    const double scale = mean_sq > 0.0 ? std::sqrt(power / mean_sq) : 0.0;
    for (auto& s : burst) s *= scale;
    return burst;
}

long long sample_index(double t_s, double sample_rate_hz) {
    return std::llround(t_s * sample_rate_hz);
}

} // namespace

const char* kind_name(SignalKind kind) {
    switch (kind) {
    case SignalKind::ToneBurst: return "tone-burst";
    case SignalKind::OfdmLike: return "ofdm-like";
    case SignalKind::NoiseLike: return "noise-like";
    }
    throw ValidationError("unknown signal kind");
}

SignalKind kind_from_name(std::string_view name) {
    if (name == "tone-burst") return SignalKind::ToneBurst;
    if (name == "ofdm-like") return SignalKind::OfdmLike;
    if (name == "noise-like") return SignalKind::NoiseLike;
    throw SchemaError("unknown signal kind \"" + std::string(name) + "\"");
}

void Scenario::validate() const {
    if (!(sample_rate_hz > 0.0)) throw ValidationError("sample_rate_hz must be positive");
    if (!(duration_s > 0.0)) throw ValidationError("duration_s must be positive");
    if (noise_power < 0.0) throw ValidationError("noise_power must be non-negative");
    const double nyq = sample_rate_hz / 2.0;
    const double t_eps = 0.5 / sample_rate_hz;
    for (std::size_t i = 0; i < signals.size(); ++i) {
        const SignalSpec& s = signals[i];
        const std::string at = "signal " + std::to_string(i) + ": ";
        if (!(s.duration_s > 0.0)) throw ValidationError(at + "duration_s must be positive");
        if (!(s.bandwidth_hz > 0.0)) throw ValidationError(at + "bandwidth_hz must be positive");
        if (!(s.power > 0.0)) throw ValidationError(at + "power must be positive");
        if (s.t_start_s < -t_eps) throw ValidationError(at + "t_start_s must be non-negative");
        if (s.t_start_s + s.duration_s > duration_s + t_eps)
            throw ValidationError(at + "burst extends past the scenario duration");
        if (s.center_freq_hz - s.bandwidth_hz / 2.0 < -nyq - 1e-9 ||
            s.center_freq_hz + s.bandwidth_hz / 2.0 > nyq + 1e-9)
            throw ValidationError(at + "band extends outside [-fs/2, fs/2]");
    }
}

Synthesis synthesize(const Scenario& scenario) {
    scenario.validate();
    const double fs = scenario.sample_rate_hz;
    const std::size_t n_total = static_cast<std::size_t>(sample_index(scenario.duration_s, fs));

    std::vector<std::complex<double>> acc(n_total, {0.0, 0.0});

    if (scenario.noise_power > 0.0) {
        auto rng = stream_rng(scenario.seed, 0);
        std::normal_distribution<double> gauss(0.0, std::sqrt(scenario.noise_power / 2.0));
        for (auto& s : acc) s = {gauss(rng), gauss(rng)};
    }

    Synthesis out;
    for (std::size_t i = 0; i < scenario.signals.size(); ++i) {
        const SignalSpec& spec = scenario.signals[i];
        auto rng = stream_rng(scenario.seed, i + 1);

        const long long i0 = std::clamp<long long>(sample_index(spec.t_start_s, fs), 0,
                                                   static_cast<long long>(n_total));
        const long long i1 =
            std::clamp<long long>(sample_index(spec.t_start_s + spec.duration_s, fs),
                                  i0, static_cast<long long>(n_total));
        const std::size_t len = static_cast<std::size_t>(i1 - i0);
        if (len == 0) continue;

        switch (spec.kind) {
        case SignalKind::ToneBurst: {
            const double amp = std::sqrt(spec.power);
            std::uniform_real_distribution<double> uni(0.0, 2.0 * kPi);
            const double phase0 = uni(rng);
            for (std::size_t n = 0; n < len; ++n) {
                // Exact-phase form: fmod keeps the argument small at long n.
                const double cycles =
                    std::fmod(spec.center_freq_hz * static_cast<double>(i0 + static_cast<long long>(n)), fs) / fs;
                const double phase = 2.0 * kPi * cycles + phase0;
                acc[static_cast<std::size_t>(i0) + n] +=
                    std::complex<double>(amp * std::cos(phase), amp * std::sin(phase));
            }
            break;
        }
        case SignalKind::OfdmLike: {
            const double half = spec.bandwidth_hz / 2.0;
            auto burst = shaped_noise_burst(len, fs, spec.center_freq_hz, spec.power, rng,
                                            [half](double dist) { return dist < half ? 1.0 : 0.0; });
            for (std::size_t n = 0; n < len; ++n) acc[static_cast<std::size_t>(i0) + n] += burst[n];
            break;
        }
        case SignalKind::NoiseLike: {
            // Raised-cosine amplitude skirt: unity inside B/2 - delta, crossing
            // the -3 dB point exactly at B/2, zero at B/2 + delta.
            const double half = spec.bandwidth_hz / 2.0;
            const double delta = 0.2 * half;
            auto burst = shaped_noise_burst(
                len, fs, spec.center_freq_hz, spec.power, rng, [half, delta](double dist) {
                    if (dist <= half - delta) return 1.0;
                    if (dist >= half + delta) return 0.0;
                    return std::cos(kPi / 4.0 * (dist - (half - delta)) / delta);
                });
            for (std::size_t n = 0; n < len; ++n) acc[static_cast<std::size_t>(i0) + n] += burst[n];
            break;
        }
        }

        LabeledBox lb;
        lb.kind = spec.kind;
        lb.box.f0_hz = spec.center_freq_hz - spec.bandwidth_hz / 2.0;
        lb.box.f1_hz = spec.center_freq_hz + spec.bandwidth_hz / 2.0;
        lb.box.t0_s = spec.t_start_s;
        lb.box.t1_s = spec.t_start_s + spec.duration_s;
        out.truth.boxes.push_back(lb);
    }

    out.samples.resize(n_total);
    for (std::size_t n = 0; n < n_total; ++n)
        out.samples[n] = {static_cast<float>(acc[n].real()), static_cast<float>(acc[n].imag())};
    return out;
}

std::vector<double> measure_snr_db(std::span<const cfloat> samples, double sample_rate_hz,
                                   const GroundTruth& truth, int n_fft) {
    if (!(sample_rate_hz > 0.0)) throw ValidationError("sample_rate_hz must be positive");
    if (n_fft < 8 || (n_fft & (n_fft - 1)) != 0)
        throw ValidationError("n_fft must be a power of two >= 8");

    const int f_bins = n_fft;
    const int rows = static_cast<int>(samples.size() / static_cast<std::size_t>(n_fft));
    const double dt = n_fft / sample_rate_hz;
    const double df = sample_rate_hz / n_fft;

    std::vector<double> result(truth.boxes.size(), std::numeric_limits<double>::quiet_NaN());
    if (rows == 0) return result;

    // Power per TF cell, |X[k]|^2 / F^2, so each row sums to its mean sample
    // power and a flat noise of variance v contributes v/F per cell.
    std::vector<float> cells(static_cast<std::size_t>(rows) * f_bins);
    {
        std::vector<float> mags(f_bins);
        const double inv_f2 = 1.0 / (static_cast<double>(n_fft) * n_fft);
        for (int r = 0; r < rows; ++r) {
            frontend::fft_row(samples.subspan(static_cast<std::size_t>(r) * n_fft, n_fft), mags);
            float* dst = cells.data() + static_cast<std::size_t>(r) * f_bins;
            for (int k = 0; k < f_bins; ++k)
                dst[k] = static_cast<float>(static_cast<double>(mags[k]) * mags[k] * inv_f2);
        }
    }

    struct CellRange {
        int r0, r1, k0, k1; // half-open
    };
    auto to_range = [&](const BoundingBox& b) {
        CellRange cr;
        cr.r0 = std::max(0, static_cast<int>(std::ceil(b.t0_s / dt - 0.5)));
        cr.r1 = std::min(rows, static_cast<int>(std::ceil(b.t1_s / dt - 0.5)));
        cr.k0 = std::max(0, static_cast<int>(std::ceil(b.f0_hz / df + f_bins / 2.0)));
        cr.k1 = std::min(f_bins, static_cast<int>(std::ceil(b.f1_hz / df + f_bins / 2.0)));
        return cr;
    };

    std::vector<CellRange> ranges;
    ranges.reserve(truth.boxes.size());
    for (const auto& lb : truth.boxes) ranges.push_back(to_range(lb.box));

    std::vector<std::uint8_t> in_box(cells.size(), 0);
    for (const auto& cr : ranges)
        for (int r = std::max(0, cr.r0); r < cr.r1; ++r)
            for (int k = std::max(0, cr.k0); k < cr.k1; ++k)
                in_box[static_cast<std::size_t>(r) * f_bins + k] = 1;

    std::vector<float> outside;
    outside.reserve(cells.size());
    float max_cell = 0.0f;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        max_cell = std::max(max_cell, cells[i]);
        if (!in_box[i]) outside.push_back(cells[i]);
    }

    double noise_density = 0.0; // power per Hz
    bool measurable = false;
    if (!outside.empty()) {
        auto mid = outside.begin() + static_cast<std::ptrdiff_t>(outside.size() / 2);
        std::nth_element(outside.begin(), mid, outside.end());
        const double median = *mid;
        if (median > 1e-12 * static_cast<double>(max_cell)) {
            // Cell powers of Gaussian noise are exponential; mean = median/ln 2.
            noise_density = median / std::numbers::ln2 / df;
            measurable = true;
        }
    }

    for (std::size_t b = 0; b < ranges.size(); ++b) {
        const CellRange& cr = ranges[b];
        const int nr = cr.r1 - cr.r0;
        const int nk = cr.k1 - cr.k0;
        if (nr <= 0 || nk <= 0) continue; // stays NaN
        if (!measurable) {
            result[b] = std::numeric_limits<double>::infinity();
            continue;
        }
        double total = 0.0;
        for (int r = cr.r0; r < cr.r1; ++r) {
            const float* src = cells.data() + static_cast<std::size_t>(r) * f_bins;
            for (int k = cr.k0; k < cr.k1; ++k) total += src[k];
        }
        const double band_power = total / nr;                    // signal + noise in the box
        const double noise_in_box = noise_density * df * nk;
        const double signal_power = std::max(0.0, band_power - noise_in_box);
        const double ref = noise_density * truth.boxes[b].box.bandwidth_hz();
        result[b] = 10.0 * std::log10(signal_power / ref);
    }
    return result;
}

Scenario with_snr(Scenario scenario, double snr_db) {
    if (!(scenario.noise_power > 0.0))
        throw ValidationError("with_snr requires positive noise power");
    const double density = scenario.noise_density();
    for (auto& s : scenario.signals)
        s.power = std::pow(10.0, snr_db / 10.0) * density * s.bandwidth_hz;
    return scenario;
}

void write_iq32(const std::string& path, std::span<const cfloat> samples) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(samples.data()),
            static_cast<std::streamsize>(samples.size() * sizeof(cfloat)));
    if (!f) throw IoError("short write: " + path);
}

std::vector<cfloat> read_iq32(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open: " + path);
    const auto bytes = static_cast<std::uint64_t>(f.tellg());
    if (bytes % sizeof(float) != 0)
        throw FormatError(path + ": size is not a whole number of float32 values");
    const std::uint64_t n_floats = bytes / sizeof(float);
    if (n_floats % 2 != 0)
        throw FormatError(path + ": odd float32 count, expected interleaved I/Q pairs");
    std::vector<cfloat> samples(n_floats / 2);
    f.seekg(0);
    f.read(reinterpret_cast<char*>(samples.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw IoError("short read: " + path);
    return samples;
}

namespace {

const json& require(const json& j, const char* key, const char* ctx) {
    auto it = j.find(key);
    if (it == j.end())
        throw SchemaError(std::string(ctx) + " missing field \"" + key + "\"");
    return *it;
}

double require_number(const json& j, const char* key, const char* ctx) {
    const json& v = require(j, key, ctx);
    if (!v.is_number())
        throw SchemaError(std::string(ctx) + " field \"" + key + "\" must be a number");
    return v.get<double>();
}

json parse_json(const std::string& text, const char* ctx) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw SchemaError(std::string(ctx) + ": invalid JSON");
    return j;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

std::string ground_truth_to_json(const GroundTruth& truth) {
    json boxes = json::array();
    for (const auto& lb : truth.boxes) {
        boxes.push_back({{"f0_hz", lb.box.f0_hz},
                         {"f1_hz", lb.box.f1_hz},
                         {"t0_s", lb.box.t0_s},
                         {"t1_s", lb.box.t1_s},
                         {"kind", kind_name(lb.kind)}});
    }
    json j{{"version", 1}, {"boxes", std::move(boxes)}};
    return j.dump(2);
}

GroundTruth ground_truth_from_json(const std::string& text) {
    const json j = parse_json(text, "ground truth");
    const json& boxes = require(j, "boxes", "ground truth");
    if (!boxes.is_array()) throw SchemaError("ground truth field \"boxes\" must be an array");
    GroundTruth truth;
    for (const auto& b : boxes) {
        LabeledBox lb;
        lb.box.f0_hz = require_number(b, "f0_hz", "ground truth box");
        lb.box.f1_hz = require_number(b, "f1_hz", "ground truth box");
        lb.box.t0_s = require_number(b, "t0_s", "ground truth box");
        lb.box.t1_s = require_number(b, "t1_s", "ground truth box");
        const json& kind = require(b, "kind", "ground truth box");
        if (!kind.is_string())
            throw SchemaError("ground truth box field \"kind\" must be a string");
        lb.kind = kind_from_name(kind.get<std::string>());
        truth.boxes.push_back(lb);
    }
    return truth;
}

void write_ground_truth(const std::string& path, const GroundTruth& truth) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << ground_truth_to_json(truth) << '\n';
    if (!f) throw IoError("short write: " + path);
}

GroundTruth read_ground_truth(const std::string& path) {
    return ground_truth_from_json(read_file(path));
}

Scenario scenario_from_json(const std::string& text) {
    const json j = parse_json(text, "scenario");
    Scenario sc;
    sc.sample_rate_hz = require_number(j, "sample_rate_hz", "scenario");
    sc.duration_s = require_number(j, "duration_s", "scenario");
    sc.noise_power = require_number(j, "noise_power", "scenario");
    const json& seed = require(j, "seed", "scenario");
    if (!seed.is_number_unsigned())
        throw SchemaError("scenario field \"seed\" must be an unsigned integer");
    sc.seed = seed.get<std::uint64_t>();

    const json& sigs = require(j, "signals", "scenario");
    if (!sigs.is_array()) throw SchemaError("scenario field \"signals\" must be an array");
    for (const auto& s : sigs) {
        SignalSpec spec;
        const json& kind = require(s, "kind", "scenario signal");
        if (!kind.is_string())
            throw SchemaError("scenario signal field \"kind\" must be a string");
        spec.kind = kind_from_name(kind.get<std::string>());
        spec.center_freq_hz = require_number(s, "center_freq_hz", "scenario signal");
        spec.bandwidth_hz = require_number(s, "bandwidth_hz", "scenario signal");
        spec.t_start_s = require_number(s, "t_start_s", "scenario signal");
        spec.duration_s = require_number(s, "duration_s", "scenario signal");

        const bool has_power = s.contains("power");
        const bool has_snr = s.contains("snr_db");
        if (has_power == has_snr)
            throw SchemaError("scenario signal needs exactly one of \"power\" or \"snr_db\"");
        if (has_power) {
            spec.power = require_number(s, "power", "scenario signal");
        } else {
            const double snr_db = require_number(s, "snr_db", "scenario signal");
            if (!(sc.noise_power > 0.0))
                throw SchemaError("scenario signal \"snr_db\" requires positive noise_power");
            spec.power =
                std::pow(10.0, snr_db / 10.0) * (sc.noise_power / sc.sample_rate_hz) * spec.bandwidth_hz;
        }
        sc.signals.push_back(spec);
    }
    sc.validate();
    return sc;
}

Scenario load_scenario(const std::string& path) {
    return scenario_from_json(read_file(path));
}

} // namespace specsense::signals
