#pragma once

#include "specsense/types.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <span>

namespace specsense::frontend {

struct FrontendConfig {
    double sample_rate_hz = 0.0;
    int n_fft = 1024;    // F, power of two
    int plot_rows = 2000; // T, rows per TF plot

    // Throws ValidationError unless fs > 0, n_fft a power of two >= 8,
    // plot_rows >= 1.
    void validate() const;

    double dt_s() const { return n_fft / sample_rate_hz; }
    double df_hz() const { return sample_rate_hz / n_fft; }
    double plot_span_s() const { return plot_rows * dt_s(); }
};

struct Resolution {
    double dt_s;
    double df_hz;
};

// Time step per FFT row and frequency step per bin.
Resolution resolution(double sample_rate_hz, int n_fft);

// Sustained bit rate of an interleaved complex stream at fs samples/s with
// the given bits per I/Q component (covers both the digitizer input and the
// FFT output stream).
double stream_bit_rate_bps(double sample_rate_hz, int bits_per_component);

// One F-sample chunk of complex baseband; seq counts chunks from stream start.
struct IQChunk {
    std::uint64_t seq = 0;
    std::vector<cfloat> samples;
};

// DC-centered magnitude spectrum of one chunk: out[k] = |X[(k + F/2) mod F]|.
// out.size() must equal chunk.size(); chunk size must be a power of two.
void fft_row(std::span<const cfloat> chunk, std::span<float> out);
std::vector<float> fft_row(std::span<const cfloat> chunk);

// Row-major TF magnitude plot. Row r holds the spectrum of chunk
// start_seq + r; column k is the DC-centered frequency bin.
struct TFPlotView {
    const float* data = nullptr;
    int rows = 0;
    int cols = 0;
    std::uint64_t start_seq = 0;
    double sample_rate_hz = 0.0;

    const float* row(int t) const { return data + static_cast<std::size_t>(t) * cols; }
    float at(int t, int f) const { return row(t)[f]; }
    double dt_s() const { return cols / sample_rate_hz; }
    double df_hz() const { return sample_rate_hz / cols; }
    double row_start_time_s(int t) const { return (start_seq + t) * dt_s(); }
    double col_center_freq_hz(int k) const { return (k - cols / 2) * df_hz(); }
};

struct TFPlot {
    std::vector<float> data;
    int rows = 0;
    int cols = 0;
    std::uint64_t start_seq = 0;
    double sample_rate_hz = 0.0;

    float* row(int t) { return data.data() + static_cast<std::size_t>(t) * cols; }
    TFPlotView view() const { return {data.data(), rows, cols, start_seq, sample_rate_hz}; }
};

// FFTs every complete chunk of `samples` into one plot (rows = N / n_fft).
TFPlot make_plot(std::span<const cfloat> samples, double sample_rate_hz, int n_fft,
                 std::uint64_t start_seq = 0);

// Splits samples into consecutive full plots of config.plot_rows rows each;
// a trailing partial window is discarded.
std::vector<TFPlot> make_plots(std::span<const cfloat> samples, const FrontendConfig& config);

// Two-bank plot assembly buffer. Window w = seq / T lands in bank w % 2;
// writers never block: rows for a window whose bank is still held by the
// reader are dropped and the window is counted as one overrun. release()
// returns a bank to the writers.
//
// Concurrency: row_slot/commit_row/mark_lost_range are safe from multiple
// writer threads; release from the reader thread. The completion handler
// fires on whichever writer thread commits the last row of a bank.
class PingPongBuffer {
  public:
    using CompletionHandler = std::function<void(int bank, const TFPlotView& view)>;

    PingPongBuffer(const FrontendConfig& config, CompletionHandler on_complete);
    ~PingPongBuffer();

    PingPongBuffer(const PingPongBuffer&) = delete;
    PingPongBuffer& operator=(const PingPongBuffer&) = delete;

    // Slot for the spectrum row of chunk `seq`, or nullptr if the row belongs
    // to a dropped or stale window. A non-null slot must be followed by
    // commit_row(seq) after the F floats are written.
    float* row_slot(std::uint64_t seq);

    // Back-pressure variant for unpaced sources: when the row's bank is still
    // held by the reader, waits for release() instead of dropping the window.
    // Returns nullptr only for stale or poisoned rows, or after shutdown().
    float* row_slot_blocking(std::uint64_t seq);

    void commit_row(std::uint64_t seq);

    // Account chunks [first, last) lost upstream (queue overflow, socket gap)
    // so their windows drop instead of wedging the bank.
    void mark_lost_range(std::uint64_t first, std::uint64_t last);

    void release(int bank);

    // Permanently wakes writers blocked in row_slot_blocking (teardown path).
    void shutdown();

    std::uint64_t overruns() const;          // windows dropped
    std::uint64_t windows_completed() const; // banks handed to the reader
    std::uint64_t rows_retired() const;      // committed + dropped + lost rows

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

enum class SampleFormat { F32, I16 };

// Pull-style chunk producer. next() fills one F-sample chunk and returns
// false at end of stream. paced() sources deliver in real time; the engine
// must shed load instead of blocking them.
class ChunkSource {
  public:
    virtual ~ChunkSource() = default;
    virtual bool next(IQChunk& out) = 0;
    virtual bool paced() const { return false; }
};

// Replays a .32cf (f32) or interleaved int16 file as F-sample chunks.
// When pace=true, chunks are released no faster than sample_rate_hz.
// I16 samples are scaled by 1/32768 into [-1, 1).
class FileReplaySource final : public ChunkSource {
  public:
    FileReplaySource(const std::string& path, int n_fft, SampleFormat format,
                     bool pace = false, double sample_rate_hz = 0.0);
    ~FileReplaySource() override;
    bool next(IQChunk& out) override;
    bool paced() const override { return pace_; }

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    bool pace_ = false;
};

// Serves chunks from an in-memory sample buffer, cycling it until
// total_chunks have been emitted (0 = single pass, no cycling).
class MemorySource final : public ChunkSource {
  public:
    MemorySource(std::vector<cfloat> samples, int n_fft, std::uint64_t total_chunks = 0,
                 bool pace = false, double sample_rate_hz = 0.0);
    bool next(IQChunk& out) override;
    bool paced() const override { return pace_; }

  private:
    std::vector<cfloat> samples_;
    int n_fft_;
    std::uint64_t total_chunks_;
    std::uint64_t emitted_ = 0;
    std::size_t pos_ = 0;
    bool pace_ = false;
    double sample_rate_hz_ = 0.0;
    std::uint64_t pace_next_ns_ = 0;
};

// Receives chunks as UDP datagrams: 8-byte little-endian sequence number
// followed by exactly F interleaved samples (f32 or i16). A zero-payload
// datagram is the end-of-stream marker. Wrong payload size -> FormatError.
// Sequence gaps surface as seq jumps in the emitted chunks; stale or
// duplicate datagrams are discarded.
class UdpSource final : public ChunkSource {
  public:
    UdpSource(std::uint16_t port, int n_fft, SampleFormat format, int timeout_ms = 5000);
    ~UdpSource() override;
    bool next(IQChunk& out) override;
    bool paced() const override { return true; }
    bool timed_out() const { return timed_out_; }
    std::uint16_t port() const; // actual bound port (for port=0 auto-assign)

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    bool timed_out_ = false;
};

// Blocking UDP sender matching UdpSource framing; sends the end-of-stream
// marker when finished. pace_sps > 0 throttles to that sample rate.
void udp_send_stream(const std::string& host, std::uint16_t port,
                     std::span<const cfloat> samples, int n_fft, SampleFormat format,
                     double pace_sps = 0.0, std::uint64_t first_seq = 0);

} // namespace specsense::frontend
