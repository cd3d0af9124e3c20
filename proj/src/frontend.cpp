#include "specsense/frontend.hpp"

#include "fft_util.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cassert>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

namespace specsense::detail {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

} // namespace specsense::detail

namespace specsense::frontend {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void check_fft_size(int n) {
    if (n < 8 || !is_pow2(n))
        throw ValidationError("FFT size must be a power of two >= 8, got " + std::to_string(n));
}

// One cached FFTW plan per size. Plans are created against aligned dummy
// buffers and executed on per-thread aligned scratch via fftw_execute_dft,
// which is safe concurrently.
fftw_plan plan_for(int n) {
    static std::mutex cache_mutex;
    static std::map<int, fftw_plan> cache;
    std::lock_guard lock(cache_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    fftw_complex* dummy = fftw_alloc_complex(static_cast<std::size_t>(n));
    fftw_plan plan;
    {
        std::lock_guard plan_lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_1d(n, dummy, dummy, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_free(dummy);
    cache.emplace(n, plan);
    return plan;
}

struct FftScratch {
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
    int capacity = 0;

    ~FftScratch() {
        if (in) fftw_free(in);
        if (out) fftw_free(out);
    }

    void ensure(int n) {
        if (capacity >= n) return;
        if (in) fftw_free(in);
        if (out) fftw_free(out);
        in = fftw_alloc_complex(static_cast<std::size_t>(n));
        out = fftw_alloc_complex(static_cast<std::size_t>(n));
        capacity = n;
    }
};

thread_local FftScratch tls_scratch;

// Sleeps only when ahead by more than a millisecond, so microsecond chunk
// periods pace in bursts instead of burning a syscall per chunk.
class Pacer {
  public:
    Pacer(double sample_rate_hz, int chunk_samples)
        : period_(std::chrono::duration_cast<std::chrono::nanoseconds>(
              std::chrono::duration<double>(chunk_samples / sample_rate_hz))),
          next_(std::chrono::steady_clock::now()) {}

    void chunk_done() {
        next_ += period_;
        const auto now = std::chrono::steady_clock::now();
        if (next_ - now > std::chrono::milliseconds(1)) std::this_thread::sleep_until(next_);
    }

  private:
    std::chrono::nanoseconds period_;
    std::chrono::steady_clock::time_point next_;
};

} // namespace

void FrontendConfig::validate() const {
    if (!(sample_rate_hz > 0.0)) throw ValidationError("sample_rate_hz must be positive");
    check_fft_size(n_fft);
    if (plot_rows < 1) throw ValidationError("plot_rows must be >= 1");
}

Resolution resolution(double sample_rate_hz, int n_fft) {
    if (!(sample_rate_hz > 0.0)) throw ValidationError("sample_rate_hz must be positive");
    check_fft_size(n_fft);
    return {n_fft / sample_rate_hz, sample_rate_hz / n_fft};
}

double stream_bit_rate_bps(double sample_rate_hz, int bits_per_component) {
    if (!(sample_rate_hz > 0.0)) throw ValidationError("sample_rate_hz must be positive");
    if (bits_per_component <= 0) throw ValidationError("bits_per_component must be positive");
    return sample_rate_hz * 2.0 * bits_per_component;
}

void fft_row(std::span<const cfloat> chunk, std::span<float> out) {
    const int n = static_cast<int>(chunk.size());
    check_fft_size(n);
    if (out.size() != chunk.size())
        throw ValidationError("fft_row output size must match the chunk size");

    fftw_plan plan = plan_for(n);
    tls_scratch.ensure(n);
    for (int i = 0; i < n; ++i) {
        tls_scratch.in[i][0] = chunk[static_cast<std::size_t>(i)].real();
        tls_scratch.in[i][1] = chunk[static_cast<std::size_t>(i)].imag();
    }
    fftw_execute_dft(plan, tls_scratch.in, tls_scratch.out);

    // DC-centered: output bin k holds natural-order bin (k + n/2) mod n.
    const int half = n / 2;
    for (int k = 0; k < n; ++k) {
        const int src = k < half ? k + half : k - half;
        const double re = tls_scratch.out[src][0];
        const double im = tls_scratch.out[src][1];
        out[static_cast<std::size_t>(k)] = static_cast<float>(std::sqrt(re * re + im * im));
    }
}

std::vector<float> fft_row(std::span<const cfloat> chunk) {
    std::vector<float> out(chunk.size());
    fft_row(chunk, out);
    return out;
}

TFPlot make_plot(std::span<const cfloat> samples, double sample_rate_hz, int n_fft,
                 std::uint64_t start_seq) {
    check_fft_size(n_fft);
    if (!(sample_rate_hz > 0.0)) throw ValidationError("sample_rate_hz must be positive");
    TFPlot plot;
    plot.rows = static_cast<int>(samples.size() / static_cast<std::size_t>(n_fft));
    plot.cols = n_fft;
    plot.start_seq = start_seq;
    plot.sample_rate_hz = sample_rate_hz;
    plot.data.resize(static_cast<std::size_t>(plot.rows) * n_fft);
    for (int r = 0; r < plot.rows; ++r)
        fft_row(samples.subspan(static_cast<std::size_t>(r) * n_fft, n_fft),
                {plot.row(r), static_cast<std::size_t>(n_fft)});
    return plot;
}

std::vector<TFPlot> make_plots(std::span<const cfloat> samples, const FrontendConfig& config) {
    config.validate();
    const std::size_t per_plot = static_cast<std::size_t>(config.plot_rows) * config.n_fft;
    std::vector<TFPlot> plots;
    for (std::size_t off = 0; off + per_plot <= samples.size(); off += per_plot) {
        plots.push_back(make_plot(samples.subspan(off, per_plot), config.sample_rate_hz,
                                  config.n_fft,
                                  off / static_cast<std::size_t>(config.n_fft)));
    }
    return plots;
}

// ---------------------------------------------------------------------------
// PingPongBuffer

struct PingPongBuffer::Impl {
    struct Bank {
        std::vector<float> data;
        std::uint64_t window = 0; // window currently accepted (parity == bank)
        int fill = 0;             // committed rows of `window`
        int outstanding = 0;      // slots issued, not yet committed
        bool held = false;        // handed to the reader
        bool poisoned = false;    // current window lost rows; can never complete
    };

    int t_rows;
    int f_bins;
    double sample_rate_hz;
    CompletionHandler on_complete;

    std::mutex mutex;
    std::condition_variable bank_freed;
    bool shut = false;
    Bank banks[2];
    std::uint64_t dropped_upto[2] = {0, 0}; // highest window counted as dropped, +1
    std::uint64_t overruns = 0;
    std::uint64_t completed = 0;
    std::uint64_t retired = 0;

    // Counts each window at most once; windows needing drops arrive in
    // nondecreasing order per bank.
    void count_drop(std::uint64_t w) {
        const int b = static_cast<int>(w % 2);
        if (w + 1 > dropped_upto[b]) {
            dropped_upto[b] = w + 1;
            ++overruns;
        }
    }

    bool already_dropped(std::uint64_t w) const {
        return w + 1 <= dropped_upto[static_cast<int>(w % 2)];
    }

    // Accept path once the bank is known not to be held; mutex held.
    float* accept_locked(Bank& bank, std::uint64_t w, std::uint64_t seq) {
        if (w < bank.window) {
            ++retired;
            return nullptr;
        }
        if (w > bank.window) {
            if (bank.outstanding > 0) {
                // Writers are still copying rows of the old window into this
                // memory; sacrifice this row rather than tear the bank.
                count_drop(w);
                ++retired;
                return nullptr;
            }
            if (bank.fill > 0 && !already_dropped(bank.window)) count_drop(bank.window);
            bank.window = w;
            bank.fill = 0;
            bank.poisoned = false;
        }
        if (bank.poisoned) {
            ++retired;
            return nullptr;
        }
        ++bank.outstanding;
        const std::size_t row = static_cast<std::size_t>(seq % static_cast<std::uint64_t>(t_rows));
        return bank.data.data() + row * static_cast<std::size_t>(f_bins);
    }
};

PingPongBuffer::PingPongBuffer(const FrontendConfig& config, CompletionHandler on_complete)
    : impl_(std::make_unique<Impl>()) {
    config.validate();
    impl_->t_rows = config.plot_rows;
    impl_->f_bins = config.n_fft;
    impl_->sample_rate_hz = config.sample_rate_hz;
    impl_->on_complete = std::move(on_complete);
    const std::size_t bank_size =
        static_cast<std::size_t>(config.plot_rows) * static_cast<std::size_t>(config.n_fft);
    impl_->banks[0].data.assign(bank_size, 0.0f);
    impl_->banks[1].data.assign(bank_size, 0.0f);
    impl_->banks[0].window = 0;
    impl_->banks[1].window = 1;
}

PingPongBuffer::~PingPongBuffer() = default;

float* PingPongBuffer::row_slot(std::uint64_t seq) {
    const std::uint64_t w = seq / static_cast<std::uint64_t>(impl_->t_rows);
    const int b = static_cast<int>(w % 2);
    std::lock_guard lock(impl_->mutex);
    Impl::Bank& bank = impl_->banks[b];
    if (bank.held) {
        if (w > bank.window) impl_->count_drop(w);
        ++impl_->retired;
        return nullptr;
    }
    return impl_->accept_locked(bank, w, seq);
}

float* PingPongBuffer::row_slot_blocking(std::uint64_t seq) {
    const std::uint64_t w = seq / static_cast<std::uint64_t>(impl_->t_rows);
    const int b = static_cast<int>(w % 2);
    std::unique_lock lock(impl_->mutex);
    Impl::Bank& bank = impl_->banks[b];
    impl_->bank_freed.wait(lock, [&] { return impl_->shut || !bank.held || w <= bank.window; });
    if (impl_->shut || bank.held) {
        // Shut down, or a stale row of the window the reader is holding.
        ++impl_->retired;
        return nullptr;
    }
    return impl_->accept_locked(bank, w, seq);
}

void PingPongBuffer::commit_row(std::uint64_t seq) {
    const std::uint64_t w = seq / static_cast<std::uint64_t>(impl_->t_rows);
    const int b = static_cast<int>(w % 2);
    TFPlotView view;
    int complete_bank = -1;
    {
        std::lock_guard lock(impl_->mutex);
        Impl::Bank& bank = impl_->banks[b];
        assert(!bank.held && w == bank.window && bank.outstanding > 0);
        --bank.outstanding;
        ++impl_->retired;
        if (bank.poisoned) return;
        ++bank.fill;
        if (bank.fill == impl_->t_rows) {
            bank.held = true;
            ++impl_->completed;
            complete_bank = b;
            view = {bank.data.data(), impl_->t_rows, impl_->f_bins,
                    w * static_cast<std::uint64_t>(impl_->t_rows), impl_->sample_rate_hz};
        }
    }
    if (complete_bank >= 0 && impl_->on_complete) impl_->on_complete(complete_bank, view);
}

void PingPongBuffer::mark_lost_range(std::uint64_t first, std::uint64_t last) {
    if (last <= first) return;
    std::lock_guard lock(impl_->mutex);
    const std::uint64_t t = static_cast<std::uint64_t>(impl_->t_rows);
    impl_->retired += last - first;
    for (std::uint64_t w = first / t; w <= (last - 1) / t; ++w) {
        impl_->count_drop(w);
        Impl::Bank& bank = impl_->banks[w % 2];
        if (!bank.held && bank.window == w) bank.poisoned = true;
    }
}

void PingPongBuffer::release(int bank_index) {
    std::lock_guard lock(impl_->mutex);
    Impl::Bank& bank = impl_->banks[bank_index];
    assert(bank.held);
    bank.held = false;
    bank.fill = 0;
    bank.poisoned = false;
    bank.window += 2;
    impl_->bank_freed.notify_all();
}

void PingPongBuffer::shutdown() {
    std::lock_guard lock(impl_->mutex);
    impl_->shut = true;
    impl_->bank_freed.notify_all();
}

std::uint64_t PingPongBuffer::overruns() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->overruns;
}

std::uint64_t PingPongBuffer::windows_completed() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->completed;
}

std::uint64_t PingPongBuffer::rows_retired() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->retired;
}

// ---------------------------------------------------------------------------
// Sources

namespace {

std::size_t sample_bytes(SampleFormat format) {
    return format == SampleFormat::F32 ? 2 * sizeof(float) : 2 * sizeof(std::int16_t);
}

void decode_samples(const std::uint8_t* bytes, SampleFormat format, int n, cfloat* out) {
    if (format == SampleFormat::F32) {
        std::memcpy(out, bytes, static_cast<std::size_t>(n) * sizeof(cfloat));
        return;
    }
    const std::int16_t* raw = reinterpret_cast<const std::int16_t*>(bytes);
    constexpr float scale = 1.0f / 32768.0f;
    for (int i = 0; i < n; ++i)
        out[i] = {raw[2 * i] * scale, raw[2 * i + 1] * scale};
}

} // namespace

struct FileReplaySource::Impl {
    std::ifstream file;
    std::string path;
    int n_fft;
    SampleFormat format;
    std::uint64_t seq = 0;
    std::vector<std::uint8_t> raw;
    std::unique_ptr<Pacer> pacer;
};

FileReplaySource::FileReplaySource(const std::string& path, int n_fft, SampleFormat format,
                                   bool pace, double sample_rate_hz)
    : impl_(std::make_unique<Impl>()), pace_(pace) {
    check_fft_size(n_fft);
    impl_->file.open(path, std::ios::binary);
    if (!impl_->file) throw IoError("cannot open: " + path);
    impl_->path = path;
    impl_->n_fft = n_fft;
    impl_->format = format;
    impl_->raw.resize(static_cast<std::size_t>(n_fft) * sample_bytes(format));
    if (pace) {
        if (!(sample_rate_hz > 0.0))
            throw ValidationError("paced replay needs a positive sample rate");
        impl_->pacer = std::make_unique<Pacer>(sample_rate_hz, n_fft);
    }
}

FileReplaySource::~FileReplaySource() = default;

bool FileReplaySource::next(IQChunk& out) {
    impl_->file.read(reinterpret_cast<char*>(impl_->raw.data()),
                     static_cast<std::streamsize>(impl_->raw.size()));
    if (impl_->file.gcount() != static_cast<std::streamsize>(impl_->raw.size()))
        return false; // EOF; a trailing partial chunk is discarded
    out.seq = impl_->seq++;
    out.samples.resize(static_cast<std::size_t>(impl_->n_fft));
    decode_samples(impl_->raw.data(), impl_->format, impl_->n_fft, out.samples.data());
    if (impl_->pacer) impl_->pacer->chunk_done();
    return true;
}

MemorySource::MemorySource(std::vector<cfloat> samples, int n_fft, std::uint64_t total_chunks,
                           bool pace, double sample_rate_hz)
    : samples_(std::move(samples)), n_fft_(n_fft), total_chunks_(total_chunks), pace_(pace),
      sample_rate_hz_(sample_rate_hz) {
    check_fft_size(n_fft);
    if (samples_.size() < static_cast<std::size_t>(n_fft))
        throw ValidationError("memory source needs at least one full chunk of samples");
    if (pace && !(sample_rate_hz > 0.0))
        throw ValidationError("paced replay needs a positive sample rate");
    if (total_chunks_ == 0)
        total_chunks_ = samples_.size() / static_cast<std::size_t>(n_fft);
}

bool MemorySource::next(IQChunk& out) {
    if (emitted_ >= total_chunks_) return false;
    if (pos_ + static_cast<std::size_t>(n_fft_) > samples_.size()) pos_ = 0;
    out.seq = emitted_++;
    out.samples.assign(samples_.begin() + static_cast<std::ptrdiff_t>(pos_),
                       samples_.begin() + static_cast<std::ptrdiff_t>(pos_ + n_fft_));
    pos_ += static_cast<std::size_t>(n_fft_);
    if (pace_) {
        const auto now_ns = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(
                std::chrono::steady_clock::now().time_since_epoch())
                .count());
        if (pace_next_ns_ == 0) pace_next_ns_ = now_ns;
        pace_next_ns_ += static_cast<std::uint64_t>(
            std::llround(1e9 * n_fft_ / sample_rate_hz_));
        if (pace_next_ns_ > now_ns + 1'000'000)
            std::this_thread::sleep_for(std::chrono::nanoseconds(pace_next_ns_ - now_ns));
    }
    return true;
}

struct UdpSource::Impl {
    int fd = -1;
    int n_fft = 0;
    SampleFormat format = SampleFormat::F32;
    std::uint64_t last_seq = 0;
    bool have_last = false;
    std::vector<std::uint8_t> datagram;

    ~Impl() {
        if (fd >= 0) ::close(fd);
    }
};

UdpSource::UdpSource(std::uint16_t port, int n_fft, SampleFormat format, int timeout_ms)
    : impl_(std::make_unique<Impl>()) {
    check_fft_size(n_fft);
    impl_->n_fft = n_fft;
    impl_->format = format;
    impl_->fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (impl_->fd < 0) throw IoError("cannot create UDP socket");

    int rcvbuf = 16 * 1024 * 1024;
    ::setsockopt(impl_->fd, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof(rcvbuf));
    timeval tv{};
    tv.tv_sec = timeout_ms / 1000;
    tv.tv_usec = (timeout_ms % 1000) * 1000;
    ::setsockopt(impl_->fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(impl_->fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw IoError("cannot bind UDP port " + std::to_string(port));

    impl_->datagram.resize(8 + static_cast<std::size_t>(n_fft) * sample_bytes(format) + 1);
}

UdpSource::~UdpSource() = default;

std::uint16_t UdpSource::port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    ::getsockname(impl_->fd, reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
}

bool UdpSource::next(IQChunk& out) {
    const std::size_t payload_bytes = static_cast<std::size_t>(impl_->n_fft) * sample_bytes(impl_->format);
    for (;;) {
        const ssize_t got = ::recv(impl_->fd, impl_->datagram.data(), impl_->datagram.size(), 0);
        if (got < 0) {
            timed_out_ = true;
            return false;
        }
        if (got < 8) throw FormatError("datagram shorter than the 8-byte sequence header");
        if (got == 8) return false; // end-of-stream marker
        if (static_cast<std::size_t>(got) != 8 + payload_bytes)
            throw FormatError("datagram payload is " + std::to_string(got - 8) + " bytes, expected " +
                              std::to_string(payload_bytes));
        std::uint64_t seq;
        std::memcpy(&seq, impl_->datagram.data(), 8);
        if (impl_->have_last && seq <= impl_->last_seq) continue; // stale or duplicate
        impl_->last_seq = seq;
        impl_->have_last = true;
        out.seq = seq;
        out.samples.resize(static_cast<std::size_t>(impl_->n_fft));
        decode_samples(impl_->datagram.data() + 8, impl_->format, impl_->n_fft, out.samples.data());
        return true;
    }
}

void udp_send_stream(const std::string& host, std::uint16_t port, std::span<const cfloat> samples,
                     int n_fft, SampleFormat format, double pace_sps, std::uint64_t first_seq) {
    check_fft_size(n_fft);
    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) throw IoError("cannot create UDP socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw IoError("bad host address: " + host);
    }

    const std::size_t per_sample = sample_bytes(format);
    std::vector<std::uint8_t> datagram(8 + static_cast<std::size_t>(n_fft) * per_sample);
    std::unique_ptr<Pacer> pacer;
    if (pace_sps > 0.0) pacer = std::make_unique<Pacer>(pace_sps, n_fft);

    std::uint64_t seq = first_seq;
    const std::size_t n_chunks = samples.size() / static_cast<std::size_t>(n_fft);
    for (std::size_t c = 0; c < n_chunks; ++c, ++seq) {
        std::memcpy(datagram.data(), &seq, 8);
        const cfloat* src = samples.data() + c * static_cast<std::size_t>(n_fft);
        if (format == SampleFormat::F32) {
            std::memcpy(datagram.data() + 8, src, static_cast<std::size_t>(n_fft) * sizeof(cfloat));
        } else {
            std::int16_t* dst = reinterpret_cast<std::int16_t*>(datagram.data() + 8);
            for (int i = 0; i < n_fft; ++i) {
                const float re = std::clamp(src[i].real() * 32768.0f, -32768.0f, 32767.0f);
                const float im = std::clamp(src[i].imag() * 32768.0f, -32768.0f, 32767.0f);
                dst[2 * i] = static_cast<std::int16_t>(std::lrintf(re));
                dst[2 * i + 1] = static_cast<std::int16_t>(std::lrintf(im));
            }
        }
        if (::sendto(fd, datagram.data(), datagram.size(), 0, reinterpret_cast<sockaddr*>(&addr),
                     sizeof(addr)) < 0) {
            ::close(fd);
            throw IoError("UDP send failed");
        }
        if (pacer) pacer->chunk_done();
    }
    std::memcpy(datagram.data(), &seq, 8);
    ::sendto(fd, datagram.data(), 8, 0, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    ::close(fd);
}

} // namespace specsense::frontend
