#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "specsense/frontend.hpp"
#include "specsense/signals.hpp"

#include <arpa/inet.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>
#include <vector>

using namespace specsense;
using frontend::FrontendConfig;
using frontend::IQChunk;
using frontend::PingPongBuffer;
using frontend::SampleFormat;
using frontend::TFPlotView;

namespace {

std::vector<cfloat> random_samples(std::mt19937& rng, std::size_t n) {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<cfloat> out(n);
    for (auto& s : out) s = {u(rng), u(rng)};
    return out;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

FrontendConfig config(double fs, int n_fft, int rows) {
    FrontendConfig fc;
    fc.sample_rate_hz = fs;
    fc.n_fft = n_fft;
    fc.plot_rows = rows;
    return fc;
}

// Sends one raw datagram with the source's framing (8-byte LE seq + payload).
void send_datagram(std::uint16_t port, std::uint64_t seq, const void* payload,
                   std::size_t payload_bytes) {
    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);

    std::vector<std::uint8_t> buf(8 + payload_bytes);
    for (int i = 0; i < 8; ++i) buf[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>((seq >> (8 * i)) & 0xff);
    if (payload_bytes > 0) std::memcpy(buf.data() + 8, payload, payload_bytes);
    const auto sent = ::sendto(fd, buf.data(), buf.size(), 0,
                               reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
    ::close(fd);
    REQUIRE(sent == static_cast<ssize_t>(buf.size()));
}

} // namespace

TEST_CASE("resolution follows dt = F/fs and df = fs/F") {
    const frontend::Resolution a = frontend::resolution(100e6, 1024);
    CHECK(a.dt_s == doctest::Approx(10.24e-6).epsilon(1e-12));
    CHECK(a.df_hz == doctest::Approx(97656.25).epsilon(1e-12));

    const frontend::Resolution b = frontend::resolution(1024.0, 1024);
    CHECK(b.dt_s == doctest::Approx(1.0));
    CHECK(b.df_hz == doctest::Approx(1.0));

    const frontend::Resolution c = frontend::resolution(500e6, 1024);
    CHECK(c.dt_s == doctest::Approx(2.048e-6).epsilon(1e-12));
}

TEST_CASE("stream bit rate covers digitizer input and FFT output streams") {
    CHECK(frontend::stream_bit_rate_bps(100e6, 16) == doctest::Approx(3.2e9));
    CHECK(frontend::stream_bit_rate_bps(100e6, 32) == doctest::Approx(6.4e9));
}

TEST_CASE("frontend config validation") {
    CHECK_NOTHROW(config(1e6, 1024, 500).validate());
    CHECK_THROWS_AS(config(0.0, 1024, 500).validate(), ValidationError);
    CHECK_THROWS_AS(config(1e6, 1000, 500).validate(), ValidationError); // not a power of two
    CHECK_THROWS_AS(config(1e6, 4, 500).validate(), ValidationError);
    CHECK_THROWS_AS(config(1e6, 1024, 0).validate(), ValidationError);
}

TEST_CASE("fft_row magnitudes") {
    SUBCASE("all-zero chunk gives an all-zero row") {
        const std::vector<cfloat> chunk(64, cfloat{0.0f, 0.0f});
        const std::vector<float> row = frontend::fft_row(chunk);
        for (float v : row) CHECK(v == 0.0f);
    }

    SUBCASE("constant chunk concentrates F*|c| in the center bin") {
        const int n = 64;
        const std::vector<cfloat> chunk(n, cfloat{0.5f, -0.5f});
        const std::vector<float> row = frontend::fft_row(chunk);
        const float expected = n * std::abs(cfloat{0.5f, -0.5f});
        CHECK(row[n / 2] == doctest::Approx(expected).epsilon(1e-6));
        for (int k = 0; k < n; ++k)
            if (k != n / 2) CHECK(row[static_cast<std::size_t>(k)] < expected * 1e-5f);
    }

    SUBCASE("random chunk matches the direct DFT with centered ordering") {
        std::mt19937 rng(42);
        const std::vector<cfloat> chunk = random_samples(rng, 128);
        const std::vector<float> row = frontend::fft_row(chunk);
        const std::vector<double> expected = oracles::naive_centered_magnitudes(chunk);
        for (std::size_t k = 0; k < row.size(); ++k)
            CHECK(row[k] == doctest::Approx(expected[k]).epsilon(1e-5));
    }

    SUBCASE("Parseval holds to better than 1e-6 relative") {
        std::mt19937 rng(7);
        for (int n : {256, 1024}) {
            const std::vector<cfloat> chunk = random_samples(rng, static_cast<std::size_t>(n));
            const std::vector<float> row = frontend::fft_row(chunk);
            double spec_energy = 0.0;
            for (float v : row) spec_energy += static_cast<double>(v) * v;
            double sample_energy = 0.0;
            for (const cfloat& s : chunk) sample_energy += std::norm(std::complex<double>(s));
            const double expected = n * sample_energy;
            CHECK(std::abs(spec_energy - expected) / expected < 1e-6);
        }
    }

    SUBCASE("bad sizes are rejected") {
        const std::vector<cfloat> chunk(100);
        CHECK_THROWS_AS(frontend::fft_row(chunk), ValidationError);
        const std::vector<cfloat> ok(16);
        std::vector<float> wrong(8);
        CHECK_THROWS_AS(frontend::fft_row(ok, wrong), ValidationError);
    }
}

TEST_CASE("make_plots splits the stream losslessly and drops the partial tail") {
    std::mt19937 rng(11);
    const int n_fft = 32;
    const int rows = 5;
    // 12 full chunks + a partial tail -> 2 plots of 5 rows, 2 chunks unused.
    const std::vector<cfloat> samples = random_samples(rng, 12 * 32 + 17);
    const FrontendConfig fc = config(1e6, n_fft, rows);

    const std::vector<frontend::TFPlot> plots = frontend::make_plots(samples, fc);
    REQUIRE(plots.size() == 2);
    CHECK(plots[0].start_seq == 0);
    CHECK(plots[1].start_seq == 5);

    for (std::size_t p = 0; p < plots.size(); ++p) {
        CHECK(plots[p].rows == rows);
        CHECK(plots[p].cols == n_fft);
        for (int r = 0; r < rows; ++r) {
            const std::size_t chunk_at = (p * rows + static_cast<std::size_t>(r)) * n_fft;
            const std::vector<float> expected =
                frontend::fft_row(std::span(samples).subspan(chunk_at, n_fft));
            CHECK(std::memcmp(plots[p].view().row(r), expected.data(),
                              expected.size() * sizeof(float)) == 0);
        }
    }

    SUBCASE("view geometry maps bins to physical units") {
        const TFPlotView v = plots[1].view();
        CHECK(v.dt_s() == doctest::Approx(32.0 / 1e6));
        CHECK(v.df_hz() == doctest::Approx(1e6 / 32.0));
        CHECK(v.row_start_time_s(2) == doctest::Approx((5 + 2) * 32.0 / 1e6));
        CHECK(v.col_center_freq_hz(16) == doctest::Approx(0.0));
        CHECK(v.col_center_freq_hz(0) == doctest::Approx(-0.5e6));
    }
}

TEST_CASE("file replay yields sequential chunks and scales i16 exactly") {
    SUBCASE("f32 file of 2048 samples at F=1024 gives chunks seq 0 and 1") {
        std::mt19937 rng(3);
        const std::vector<cfloat> samples = random_samples(rng, 2048);
        const std::string path = temp_path("specsense_replay.32cf");
        signals::write_iq32(path, samples);

        frontend::FileReplaySource source(path, 1024, SampleFormat::F32);
        CHECK_FALSE(source.paced());
        IQChunk chunk;
        REQUIRE(source.next(chunk));
        CHECK(chunk.seq == 0);
        REQUIRE(chunk.samples.size() == 1024);
        CHECK(std::memcmp(chunk.samples.data(), samples.data(), 1024 * sizeof(cfloat)) == 0);
        REQUIRE(source.next(chunk));
        CHECK(chunk.seq == 1);
        CHECK(std::memcmp(chunk.samples.data(), samples.data() + 1024,
                          1024 * sizeof(cfloat)) == 0);
        CHECK_FALSE(source.next(chunk));
        std::filesystem::remove(path);
    }

    SUBCASE("i16 samples scale by 1/32768") {
        const std::string path = temp_path("specsense_replay.i16");
        const std::int16_t raw[16] = {0,     16384, -32768, 32767, 1,   -1,  8192, -8192,
                                      12345, -9876, 100,    -100,  999, -999, 32000, -32000};
        {
            std::ofstream out(path, std::ios::binary);
            out.write(reinterpret_cast<const char*>(raw), sizeof(raw));
        }
        frontend::FileReplaySource source(path, 8, SampleFormat::I16);
        IQChunk chunk;
        REQUIRE(source.next(chunk));
        REQUIRE(chunk.samples.size() == 8);
        for (int i = 0; i < 8; ++i) {
            CHECK(chunk.samples[static_cast<std::size_t>(i)].real() ==
                  raw[2 * i] / 32768.0f);
            CHECK(chunk.samples[static_cast<std::size_t>(i)].imag() ==
                  raw[2 * i + 1] / 32768.0f);
        }
        CHECK_FALSE(source.next(chunk));
        std::filesystem::remove(path);
    }
}

TEST_CASE("memory source cycles its buffer until the chunk budget is spent") {
    std::mt19937 rng(5);
    const std::vector<cfloat> samples = random_samples(rng, 64); // 2 chunks of 32

    SUBCASE("zero budget means one pass") {
        frontend::MemorySource source(samples, 32);
        IQChunk chunk;
        int n = 0;
        while (source.next(chunk)) {
            CHECK(chunk.seq == static_cast<std::uint64_t>(n));
            ++n;
        }
        CHECK(n == 2);
    }

    SUBCASE("budget beyond the buffer wraps around") {
        frontend::MemorySource source(samples, 32, 5);
        IQChunk chunk;
        std::vector<IQChunk> got;
        while (source.next(chunk)) got.push_back(chunk);
        REQUIRE(got.size() == 5);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].seq == i);
            const cfloat* expect = samples.data() + (i % 2) * 32;
            CHECK(std::memcmp(got[i].samples.data(), expect, 32 * sizeof(cfloat)) == 0);
        }
    }
}

TEST_CASE("ping-pong buffer assembles alternating banks") {
    const FrontendConfig fc = config(1e6, 8, 4);
    std::vector<std::pair<int, std::uint64_t>> completed; // (bank, start_seq)
    PingPongBuffer buffer(fc, [&](int bank, const TFPlotView& view) {
        completed.emplace_back(bank, view.start_seq);
    });

    auto write_row = [&](std::uint64_t seq, float value) {
        float* slot = buffer.row_slot(seq);
        if (slot == nullptr) return false;
        for (int k = 0; k < 8; ++k) slot[k] = value;
        buffer.commit_row(seq);
        return true;
    };

    SUBCASE("2T rows produce two plots on alternating banks") {
        for (std::uint64_t seq = 0; seq < 8; ++seq) REQUIRE(write_row(seq, 1.0f));
        REQUIRE(completed.size() == 2);
        CHECK(completed[0] == std::pair{0, std::uint64_t{0}});
        CHECK(completed[1] == std::pair{1, std::uint64_t{4}});
        CHECK(buffer.windows_completed() == 2);
        CHECK(buffer.overruns() == 0);
        CHECK(buffer.rows_retired() == 8);
    }

    SUBCASE("T-1 rows produce nothing") {
        for (std::uint64_t seq = 0; seq < 3; ++seq) REQUIRE(write_row(seq, 1.0f));
        CHECK(completed.empty());
        CHECK(buffer.windows_completed() == 0);
    }

    SUBCASE("a reader holding its bank drops exactly one window per wrap") {
        for (std::uint64_t seq = 0; seq < 8; ++seq) REQUIRE(write_row(seq, 1.0f));
        REQUIRE(completed.size() == 2); // banks 0 and 1 both held now

        // Window 2 maps to held bank 0: all four rows bounce, one overrun.
        for (std::uint64_t seq = 8; seq < 12; ++seq) CHECK_FALSE(write_row(seq, 2.0f));
        CHECK(buffer.overruns() == 1);
        CHECK(buffer.windows_completed() == 2);

        buffer.release(0);
        buffer.release(1);

        // Window 4 lands in the freed bank 0 and completes normally.
        for (std::uint64_t seq = 16; seq < 20; ++seq) REQUIRE(write_row(seq, 3.0f));
        REQUIRE(completed.size() == 3);
        CHECK(completed[2] == std::pair{0, std::uint64_t{16}});
        CHECK(buffer.overruns() == 1);
        CHECK(buffer.rows_retired() == 16);
    }

    SUBCASE("lost ranges poison the in-flight window instead of wedging it") {
        REQUIRE(write_row(0, 1.0f));
        REQUIRE(write_row(1, 1.0f));
        buffer.mark_lost_range(2, 4); // rest of window 0 lost upstream
        CHECK(buffer.overruns() == 1);
        CHECK(buffer.windows_completed() == 0);
        // A late row of the poisoned window is refused.
        CHECK_FALSE(write_row(2, 1.0f));
        CHECK(buffer.rows_retired() == 5);
        // The next window is unaffected.
        for (std::uint64_t seq = 4; seq < 8; ++seq) REQUIRE(write_row(seq, 1.0f));
        CHECK(buffer.windows_completed() == 1);
    }
}

TEST_CASE("blocking row slots wait for release instead of dropping") {
    const FrontendConfig fc = config(1e6, 8, 2);
    std::atomic<int> completed{0};
    PingPongBuffer buffer(fc, [&](int, const TFPlotView&) { ++completed; });

    SUBCASE("a blocked writer resumes when the bank is released") {
        std::thread writer([&] {
            for (std::uint64_t seq = 0; seq < 6; ++seq) {
                float* slot = buffer.row_slot_blocking(seq);
                REQUIRE(slot != nullptr);
                for (int k = 0; k < 8; ++k) slot[k] = static_cast<float>(seq);
                buffer.commit_row(seq);
            }
        });

        // Windows 0 and 1 fill; the writer then blocks on window 2 until
        // bank 0 comes back.
        while (completed.load() < 2) std::this_thread::yield();
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        CHECK(buffer.rows_retired() == 4);

        buffer.release(0);
        writer.join();
        CHECK(completed.load() == 3);
        CHECK(buffer.overruns() == 0);
        CHECK(buffer.rows_retired() == 6);
    }

    SUBCASE("shutdown wakes a blocked writer with a refusal") {
        std::thread writer([&] {
            for (std::uint64_t seq = 0; seq < 4; ++seq) {
                float* slot = buffer.row_slot_blocking(seq);
                if (slot == nullptr) return;
                for (int k = 0; k < 8; ++k) slot[k] = 0.0f;
                buffer.commit_row(seq);
            }
        });
        while (completed.load() < 2) std::this_thread::yield();
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        buffer.shutdown();
        writer.join();
        CHECK(completed.load() == 2);
    }
}

TEST_CASE("udp source round-trips chunks with framing and gap handling") {
    SUBCASE("loopback stream arrives intact and ends on the marker") {
        std::mt19937 rng(21);
        const std::vector<cfloat> samples = random_samples(rng, 3 * 64);

        frontend::UdpSource source(0, 64, SampleFormat::F32, 5000);
        CHECK(source.paced());
        const std::uint16_t port = source.port();

        std::thread sender([&] {
            frontend::udp_send_stream("127.0.0.1", port, samples, 64, SampleFormat::F32);
        });

        std::vector<IQChunk> got;
        IQChunk chunk;
        while (source.next(chunk)) got.push_back(chunk);
        sender.join();

        REQUIRE(got.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(got[i].seq == i);
            CHECK(std::memcmp(got[i].samples.data(), samples.data() + i * 64,
                              64 * sizeof(cfloat)) == 0);
        }
        CHECK_FALSE(source.timed_out());
    }

    SUBCASE("sequence gaps surface as seq jumps; stale duplicates are dropped") {
        frontend::UdpSource source(0, 8, SampleFormat::F32, 5000);
        const std::uint16_t port = source.port();
        const std::vector<cfloat> payload(8, cfloat{1.0f, 0.0f});
        const std::size_t bytes = 8 * sizeof(cfloat);

        std::thread sender([&] {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            send_datagram(port, 0, payload.data(), bytes);
            send_datagram(port, 3, payload.data(), bytes); // gap: 1, 2 lost
            send_datagram(port, 3, payload.data(), bytes); // duplicate
            send_datagram(port, 1, payload.data(), bytes); // stale
            send_datagram(port, 4, payload.data(), bytes);
            send_datagram(port, 5, nullptr, 0); // end of stream
        });

        std::vector<std::uint64_t> seqs;
        IQChunk chunk;
        while (source.next(chunk)) seqs.push_back(chunk.seq);
        sender.join();
        CHECK(seqs == std::vector<std::uint64_t>{0, 3, 4});
    }

    SUBCASE("wrong payload size is a format error") {
        frontend::UdpSource source(0, 8, SampleFormat::F32, 5000);
        const std::uint16_t port = source.port();
        std::thread sender([&] {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            const char junk[12] = {};
            send_datagram(port, 0, junk, sizeof(junk));
        });
        IQChunk chunk;
        CHECK_THROWS_AS(source.next(chunk), FormatError);
        sender.join();
    }

    SUBCASE("a silent port times out") {
        frontend::UdpSource source(0, 8, SampleFormat::F32, 100);
        IQChunk chunk;
        CHECK_FALSE(source.next(chunk));
        CHECK(source.timed_out());
    }

    SUBCASE("i16 datagrams scale like i16 files") {
        frontend::UdpSource source(0, 8, SampleFormat::I16, 5000);
        const std::uint16_t port = source.port();
        std::vector<cfloat> samples(8);
        for (int i = 0; i < 8; ++i)
            samples[static_cast<std::size_t>(i)] = {static_cast<float>(i) / 64.0f,
                                                    static_cast<float>(-i) / 64.0f};
        std::thread sender([&] {
            frontend::udp_send_stream("127.0.0.1", port, samples, 8, SampleFormat::I16);
        });
        IQChunk chunk;
        REQUIRE(source.next(chunk));
        for (int i = 0; i < 8; ++i) {
            CHECK(chunk.samples[static_cast<std::size_t>(i)].real() ==
                  doctest::Approx(samples[static_cast<std::size_t>(i)].real())
                      .epsilon(1.0 / 32768.0));
        }
        while (source.next(chunk)) {
        }
        sender.join();
    }
}
