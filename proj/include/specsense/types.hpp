#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace specsense {

using cfloat = std::complex<float>;

// Axis-aligned time/frequency rectangle in physical units.
// Frequencies are baseband-relative (DC = 0, negative = below center),
// times are seconds from the start of the sample stream.
// Half-open on both axes: [t0, t1) x [f0, f1).
struct BoundingBox {
    double f0_hz = 0.0;
    double f1_hz = 0.0;
    double t0_s = 0.0;
    double t1_s = 0.0;

    double bandwidth_hz() const { return f1_hz - f0_hz; }
    double duration_s() const { return t1_s - t0_s; }
    double area() const { return bandwidth_hz() * duration_s(); }
};

// Same rectangle in TF-plot bin indices, half-open.
// t indexes rows (time), f indexes columns (frequency, DC-centered grid).
struct BinBox {
    int t0 = 0;
    int t1 = 0;
    int f0 = 0;
    int f1 = 0;

    int rows() const { return t1 - t0; }
    int cols() const { return f1 - f0; }
    long long area() const { return static_cast<long long>(rows()) * cols(); }
};

// Error hierarchy. Everything user-recoverable derives from Error so the CLI
// can catch one type, print the message, and exit nonzero.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad parameter values (negative sample rate, band outside Nyquist, ...).
class ValidationError : public Error {
  public:
    using Error::Error;
};

// Malformed binary payloads (.32cf length, datagram size).
class FormatError : public Error {
  public:
    using Error::Error;
};

// Malformed or incomplete JSON documents; message names the offending field.
class SchemaError : public Error {
  public:
    using Error::Error;
};

// I/O failures (missing file, socket setup).
class IoError : public Error {
  public:
    using Error::Error;
};

} // namespace specsense
