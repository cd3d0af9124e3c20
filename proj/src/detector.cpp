#include "specsense/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

namespace specsense::detector {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Shared histogram geometry so the fused per-plot path and the single-column
// entry point binarize identically, bit for bit.
struct BinScale {
    float lo = 0.0f;
    float scale = 0.0f;
    bool valid = false;
};

BinScale make_bin_scale(float lo, float hi) {
    BinScale s;
    s.lo = lo;
    s.scale = 256.0f / (hi - lo);
    s.valid = hi > lo && std::isfinite(s.scale);
    return s;
}

inline int bin_of(float v, const BinScale& s) {
    const int b = static_cast<int>((v - s.lo) * s.scale);
    return b > 255 ? 255 : b;
}

// Split index in [0, 255] maximizing between-class variance; class 0 is bins
// <= split. Ties resolve to the lowest split.
int otsu_split(const std::uint32_t* hist, std::uint64_t total) {
    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += static_cast<double>(i) * hist[i];

    int best = 0;
    double best_var = -1.0;
    std::uint64_t w0 = 0;
    double sum0 = 0.0;
    for (int i = 0; i < 256; ++i) {
        w0 += hist[i];
        sum0 += static_cast<double>(i) * hist[i];
        const std::uint64_t w1 = total - w0;
        double var = 0.0;
        if (w0 > 0 && w1 > 0) {
            const double mu0 = sum0 / static_cast<double>(w0);
            const double mu1 = (sum_all - sum0) / static_cast<double>(w1);
            var = static_cast<double>(w0) * static_cast<double>(w1) * (mu0 - mu1) * (mu0 - mu1);
        }
        if (var > best_var) {
            best_var = var;
            best = i;
        }
    }
    return best;
}

float otsu_edge_value(const BinScale& s, float hi, int split) {
    return static_cast<float>(static_cast<double>(s.lo) +
                              (static_cast<double>(split) + 1.0) *
                                  (static_cast<double>(hi) - s.lo) / 256.0);
}

// reflect-101 mirror: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
inline int mirror_index(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * (n - 1) - i;
    return i;
}

// Solves the (order+1)x(order+1) system G x = e0 by Gaussian elimination
// with partial pivoting; G is tiny and well conditioned for sane windows.
std::vector<double> solve_e0(std::vector<double> g, int n) {
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    x[0] = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(g[static_cast<std::size_t>(r) * n + col]) >
                std::abs(g[static_cast<std::size_t>(piv) * n + col]))
                piv = r;
        if (piv != col) {
            for (int c = 0; c < n; ++c)
                std::swap(g[static_cast<std::size_t>(col) * n + c],
                          g[static_cast<std::size_t>(piv) * n + c]);
            std::swap(x[static_cast<std::size_t>(col)], x[static_cast<std::size_t>(piv)]);
        }
        const double d = g[static_cast<std::size_t>(col) * n + col];
        if (d == 0.0) throw ValidationError("savgol normal equations are singular");
        for (int r = col + 1; r < n; ++r) {
            const double f = g[static_cast<std::size_t>(r) * n + col] / d;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c)
                g[static_cast<std::size_t>(r) * n + c] -= f * g[static_cast<std::size_t>(col) * n + c];
            x[static_cast<std::size_t>(r)] -= f * x[static_cast<std::size_t>(col)];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = x[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c)
            acc -= g[static_cast<std::size_t>(r) * n + c] * x[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(r)] = acc / g[static_cast<std::size_t>(r) * n + r];
    }
    return x;
}

// Center-sample evaluation weights of the least-squares polynomial fit over
// offsets [-h, h]: c_j = sum_a x_a j^a where x solves (A^T A) x = e0.
std::vector<double> savgol_weights(int window, int order) {
    const int h = (window - 1) / 2;
    const int n = order + 1;
    std::vector<double> g(static_cast<std::size_t>(n) * n, 0.0);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            double acc = 0.0;
            for (int j = -h; j <= h; ++j) acc += std::pow(j, a + b);
            g[static_cast<std::size_t>(a) * n + b] = acc;
        }
    const std::vector<double> x = solve_e0(std::move(g), n);
    std::vector<double> weights(static_cast<std::size_t>(window));
    for (int j = -h; j <= h; ++j) {
        double c = 0.0;
        double jp = 1.0;
        for (int a = 0; a < n; ++a) {
            c += x[static_cast<std::size_t>(a)] * jp;
            jp *= j;
        }
        weights[static_cast<std::size_t>(j + h)] = c;
    }
    return weights;
}

void check_savgol_params(int window, int order) {
    if (window < 5 || window % 2 == 0)
        throw ValidationError("savgol window must be odd and >= 5");
    if (order < 1 || order >= window)
        throw ValidationError("savgol order must be in [1, window)");
}

} // namespace

void DetectorConfig::validate(int n_cols) const {
    check_savgol_params(savgol_window, savgol_order);
    if (savgol_window > n_cols)
        throw ValidationError("savgol window exceeds the number of frequency bins");
    if (psd_margin_db < 0.0) throw ValidationError("psd_margin_db must be non-negative");
    if (min_component_area < 1) throw ValidationError("min_component_area must be >= 1");
}

StageTimes& StageTimes::operator+=(const StageTimes& o) {
    psd += o.psd;
    floor_prune += o.floor_prune;
    binarize += o.binarize;
    morphology += o.morphology;
    label += o.label;
    return *this;
}

void estimate_psd_into(const frontend::TFPlotView& plot, int col_begin, int col_end, float* out) {
    if (plot.rows < 1 || plot.cols < 1) throw ValidationError("empty TF plot");
    if (col_begin < 0 || col_end > plot.cols || col_begin >= col_end)
        throw ValidationError("PSD column range out of bounds");
    const int w = col_end - col_begin;
    std::vector<double> acc(static_cast<std::size_t>(w), 0.0);
    for (int r = 0; r < plot.rows; ++r) {
        const float* row = plot.row(r) + col_begin;
        for (int k = 0; k < w; ++k)
            acc[static_cast<std::size_t>(k)] += static_cast<double>(row[k]) * row[k];
    }
    const double inv_rows = 1.0 / plot.rows;
    for (int k = 0; k < w; ++k)
        out[k] = static_cast<float>(acc[static_cast<std::size_t>(k)] * inv_rows);
}

std::vector<float> estimate_psd(const frontend::TFPlotView& plot) {
    std::vector<float> psd(static_cast<std::size_t>(plot.cols));
    estimate_psd_into(plot, 0, plot.cols, psd.data());
    return psd;
}

std::vector<float> savgol_smooth(std::span<const float> values, int window, int order) {
    check_savgol_params(window, order);
    const int n = static_cast<int>(values.size());
    if (n < window) throw ValidationError("savgol window exceeds the input length");

    const std::vector<double> w = savgol_weights(window, order);
    const int h = (window - 1) / 2;
    std::vector<float> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = -h; j <= h; ++j)
            acc += w[static_cast<std::size_t>(j + h)] *
                   values[static_cast<std::size_t>(mirror_index(i + j, n))];
        out[static_cast<std::size_t>(i)] = static_cast<float>(acc);
    }
    return out;
}

void smooth_and_floor(PsdProfile& profile, const DetectorConfig& config) {
    // The polynomial fit runs on the dB curve: fitting raw power directly
    // would let a cubic undershoot far below zero at a strong band edge and
    // hand back a meaningless (even negative) floor. The exponential map back
    // to power preserves every strict local minimum.
    std::vector<float> db(profile.raw.size());
    for (std::size_t k = 0; k < db.size(); ++k)
        db[k] = profile.raw[k] > 0.0f ? 10.0f * std::log10(profile.raw[k]) : -3000.0f;
    const std::vector<float> smoothed_db =
        savgol_smooth(db, config.savgol_window, config.savgol_order);
    profile.smoothed.resize(smoothed_db.size());
    for (std::size_t k = 0; k < smoothed_db.size(); ++k)
        profile.smoothed[k] = std::pow(10.0f, smoothed_db[k] / 10.0f);
    const std::vector<float>& s = profile.smoothed;
    const int n = static_cast<int>(s.size());

    // Lowest strict local minimum; a flat plateau counts once, at its first
    // index. Falls back to the global minimum when the curve is monotonic or
    // constant.
    bool found = false;
    float floor = std::numeric_limits<float>::infinity();
    int i = 1;
    while (i < n - 1) {
        int j = i;
        while (j + 1 < n && s[static_cast<std::size_t>(j + 1)] == s[static_cast<std::size_t>(i)]) ++j;
        const bool left_up = s[static_cast<std::size_t>(i - 1)] > s[static_cast<std::size_t>(i)];
        const bool right_up = j + 1 < n && s[static_cast<std::size_t>(j + 1)] > s[static_cast<std::size_t>(i)];
        if (left_up && right_up && s[static_cast<std::size_t>(i)] < floor) {
            floor = s[static_cast<std::size_t>(i)];
            found = true;
        }
        i = j + 1;
    }
    if (!found) floor = *std::min_element(s.begin(), s.end());

    profile.noise_floor = floor;
    profile.threshold =
        static_cast<float>(static_cast<double>(floor) * std::pow(10.0, config.psd_margin_db / 10.0));
}

std::vector<int> prune_columns(const PsdProfile& profile) {
    std::vector<int> active;
    for (int k = 0; k < static_cast<int>(profile.raw.size()); ++k)
        if (profile.raw[static_cast<std::size_t>(k)] >= profile.threshold) active.push_back(k);
    return active;
}

OtsuResult otsu_threshold(std::span<const float> values) {
    if (values.empty()) throw ValidationError("otsu on an empty column");
    float lo = values[0], hi = values[0];
    for (float v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const BinScale s = make_bin_scale(lo, hi);
    if (!s.valid) return {false, 0.0f};

    std::uint32_t hist[256] = {};
    for (float v : values) ++hist[bin_of(v, s)];
    const int split = otsu_split(hist, values.size());
    return {true, otsu_edge_value(s, hi, split)};
}

void binarize_columns(const frontend::TFPlotView& plot, std::span<const int> active_columns,
                      int col_begin, int col_end, Mask& out) {
    const int rows = plot.rows;
    const int cols = plot.cols;
    if (out.rows != rows || out.cols != cols)
        throw ValidationError("binarize output mask shape mismatch");
    if (col_begin < 0 || col_end > cols || col_begin > col_end)
        throw ValidationError("binarize column range out of bounds");
    const int w = col_end - col_begin;
    if (w == 0) return;

    // Pass 1: min/max per column in range (branchless, row-major).
    std::vector<float> lo(static_cast<std::size_t>(w), std::numeric_limits<float>::infinity());
    std::vector<float> hi(static_cast<std::size_t>(w), -std::numeric_limits<float>::infinity());
    for (int r = 0; r < rows; ++r) {
        const float* row = plot.row(r) + col_begin;
        for (int k = 0; k < w; ++k) {
            lo[static_cast<std::size_t>(k)] = std::min(lo[static_cast<std::size_t>(k)], row[k]);
            hi[static_cast<std::size_t>(k)] = std::max(hi[static_cast<std::size_t>(k)], row[k]);
        }
    }

    // Compact the active, non-constant columns in range so the histogram
    // pass touches nothing else.
    struct ActiveCol {
        int k; // plot-wide column index
        BinScale s;
    };
    std::vector<ActiveCol> act;
    for (int k : active_columns) {
        if (k < 0 || k >= cols) throw ValidationError("active column index out of range");
        if (k < col_begin || k >= col_end) continue;
        const BinScale s = make_bin_scale(lo[static_cast<std::size_t>(k - col_begin)],
                                          hi[static_cast<std::size_t>(k - col_begin)]);
        if (s.valid) act.push_back({k, s});
    }

    // Per-column thresholds; inactive or constant columns keep +inf so the
    // mask pass stays branch-free.
    std::vector<float> thr(static_cast<std::size_t>(w), std::numeric_limits<float>::infinity());
    if (!act.empty()) {
        // Pass 2: per-column histograms of the compacted set.
        std::vector<std::uint32_t> hist(act.size() * 256, 0);
        for (int r = 0; r < rows; ++r) {
            const float* row = plot.row(r);
            for (std::size_t i = 0; i < act.size(); ++i)
                ++hist[i * 256 + static_cast<std::size_t>(bin_of(row[act[i].k], act[i].s))];
        }
        for (std::size_t i = 0; i < act.size(); ++i) {
            const int split = otsu_split(hist.data() + i * 256, static_cast<std::uint64_t>(rows));
            thr[static_cast<std::size_t>(act[i].k - col_begin)] =
                otsu_edge_value(act[i].s, hi[static_cast<std::size_t>(act[i].k - col_begin)], split);
        }
    }

    // Pass 3: threshold.
    for (int r = 0; r < rows; ++r) {
        const float* row = plot.row(r) + col_begin;
        std::uint8_t* mrow = out.row(r) + col_begin;
        for (int k = 0; k < w; ++k)
            mrow[k] = row[k] > thr[static_cast<std::size_t>(k)] ? 1 : 0;
    }
}

Mask binarize(const frontend::TFPlotView& plot, std::span<const int> active_columns) {
    Mask mask(plot.rows, plot.cols);
    binarize_columns(plot, active_columns, 0, plot.cols, mask);
    return mask;
}

namespace {

void check_se(const Mask& mask, StructuringElement se) {
    if (se.rows < 1 || se.cols < 1 || se.rows % 2 == 0 || se.cols % 2 == 0)
        throw ValidationError("structuring element dimensions must be odd and >= 1");
    if (mask.rows < 1 || mask.cols < 1) throw ValidationError("empty mask");
}

// Vertical (rows x 1) pass over columns [c0, c1) of dst. Erode: every
// in-window cell must be 1 and the window must fit inside the image
// (outside = background). Dilate: any in-range cell 1.
void vertical_pass_cols(const Mask& in, Mask& dst, int radius, bool erode_op, int c0, int c1) {
    const int w = c1 - c0;
    if (w <= 0) return;
    for (int r = 0; r < in.rows; ++r) {
        std::uint8_t* out = dst.row(r) + c0;
        if (erode_op && (r - radius < 0 || r + radius >= in.rows)) {
            std::memset(out, 0, static_cast<std::size_t>(w));
            continue;
        }
        const int r0 = std::max(0, r - radius);
        const int r1 = std::min(in.rows - 1, r + radius);
        std::memcpy(out, in.row(r0) + c0, static_cast<std::size_t>(w));
        if (erode_op) {
            for (int q = r0 + 1; q <= r1; ++q) {
                const std::uint8_t* src = in.row(q) + c0;
                for (int k = 0; k < w; ++k) out[k] &= src[k];
            }
        } else {
            for (int q = r0 + 1; q <= r1; ++q) {
                const std::uint8_t* src = in.row(q) + c0;
                for (int k = 0; k < w; ++k) out[k] |= src[k];
            }
        }
    }
}

// Horizontal (1 x cols) pass over columns [c0, c1) of dst, reading in on
// [c0 - radius, c1 + radius) with out-of-image cells as background. The bulk
// of each segment runs guard-free; only cells whose window crosses an image
// edge take the conditional path.
void horizontal_pass_cols(const Mask& in, Mask& dst, int radius, bool erode_op, int c0, int c1) {
    const int w = c1 - c0;
    if (w <= 0) return;
    const int cols = in.cols;
    for (int r = 0; r < in.rows; ++r) {
        const std::uint8_t* src = in.row(r);
        std::uint8_t* out = dst.row(r) + c0;
        std::memcpy(out, src + c0, static_cast<std::size_t>(w));
        for (int d = 1; d <= radius; ++d) {
            const int mid_b = std::clamp(d - c0, 0, w);          // k < mid_b: left neighbor off-image
            const int mid_e = std::clamp(cols - d - c0, mid_b, w); // k >= mid_e: right neighbor off
            if (erode_op) {
                std::memset(out, 0, static_cast<std::size_t>(mid_b));
                for (int k = mid_b; k < mid_e; ++k) out[k] &= src[c0 + k + d] & src[c0 + k - d];
                std::memset(out + mid_e, 0, static_cast<std::size_t>(w - mid_e));
            } else {
                for (int k = 0; k < mid_b; ++k) {
                    std::uint8_t v = out[k];
                    if (c0 + k + d < cols) v |= src[c0 + k + d];
                    out[k] = v;
                }
                for (int k = mid_b; k < mid_e; ++k) out[k] |= src[c0 + k + d] | src[c0 + k - d];
                for (int k = mid_e; k < w; ++k) {
                    std::uint8_t v = out[k];
                    if (c0 + k - d >= 0) v |= src[c0 + k - d];
                    out[k] = v;
                }
            }
        }
    }
}

// One erosion or dilation into columns [c0, c1) of out, routing through
// scratch.a when the element is genuinely 2-D.
void single_op_cols(const Mask& in, Mask& out, StructuringElement se, bool erode_op, int c0,
                    int c1, MorphScratch& scratch) {
    const int vr = (se.rows - 1) / 2;
    const int hr = (se.cols - 1) / 2;
    if (vr > 0 && hr > 0) {
        const int e0 = std::max(0, c0 - hr);
        const int e1 = std::min(in.cols, c1 + hr);
        if (scratch.a.rows != in.rows || scratch.a.cols != in.cols)
            scratch.a = Mask(in.rows, in.cols);
        vertical_pass_cols(in, scratch.a, vr, erode_op, e0, e1);
        horizontal_pass_cols(scratch.a, out, hr, erode_op, c0, c1);
    } else if (vr > 0) {
        vertical_pass_cols(in, out, vr, erode_op, c0, c1);
    } else if (hr > 0) {
        horizontal_pass_cols(in, out, hr, erode_op, c0, c1);
    } else {
        for (int r = 0; r < in.rows; ++r)
            std::memcpy(out.row(r) + c0, in.row(r) + c0, static_cast<std::size_t>(c1 - c0));
    }
}

} // namespace

void morphology_cols(const Mask& src, Mask& dst, MorphOp op, StructuringElement se,
                     int col_begin, int col_end, MorphScratch& scratch) {
    check_se(src, se);
    if (dst.rows != src.rows || dst.cols != src.cols)
        throw ValidationError("morphology output mask shape mismatch");
    if (col_begin < 0 || col_end > src.cols || col_begin > col_end)
        throw ValidationError("morphology column range out of bounds");

    const int hr = (se.cols - 1) / 2;
    switch (op) {
    case MorphOp::Erode:
        single_op_cols(src, dst, se, true, col_begin, col_end, scratch);
        return;
    case MorphOp::Dilate:
        single_op_cols(src, dst, se, false, col_begin, col_end, scratch);
        return;
    case MorphOp::Open:
    case MorphOp::Close: {
        // The second stage reads hr columns past the target on each side, so
        // the first stage covers the widened (clamped) range.
        const int e0 = std::max(0, col_begin - hr);
        const int e1 = std::min(src.cols, col_end + hr);
        if (scratch.b.rows != src.rows || scratch.b.cols != src.cols)
            scratch.b = Mask(src.rows, src.cols);
        const bool first_erodes = op == MorphOp::Open;
        single_op_cols(src, scratch.b, se, first_erodes, e0, e1, scratch);
        single_op_cols(scratch.b, dst, se, !first_erodes, col_begin, col_end, scratch);
        return;
    }
    }
    throw ValidationError("unknown morphology op");
}

Mask morphology(const Mask& mask, MorphOp op, StructuringElement se) {
    check_se(mask, se);
    Mask out(mask.rows, mask.cols);
    MorphScratch scratch;
    morphology_cols(mask, out, op, se, 0, mask.cols, scratch);
    return out;
}

Mask consolidate(const Mask& mask, bool one_d_opening_along_time) {
    MorphScratch scratch;
    Mask a(mask.rows, mask.cols);
    Mask b(mask.rows, mask.cols);
    morphology_cols(mask, a, MorphOp::Close, {3, 3}, 0, mask.cols, scratch);
    morphology_cols(a, b, MorphOp::Open, {3, 3}, 0, mask.cols, scratch);
    const StructuringElement line =
        one_d_opening_along_time ? StructuringElement{3, 1} : StructuringElement{1, 3};
    morphology_cols(b, a, MorphOp::Open, line, 0, mask.cols, scratch);
    return a;
}

namespace {

struct Run {
    int row;
    int begin, end; // half-open column range
    int label;      // provisional label, resolved through the union-find
};

// Row-major run scan with 4-connected union-find merging, an area cutoff, and
// dense component ids ordered by each component's first pixel. run_ids gets
// the dense id of every run, or -1 for runs below the area cutoff.
std::vector<ComponentExtent> resolve_components(const Mask& mask, int min_component_area,
                                                std::vector<Run>& runs,
                                                std::vector<int>& run_ids) {
    if (min_component_area < 1) throw ValidationError("min_component_area must be >= 1");
    const int rows = mask.rows;
    const int cols = mask.cols;

    std::vector<int> parent;
    auto find = [&parent](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };

    runs.clear();
    std::size_t prev_b = 0, prev_e = 0; // index range of the previous row's runs
    for (int r = 0; r < rows; ++r) {
        const std::uint8_t* row = mask.row(r);
        const std::size_t cur_b = runs.size();
        int k = 0;
        std::size_t pi = prev_b;
        while (k < cols) {
            // Masks are mostly background; skip zero bytes a word at a time.
            while (k + 8 <= cols) {
                std::uint64_t word;
                std::memcpy(&word, row + k, sizeof(word));
                if (word != 0) break;
                k += 8;
            }
            while (k < cols && !row[k]) ++k;
            if (k >= cols) break;
            Run run{r, k, k, -1};
            while (k < cols && row[k]) ++k;
            run.end = k;
            // 4-connectivity: union with previous-row runs sharing a column.
            while (pi < prev_e && runs[pi].end <= run.begin) ++pi;
            for (std::size_t q = pi; q < prev_e && runs[q].begin < run.end; ++q) {
                const int other = find(runs[q].label);
                if (run.label < 0) {
                    run.label = other;
                } else {
                    const int mine = find(run.label);
                    if (mine != other)
                        parent[static_cast<std::size_t>(std::max(mine, other))] =
                            std::min(mine, other);
                    run.label = std::min(mine, other);
                }
            }
            if (run.label < 0) {
                run.label = static_cast<int>(parent.size());
                parent.push_back(run.label);
            }
            runs.push_back(run);
        }
        prev_b = cur_b;
        prev_e = runs.size();
    }

    std::vector<long long> root_area(parent.size(), 0);
    for (const Run& run : runs)
        root_area[static_cast<std::size_t>(find(run.label))] += run.end - run.begin;

    // Dense ids in row-major order of each component's first pixel, with the
    // area filter applied before numbering.
    std::vector<int> dense(parent.size(), -1);
    std::vector<ComponentExtent> extents;
    run_ids.assign(runs.size(), -1);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const Run& run = runs[i];
        const int root = find(run.label);
        if (root_area[static_cast<std::size_t>(root)] < min_component_area) continue;
        int id = dense[static_cast<std::size_t>(root)];
        if (id < 0) {
            id = static_cast<int>(extents.size());
            dense[static_cast<std::size_t>(root)] = id;
            extents.push_back({run.row, run.row, run.begin, run.end - 1, 0});
        }
        ComponentExtent& e = extents[static_cast<std::size_t>(id)];
        e.min_t = std::min(e.min_t, run.row);
        e.max_t = std::max(e.max_t, run.row);
        e.min_f = std::min(e.min_f, run.begin);
        e.max_f = std::max(e.max_f, run.end - 1);
        e.area += run.end - run.begin;
        run_ids[i] = id;
    }
    return extents;
}

} // namespace

std::vector<ComponentExtent> component_extents(const Mask& mask, int min_component_area) {
    std::vector<Run> runs;
    std::vector<int> run_ids;
    return resolve_components(mask, min_component_area, runs, run_ids);
}

LabeledComponents label_components(const Mask& mask, int min_component_area) {
    std::vector<Run> runs;
    std::vector<int> run_ids;
    LabeledComponents out;
    out.extents = resolve_components(mask, min_component_area, runs, run_ids);
    out.rows = mask.rows;
    out.cols = mask.cols;
    out.labels.assign(static_cast<std::size_t>(mask.rows) * mask.cols, 0);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (run_ids[i] < 0) continue;
        std::int32_t* lr =
            out.labels.data() + static_cast<std::size_t>(runs[i].row) * mask.cols;
        std::fill(lr + runs[i].begin, lr + runs[i].end,
                  static_cast<std::int32_t>(run_ids[i] + 1));
    }
    return out;
}

BinBox extent_to_bin_box(const ComponentExtent& e) {
    return {e.min_t, e.max_t + 1, e.min_f, e.max_f + 1};
}

BoundingBox bin_box_to_physical(const BinBox& b, const frontend::TFPlotView& plot) {
    BoundingBox out;
    const double dt = plot.dt_s();
    const double df = plot.df_hz();
    out.t0_s = (static_cast<double>(plot.start_seq) + b.t0) * dt;
    out.t1_s = (static_cast<double>(plot.start_seq) + b.t1) * dt;
    out.f0_hz = (b.f0 - plot.cols / 2) * df;
    out.f1_hz = (b.f1 - plot.cols / 2) * df;
    return out;
}

Detections detect(const frontend::TFPlotView& plot, const DetectorConfig& config,
                  StageTimes* times) {
    config.validate(plot.cols);
    Detections det;

    auto t0 = Clock::now();
    det.psd.raw = estimate_psd(plot);
    if (times) times->psd += seconds_since(t0);

    t0 = Clock::now();
    smooth_and_floor(det.psd, config);
    det.active_columns = prune_columns(det.psd);
    if (times) times->floor_prune += seconds_since(t0);

    t0 = Clock::now();
    Mask mask = binarize(plot, det.active_columns);
    if (times) times->binarize += seconds_since(t0);

    t0 = Clock::now();
    mask = consolidate(mask, config.one_d_opening_along_time);
    if (times) times->morphology += seconds_since(t0);

    t0 = Clock::now();
    const std::vector<ComponentExtent> extents =
        component_extents(mask, config.min_component_area);
    for (const ComponentExtent& e : extents) {
        const BinBox bb = extent_to_bin_box(e);
        det.bin_boxes.push_back(bb);
        det.boxes.push_back(bin_box_to_physical(bb, plot));
    }
    if (times) times->label += seconds_since(t0);

    return det;
}

} // namespace specsense::detector
