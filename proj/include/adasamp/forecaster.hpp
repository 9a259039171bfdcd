#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "adasamp/rng.hpp"
#include "adasamp/timeseries.hpp"

namespace adasamp {

/// Architecture and optimizer settings for the recurrent forecaster.
struct NetConfig {
    int num_layers = 2;
    int hidden_size = 40;
    double dropout = 0.1;        // inter-layer only, off at forecast time
    double learning_rate = 1e-3;
    int epochs = 100;
    int batches_per_epoch = 16;
    int batch_size = 32;

    void validate() const {
        if (num_layers < 1) throw std::invalid_argument("net: num_layers must be >= 1");
        if (hidden_size < 1) throw std::invalid_argument("net: hidden_size must be >= 1");
        if (!(dropout >= 0.0 && dropout < 1.0))
            throw std::invalid_argument("net: dropout must be in [0,1)");
        if (!(learning_rate >= 0.0))
            throw std::invalid_argument("net: learning_rate must be >= 0");
        if (epochs < 0) throw std::invalid_argument("net: epochs must be >= 0");
        if (batches_per_epoch < 1) throw std::invalid_argument("net: batches_per_epoch must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("net: batch_size must be >= 1");
    }
};

inline nlohmann::ordered_json net_config_to_json(const NetConfig& c) {
    nlohmann::ordered_json j;
    j["num_layers"] = c.num_layers;
    j["hidden_size"] = c.hidden_size;
    j["dropout"] = c.dropout;
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["batches_per_epoch"] = c.batches_per_epoch;
    j["batch_size"] = c.batch_size;
    return j;
}

inline NetConfig net_config_from_json(const nlohmann::json& j) {
    NetConfig c;
    c.num_layers = j.value("num_layers", c.num_layers);
    c.hidden_size = j.value("hidden_size", c.hidden_size);
    c.dropout = j.value("dropout", c.dropout);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batches_per_epoch = j.value("batches_per_epoch", c.batches_per_epoch);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.validate();
    return c;
}

/// Full flat parameter vector plus the mask of adaptive positions. The
/// adaptive subset is the recurrent layers above the first one plus the
/// output head; the complement (layer one) is the frozen part.
struct WeightPartition {
    std::vector<double> weights;
    std::vector<std::uint8_t> ada_mask;  // 1 where the coordinate is adaptive
    NetConfig config;
    std::uint64_t seed = 0;

    int param_count() const { return static_cast<int>(weights.size()); }
};

enum class Trainable { All, AdaOnly };

/// Picks 1-based window starts inside a series; the trainer draws the series
/// itself uniformly.
class WindowSampler {
public:
    virtual ~WindowSampler() = default;
    virtual int sample_start(int series_index, int series_length, int window_length,
                             Rng& rng) const = 0;
};

class UniformWindowSampler : public WindowSampler {
public:
    int sample_start(int /*series_index*/, int series_length, int window_length,
                     Rng& rng) const override {
        const auto range = valid_start_range(series_length, window_length, 0);
        return range.lo + rng.uniform_int(range.size());
    }
};

namespace detail {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

constexpr double kSigmaFloor = 1e-6;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Offsets of each block in the flat parameter vector. Per layer the blocks
/// are W (3H x in), U (3H x H), b (3H) with gate rows ordered [r; z; n];
/// the head is A (2 x H), b (2).
struct NetLayout {
    int num_layers = 0;
    int hidden = 0;
    std::vector<int> layer_offset;
    int head_offset = 0;
    int total = 0;

    static NetLayout from(const NetConfig& cfg) {
        NetLayout l;
        l.num_layers = cfg.num_layers;
        l.hidden = cfg.hidden_size;
        int off = 0;
        for (int i = 0; i < cfg.num_layers; ++i) {
            l.layer_offset.push_back(off);
            off += l.layer_params(i);
        }
        l.head_offset = off;
        l.total = off + 2 * l.hidden + 2;
        return l;
    }

    int input_dim(int layer) const { return layer == 0 ? 1 : hidden; }
    int layer_params(int layer) const {
        return 3 * hidden * (input_dim(layer) + hidden + 1);
    }
    int w_offset(int layer) const { return layer_offset[layer]; }
    int u_offset(int layer) const {
        return layer_offset[layer] + 3 * hidden * input_dim(layer);
    }
    int b_offset(int layer) const { return u_offset(layer) + 3 * hidden * hidden; }
};

/// Eigen views into a flat parameter (or gradient) vector.
template <bool IsConst>
struct NetViewT {
    using Ptr = std::conditional_t<IsConst, const double*, double*>;
    using MapM = Eigen::Map<std::conditional_t<IsConst, const Matrix, Matrix>>;
    using MapV = Eigen::Map<std::conditional_t<IsConst, const Vector, Vector>>;

    const NetLayout& layout;
    Ptr data;

    MapM W(int l) const {
        return MapM(data + layout.w_offset(l), 3 * layout.hidden, layout.input_dim(l));
    }
    MapM U(int l) const {
        return MapM(data + layout.u_offset(l), 3 * layout.hidden, layout.hidden);
    }
    MapV b(int l) const { return MapV(data + layout.b_offset(l), 3 * layout.hidden); }
    MapM head_A() const { return MapM(data + layout.head_offset, 2, layout.hidden); }
    MapV head_b() const {
        return MapV(data + layout.head_offset + 2 * layout.hidden, 2);
    }
};

using ConstNetView = NetViewT<true>;
using MutNetView = NetViewT<false>;

struct StepCache {
    Matrix x;      // layer input after dropout (in x B)
    Matrix r, z, n, q;  // gate activations and q = r .* h_prev (H x B)
    Matrix h;      // layer output (H x B)
    Matrix mask;   // dropout mask applied to this layer's output (empty if none)
};

/// One GRU cell step for all batch columns. h_prev is H x B, x is in x B.
/// Gates: r, z = sigmoid(W x + U h_prev + b); n = tanh(W_n x + U_n (r.*h_prev) + b_n);
/// h = z .* h_prev + (1 - z) .* n.
inline void cell_forward(const ConstNetView& net, int layer, const Matrix& x,
                         const Matrix& h_prev, StepCache& cache) {
    const int H = net.layout.hidden;
    Matrix gates = net.W(layer) * x + net.b(layer).replicate(1, x.cols());
    gates.topRows(2 * H).noalias() += net.U(layer).topRows(2 * H) * h_prev;
    cache.r = gates.topRows(H).unaryExpr([](double v) { return sigmoid(v); });
    cache.z = gates.middleRows(H, H).unaryExpr([](double v) { return sigmoid(v); });
    cache.q = cache.r.cwiseProduct(h_prev);
    Matrix an = gates.bottomRows(H);
    an.noalias() += net.U(layer).bottomRows(H) * cache.q;
    cache.n = an.array().tanh().matrix();
    cache.h = cache.z.cwiseProduct(h_prev) +
              (1.0 - cache.z.array()).matrix().cwiseProduct(cache.n);
    cache.x = x;
}

/// Backward through one cell step. dh is the loss gradient wrt cache.h;
/// accumulates parameter gradients into gview and returns gradients wrt
/// h_prev (into dh_prev) and the input (into dx, optional for layer 0).
inline void cell_backward(const ConstNetView& net, const MutNetView& gview,
                          int layer, const StepCache& cache, const Matrix& h_prev,
                          const Matrix& dh, Matrix& dh_prev, Matrix* dx) {
    const int H = net.layout.hidden;
    const Matrix dz = dh.cwiseProduct(h_prev - cache.n);
    const Matrix daz = dz.cwiseProduct(cache.z).cwiseProduct((1.0 - cache.z.array()).matrix());
    const Matrix dn = dh.cwiseProduct((1.0 - cache.z.array()).matrix());
    const Matrix dan = dn.cwiseProduct((1.0 - cache.n.array().square()).matrix());
    const Matrix dq = net.U(layer).bottomRows(H).transpose() * dan;
    const Matrix dr = dq.cwiseProduct(h_prev);
    const Matrix dar = dr.cwiseProduct(cache.r).cwiseProduct((1.0 - cache.r.array()).matrix());

    dh_prev = dh.cwiseProduct(cache.z) + dq.cwiseProduct(cache.r);
    dh_prev.noalias() += net.U(layer).topRows(H).transpose() * dar;
    dh_prev.noalias() += net.U(layer).middleRows(H, H).transpose() * daz;

    auto gW = gview.W(layer);
    auto gU = gview.U(layer);
    auto gb = gview.b(layer);
    gW.topRows(H).noalias() += dar * cache.x.transpose();
    gW.middleRows(H, H).noalias() += daz * cache.x.transpose();
    gW.bottomRows(H).noalias() += dan * cache.x.transpose();
    gU.topRows(H).noalias() += dar * h_prev.transpose();
    gU.middleRows(H, H).noalias() += daz * h_prev.transpose();
    gU.bottomRows(H).noalias() += dan * cache.q.transpose();
    gb.topRows(H) += dar.rowwise().sum();
    gb.middleRows(H, H) += daz.rowwise().sum();
    gb.bottomRows(H) += dan.rowwise().sum();

    if (dx != nullptr) {
        dx->noalias() = net.W(layer).topRows(H).transpose() * dar;
        dx->noalias() += net.W(layer).middleRows(H, H).transpose() * daz;
        dx->noalias() += net.W(layer).bottomRows(H).transpose() * dan;
    }
}

}  // namespace detail

/// Builds a fresh network. Weights are uniform in (-1/sqrt(H), +1/sqrt(H)),
/// deterministic per seed. The adaptive mask covers every layer above the
/// first plus the output head, so single-layer nets adapt the head only.
inline WeightPartition build_model(const NetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const auto layout = detail::NetLayout::from(cfg);
    WeightPartition wp;
    wp.config = cfg;
    wp.seed = seed;
    wp.weights.resize(layout.total);
    wp.ada_mask.assign(layout.total, 0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_size));
    Rng rng(derive_seed(seed, {stream_key("init")}));
    for (double& w : wp.weights) w = rng.uniform(-bound, bound);
    const int ada_from = cfg.num_layers > 1 ? layout.layer_offset[1] : layout.head_offset;
    std::fill(wp.ada_mask.begin() + ada_from, wp.ada_mask.end(), 1);
    return wp;
}

namespace detail {

/// Teacher-forced NLL over the target portion of a batch of scaled windows
/// (windows is c x B, one column per window). If grad != nullptr the backward
/// pass runs and the gradient of the mean loss is accumulated there; layers
/// below `lowest_grad_layer` are skipped (their parameters are frozen and
/// nothing below needs their gradients). dropout_rng enables inter-layer
/// dropout (training only).
inline double batch_nll(const NetLayout& layout, const NetConfig& cfg, const double* w,
                        const Matrix& windows, int context_length, double* grad,
                        Rng* dropout_rng, int lowest_grad_layer = 0) {
    const int H = cfg.hidden_size;
    const int L = cfg.num_layers;
    const int c = static_cast<int>(windows.rows());
    const int B = static_cast<int>(windows.cols());
    const int steps = c - 1;
    const int tau = c - context_length;
    if (tau < 1 || context_length < 1)
        throw std::invalid_argument("batch_nll: window shorter than context + 1");

    const ConstNetView net{layout, w};
    const bool use_dropout = dropout_rng != nullptr && cfg.dropout > 0.0 && L > 1;
    const double keep = 1.0 - cfg.dropout;
    const double weight = 1.0 / (static_cast<double>(tau) * static_cast<double>(B));

    std::vector<std::vector<StepCache>> cache(steps, std::vector<StepCache>(L));
    std::vector<Matrix> h(L, Matrix::Zero(H, B));
    const Matrix h_zero = Matrix::Zero(H, B);

    // Head outputs per target step.
    Matrix mu = Matrix::Zero(steps, B), sraw = Matrix::Zero(steps, B),
           sigma = Matrix::Zero(steps, B);

    double loss = 0.0;
    for (int j = 0; j < steps; ++j) {
        Matrix x = windows.row(j);  // 1 x B
        for (int l = 0; l < L; ++l) {
            StepCache& sc = cache[j][l];
            cell_forward(net, l, x, h[l], sc);
            h[l] = sc.h;
            if (l + 1 < L) {
                x = sc.h;
                if (use_dropout) {
                    sc.mask.resize(H, B);
                    for (int col = 0; col < B; ++col)
                        for (int row = 0; row < H; ++row)
                            sc.mask(row, col) =
                                dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
                    x = x.cwiseProduct(sc.mask);
                }
            }
        }
        if (j >= context_length - 1) {
            const Matrix out = net.head_A() * h[L - 1] + net.head_b().replicate(1, B);
            for (int col = 0; col < B; ++col) {
                const double m = out(0, col);
                const double s = std::max(softplus(out(1, col)), kSigmaFloor);
                const double y = windows(j + 1, col);
                const double resid = y - m;
                const double term =
                    0.5 * kLog2Pi + std::log(s) + 0.5 * resid * resid / (s * s);
                if (!std::isfinite(term))
                    throw std::runtime_error(
                        "nll: non-finite value at step " + std::to_string(j + 1) +
                        " (mu=" + std::to_string(m) + ", sigma=" + std::to_string(s) + ")");
                mu(j, col) = m;
                sraw(j, col) = out(1, col);
                sigma(j, col) = s;
                loss += weight * term;
            }
        }
    }

    if (grad == nullptr) return loss;

    const MutNetView gview{layout, grad};
    std::vector<Matrix> dh_time(L, Matrix::Zero(H, B));
    Matrix dh(H, B), dh_prev(H, B), dx(H, B);
    for (int j = steps - 1; j >= 0; --j) {
        if (j >= context_length - 1) {
            Matrix dout(2, B);
            for (int col = 0; col < B; ++col) {
                const double s = sigma(j, col);
                const double resid = windows(j + 1, col) - mu(j, col);
                const double dmu = weight * (-resid / (s * s));
                const double dsig = weight * (1.0 / s - resid * resid / (s * s * s));
                // softplus floor: no gradient once clamped
                const double dsraw =
                    softplus(sraw(j, col)) > kSigmaFloor ? dsig * sigmoid(sraw(j, col)) : 0.0;
                dout(0, col) = dmu;
                dout(1, col) = dsraw;
            }
            auto gA = gview.head_A();
            auto gb = gview.head_b();
            gA.noalias() += dout * cache[j][L - 1].h.transpose();
            gb += dout.rowwise().sum();
            dh_time[L - 1].noalias() += net.head_A().transpose() * dout;
        }
        for (int l = L - 1; l >= lowest_grad_layer; --l) {
            dh = dh_time[l];
            const Matrix& h_prev = j > 0 ? cache[j - 1][l].h : h_zero;
            cell_backward(net, gview, l, cache[j][l], h_prev, dh, dh_prev,
                          l > lowest_grad_layer ? &dx : nullptr);
            dh_time[l] = dh_prev;
            if (l > lowest_grad_layer) {
                const StepCache& below = cache[j][l - 1];
                if (use_dropout && below.mask.size() != 0)
                    dh_time[l - 1] += dx.cwiseProduct(below.mask);
                else
                    dh_time[l - 1] += dx;
            }
        }
    }
    return loss;
}

}  // namespace detail

/// Mean Gaussian negative log-likelihood of one pre-scaled window under the
/// model, teacher-forced, averaged over the target portion. Dropout is off;
/// this is the pure evaluation form of the training objective.
inline double nll_loss(const WeightPartition& wp, const std::vector<double>& window,
                       int context_length) {
    const auto layout = detail::NetLayout::from(wp.config);
    if (static_cast<int>(window.size()) <= context_length)
        throw std::invalid_argument("nll_loss: window must exceed context length");
    detail::Matrix m(window.size(), 1);
    for (std::size_t i = 0; i < window.size(); ++i) m(static_cast<int>(i), 0) = window[i];
    return detail::batch_nll(layout, wp.config, wp.weights.data(), m, context_length,
                             nullptr, nullptr);
}

/// nll_loss plus its analytic gradient wrt every weight.
inline std::pair<double, std::vector<double>> nll_loss_grad(
    const WeightPartition& wp, const std::vector<double>& window, int context_length) {
    const auto layout = detail::NetLayout::from(wp.config);
    detail::Matrix m(window.size(), 1);
    for (std::size_t i = 0; i < window.size(); ++i) m(static_cast<int>(i), 0) = window[i];
    std::vector<double> grad(layout.total, 0.0);
    const double loss = detail::batch_nll(layout, wp.config, wp.weights.data(), m,
                                          context_length, grad.data(), nullptr);
    return {loss, std::move(grad)};
}

/// Scales a raw window by the mean-|x| of its context slice, matching the
/// scale the forecaster will see at prediction time.
inline ScaledWindow scale_by_context(const std::vector<double>& window, int context_length) {
    std::vector<double> ctx(window.begin(), window.begin() + context_length);
    const double scale = mean_scale(ctx).scale;
    ScaledWindow out;
    out.scale = scale;
    out.values.resize(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) out.values[i] = window[i] / scale;
    return out;
}

/// Gradient-descent training over sampler-provided windows (Adam step rule,
/// global-norm clip at 10). With Trainable::AdaOnly every coordinate outside
/// the adaptive mask is left bit-identical to `init`.
inline WeightPartition train(const Dataset& ds, const WindowSampler& sampler,
                             const WeightPartition& init, Trainable trainable,
                             const NetConfig& cfg, std::uint64_t seed,
                             std::vector<double>* loss_trace = nullptr) {
    cfg.validate();
    if (cfg.num_layers != init.config.num_layers ||
        cfg.hidden_size != init.config.hidden_size)
        throw std::invalid_argument("train: config architecture differs from init weights");
    const auto layout = detail::NetLayout::from(init.config);
    if (layout.total != init.param_count())
        throw std::invalid_argument("train: weight vector does not match architecture");
    const int c = ds.window_length();
    const int C = ds.context_length;
    for (const auto& s : ds.series) valid_start_range(s.length(), C, ds.prediction_length, s.id);

    WeightPartition out = init;
    out.seed = seed;
    out.config = cfg;
    std::vector<double> grad(layout.total, 0.0);
    std::vector<double> m(layout.total, 0.0), v(layout.total, 0.0);
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
    constexpr double kClipNorm = 10.0;

    Rng rng_windows(derive_seed(seed, {stream_key("train-windows")}));
    Rng rng_dropout(derive_seed(seed, {stream_key("train-dropout")}));

    // Frozen layers below the adaptive set need no backward pass at all.
    const int lowest_grad_layer =
        trainable == Trainable::AdaOnly ? (cfg.num_layers > 1 ? 1 : cfg.num_layers) : 0;

    detail::Matrix batch(c, cfg.batch_size);
    long long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int bi = 0; bi < cfg.batches_per_epoch; ++bi) {
            for (int col = 0; col < cfg.batch_size; ++col) {
                const int si = rng_windows.uniform_int(ds.num_series());
                const auto& series = ds.series[si];
                const int start = sampler.sample_start(si, series.length(), c, rng_windows);
                std::vector<double> window(series.values.begin() + (start - 1),
                                           series.values.begin() + (start - 1) + c);
                const auto scaled = scale_by_context(window, C);
                for (int rowi = 0; rowi < c; ++rowi) batch(rowi, col) = scaled.values[rowi];
            }
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0.0;
            try {
                loss = detail::batch_nll(layout, cfg, out.weights.data(), batch, C,
                                         grad.data(),
                                         cfg.dropout > 0.0 ? &rng_dropout : nullptr,
                                         lowest_grad_layer);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("training diverged at epoch " +
                                         std::to_string(epoch + 1) + " batch " +
                                         std::to_string(bi + 1) + ": " + e.what());
            }
            if (!std::isfinite(loss))
                throw std::runtime_error("training diverged at epoch " +
                                         std::to_string(epoch + 1) + " batch " +
                                         std::to_string(bi + 1) + ": non-finite loss");
            epoch_loss += loss;

            double sq = 0.0;
            for (double g : grad) sq += g * g;
            const double norm = std::sqrt(sq);
            if (norm > kClipNorm)
                for (double& g : grad) g *= kClipNorm / norm;

            ++step;
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            for (int i = 0; i < layout.total; ++i) {
                if (trainable == Trainable::AdaOnly && !init.ada_mask[i]) continue;
                m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
                v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                out.weights[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
            }
        }
        if (loss_trace != nullptr)
            loss_trace->push_back(epoch_loss / cfg.batches_per_epoch);
    }
    return out;
}

/// Ancestral-sampling forecast: consume the trailing context of each series,
/// then roll the model forward tau steps, sampling from the Gaussian head and
/// feeding the draw back, num_samples trajectories in lockstep. Samples are
/// unscaled back by the context scale factor.
inline std::vector<SampleForecast> forecast(const Dataset& ds, const WeightPartition& wp,
                                            int num_samples, std::uint64_t seed) {
    if (num_samples < 1) throw std::invalid_argument("forecast: num_samples must be >= 1");
    const auto layout = detail::NetLayout::from(wp.config);
    const int H = wp.config.hidden_size;
    const int L = wp.config.num_layers;
    const int C = ds.context_length;
    const int tau = ds.prediction_length;
    const detail::ConstNetView net{layout, wp.weights.data()};

    std::vector<SampleForecast> result;
    result.reserve(ds.series.size());
    for (int si = 0; si < ds.num_series(); ++si) {
        const auto& series = ds.series[si];
        if (series.length() < C)
            throw std::invalid_argument("forecast: series " + series.id +
                                        " shorter than context length");
        Rng rng(derive_seed(seed, {stream_key("forecast"), static_cast<std::uint64_t>(si)}));

        std::vector<double> ctx(series.values.end() - C, series.values.end());
        const auto scaled = mean_scale(ctx);

        // Consume the context once (B=1), then replicate hidden state across
        // trajectories for the sampling phase.
        std::vector<detail::Matrix> h(L, detail::Matrix::Zero(H, 1));
        detail::StepCache sc;
        for (int j = 0; j + 1 < C; ++j) {
            detail::Matrix x = detail::Matrix::Constant(1, 1, scaled.values[j]);
            for (int l = 0; l < L; ++l) {
                detail::cell_forward(net, l, x, h[l], sc);
                h[l] = sc.h;
                if (l + 1 < L) x = sc.h;
            }
        }
        std::vector<detail::Matrix> hb(L);
        for (int l = 0; l < L; ++l) hb[l] = h[l].replicate(1, num_samples);

        SampleForecast fc;
        fc.series_id = series.id;
        fc.num_samples = num_samples;
        fc.tau = tau;
        fc.forecast_start = series.start_index + series.length();
        fc.samples.resize(static_cast<std::size_t>(num_samples) * tau);

        detail::Matrix x = detail::Matrix::Constant(1, num_samples, scaled.values[C - 1]);
        for (int t = 0; t < tau; ++t) {
            detail::Matrix inp = x;
            for (int l = 0; l < L; ++l) {
                detail::cell_forward(net, l, inp, hb[l], sc);
                hb[l] = sc.h;
                if (l + 1 < L) inp = sc.h;
            }
            const detail::Matrix out =
                net.head_A() * hb[L - 1] + net.head_b().replicate(1, num_samples);
            for (int b = 0; b < num_samples; ++b) {
                const double mu = out(0, b);
                const double sg = std::max(detail::softplus(out(1, b)), detail::kSigmaFloor);
                const double draw = mu + sg * rng.normal();
                if (!std::isfinite(draw))
                    throw std::runtime_error("forecast: non-finite sample for series " +
                                             series.id + " at step " + std::to_string(t + 1));
                x(0, b) = draw;
                fc.at(b, t) = draw * scaled.scale;
            }
        }
        result.push_back(std::move(fc));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: flat little-endian float64 vector, JSON sidecar at <path>.json
// with {"param_count", "ada_mask_runs", "config", "seed"}.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_f64_le(std::ofstream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(buf, 8);
}

inline double read_f64_le(std::ifstream& in) {
    char buf[8];
    in.read(buf, 8);
    if (!in) throw std::runtime_error("checkpoint: truncated weight file");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return std::bit_cast<double>(bits);
}

inline std::vector<std::pair<int, int>> mask_runs(const std::vector<std::uint8_t>& mask) {
    std::vector<std::pair<int, int>> runs;
    int i = 0;
    const int n = static_cast<int>(mask.size());
    while (i < n) {
        if (mask[i]) {
            int j = i;
            while (j < n && mask[j]) ++j;
            runs.emplace_back(i, j - i);
            i = j;
        } else {
            ++i;
        }
    }
    return runs;
}

}  // namespace detail

inline void save_checkpoint(const WeightPartition& wp, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (double w : wp.weights) detail::write_f64_le(out, w);
    out.close();

    nlohmann::ordered_json j;
    j["param_count"] = wp.param_count();
    auto runs = detail::mask_runs(wp.ada_mask);
    nlohmann::ordered_json jr = nlohmann::ordered_json::array();
    for (const auto& [start, len] : runs) jr.push_back({start, len});
    j["ada_mask_runs"] = jr;
    j["config"] = net_config_to_json(wp.config);
    j["seed"] = wp.seed;
    std::ofstream meta(path + ".json");
    if (!meta) throw std::runtime_error("cannot write " + path + ".json");
    meta << j.dump(2) << '\n';
}

inline WeightPartition load_checkpoint(const std::string& path) {
    std::ifstream meta(path + ".json");
    if (!meta) throw std::runtime_error("cannot open " + path + ".json");
    nlohmann::json j;
    meta >> j;

    WeightPartition wp;
    wp.config = net_config_from_json(j.at("config"));
    wp.seed = j.value("seed", 0ULL);
    const int count = j.at("param_count").get<int>();
    const auto layout = detail::NetLayout::from(wp.config);
    if (layout.total != count)
        throw std::runtime_error("checkpoint: param_count " + std::to_string(count) +
                                 " does not match config (" + std::to_string(layout.total) + ")");
    wp.ada_mask.assign(count, 0);
    for (const auto& run : j.at("ada_mask_runs")) {
        const int start = run.at(0).get<int>();
        const int len = run.at(1).get<int>();
        if (start < 0 || len < 0 || start + len > count)
            throw std::runtime_error("checkpoint: invalid ada_mask run");
        std::fill(wp.ada_mask.begin() + start, wp.ada_mask.begin() + start + len, 1);
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    wp.weights.resize(count);
    for (int i = 0; i < count; ++i) wp.weights[i] = detail::read_f64_le(in);
    return wp;
}

}  // namespace adasamp
