#include "neuralnet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"
#include "textio.hpp"

namespace turbperf {

const char* arch_name(ArchKind kind) {
    switch (kind) {
    case ArchKind::Feedforward: return "feedforward";
    case ArchKind::Recurrent: return "recurrent";
    case ArchKind::Convolutional: return "convolutional";
    case ArchKind::SparseAutoencoder: return "sparse_autoencoder";
    case ArchKind::NarTimeSeries: return "nar_time_series";
    }
    return "feedforward";
}

const char* arch_label(ArchKind kind) {
    switch (kind) {
    case ArchKind::Feedforward: return "Feedforward";
    case ArchKind::Recurrent: return "Recurrent (RNN)";
    case ArchKind::Convolutional: return "Convolutional (CNN)";
    case ArchKind::SparseAutoencoder: return "Sparse Autoencoder";
    case ArchKind::NarTimeSeries: return "Autoregressive (NAR)";
    }
    return "Feedforward";
}

std::optional<ArchKind> arch_from_name(const std::string& name) {
    const std::string s = lower(trim(name));
    if (s == "ff" || s == "feedforward") return ArchKind::Feedforward;
    if (s == "rnn" || s == "recurrent") return ArchKind::Recurrent;
    if (s == "cnn" || s == "convolutional") return ArchKind::Convolutional;
    if (s == "sae" || s == "sparse_autoencoder") return ArchKind::SparseAutoencoder;
    if (s == "nar" || s == "nar_time_series") return ArchKind::NarTimeSeries;
    return std::nullopt;
}

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Elman: return "elman";
    case LayerKind::Conv1D: return "conv1d";
    }
    return "dense";
}

const char* activation_name(Activation act) {
    switch (act) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Linear: return "linear";
    }
    return "linear";
}

namespace {

std::optional<LayerKind> layer_kind_from_name(const std::string& s) {
    if (s == "dense") return LayerKind::Dense;
    if (s == "elman") return LayerKind::Elman;
    if (s == "conv1d") return LayerKind::Conv1D;
    return std::nullopt;
}

std::optional<Activation> activation_from_name(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "linear") return Activation::Linear;
    return std::nullopt;
}

void glorot_fill(Rng& rng, Eigen::MatrixXd& m, double fan_in, double fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (long r = 0; r < m.rows(); ++r) {
        for (long c = 0; c < m.cols(); ++c) {
            m(r, c) = (2.0 * rng.uniform01() - 1.0) * bound;
        }
    }
}

Layer make_dense(Rng& rng, long in, long out, Activation act) {
    Layer ly;
    ly.kind = LayerKind::Dense;
    ly.act = act;
    ly.in_width = in;
    ly.out_width = out;
    ly.w.resize(out, in);
    glorot_fill(rng, ly.w, static_cast<double>(in), static_cast<double>(out));
    ly.b = Eigen::VectorXd::Zero(out);
    return ly;
}

Layer make_elman(Rng& rng, long in, long hidden, Activation act) {
    Layer ly;
    ly.kind = LayerKind::Elman;
    ly.act = act;
    ly.in_width = in;
    ly.out_width = hidden;
    ly.w.resize(hidden, in);
    glorot_fill(rng, ly.w, static_cast<double>(in), static_cast<double>(hidden));
    ly.r.resize(hidden, hidden);
    glorot_fill(rng, ly.r, static_cast<double>(hidden), static_cast<double>(hidden));
    ly.b = Eigen::VectorXd::Zero(hidden);
    return ly;
}

Layer make_conv(Rng& rng, long in, long filters, long kernel, Activation act, bool pool) {
    Layer ly;
    ly.kind = LayerKind::Conv1D;
    ly.act = act;
    ly.in_width = in;
    ly.out_width = filters;
    ly.kernel_width = kernel;
    ly.mean_pool = pool;
    ly.w.resize(filters, kernel * in);
    glorot_fill(rng, ly.w, static_cast<double>(kernel * in), static_cast<double>(filters));
    ly.b = Eigen::VectorXd::Zero(filters);
    return ly;
}

long pick(long override_value, long fallback) {
    return override_value > 0 ? override_value : fallback;
}

} // namespace

std::vector<std::size_t> NetModel::inference_path() const {
    if (kind == ArchKind::SparseAutoencoder) return {0, 2};
    std::vector<std::size_t> path(layers.size());
    std::iota(path.begin(), path.end(), std::size_t{0});
    return path;
}

long NetModel::input_rows() const {
    return kind == ArchKind::NarTimeSeries ? 1 : window;
}

long NetModel::input_cols() const {
    if (layers.empty()) return 0;
    return layers[inference_path().front()].in_width;
}

NetModel build_arch(ArchKind kind, long input_width, const ArchOverrides& cfg) {
    if (input_width < 1) fail(ErrKind::BadOverride, "input width must be >= 1");
    if (cfg.hidden < 0 || cfg.hidden2 < 0 || cfg.filters < 0 || cfg.kernel_width < 0 ||
        cfg.window < 0) {
        fail(ErrKind::BadOverride, "architecture overrides must be positive when set");
    }

    NetModel model;
    model.kind = kind;
    Rng rng(cfg.seed);

    switch (kind) {
    case ArchKind::Feedforward: {
        if (cfg.window > 1) fail(ErrKind::BadOverride, "feedforward uses window 1");
        model.window = 1;
        const long h1 = pick(cfg.hidden, 32);
        const long h2 = pick(cfg.hidden2, 16);
        model.layers.push_back(make_dense(rng, input_width, h1, Activation::Tanh));
        model.layers.push_back(make_dense(rng, h1, h2, Activation::Tanh));
        model.layers.push_back(make_dense(rng, h2, 1, Activation::Sigmoid));
        break;
    }
    case ArchKind::Recurrent: {
        model.window = pick(cfg.window, 12);
        const long h = pick(cfg.hidden, 32);
        model.layers.push_back(make_elman(rng, input_width, h, Activation::Tanh));
        model.layers.push_back(make_dense(rng, h, 1, Activation::Sigmoid));
        break;
    }
    case ArchKind::Convolutional: {
        model.window = pick(cfg.window, 12);
        const long filters = pick(cfg.filters, 16);
        const long kernel = pick(cfg.kernel_width, 3);
        if (kernel > model.window) {
            fail(ErrKind::BadOverride, "conv kernel wider than the input window");
        }
        model.layers.push_back(
            make_conv(rng, input_width, filters, kernel, Activation::Tanh, true));
        model.layers.push_back(make_dense(rng, filters, 1, Activation::Sigmoid));
        break;
    }
    case ArchKind::SparseAutoencoder: {
        if (cfg.window > 1) fail(ErrKind::BadOverride, "sparse autoencoder uses window 1");
        model.window = 1;
        const long h = pick(cfg.hidden, 16);
        model.sparsity_rho = cfg.rho > 0.0 ? cfg.rho : 0.05;
        model.sparsity_beta = cfg.beta >= 0.0 ? cfg.beta : 3.0;
        if (model.sparsity_rho >= 1.0) {
            fail(ErrKind::BadOverride, "sparsity target must lie in (0,1)");
        }
        model.layers.push_back(make_dense(rng, input_width, h, Activation::Sigmoid));
        model.layers.push_back(make_dense(rng, h, input_width, Activation::Linear));
        model.layers.push_back(make_dense(rng, h, 1, Activation::Sigmoid));
        break;
    }
    case ArchKind::NarTimeSeries: {
        // The input is the label's own history, so the feature width is
        // ignored: window-1 lagged labels feed the first layer.
        model.window = pick(cfg.window, 13);
        if (model.window < 2) {
            fail(ErrKind::BadOverride, "autoregressive window needs at least one lag");
        }
        const long h = pick(cfg.hidden, 16);
        model.layers.push_back(make_dense(rng, model.window - 1, h, Activation::Tanh));
        model.layers.push_back(make_dense(rng, h, 1, Activation::Sigmoid));
        break;
    }
    }
    return model;
}

// ---------------------------------------------------------------------------
// forward / backward engine

namespace {

void apply_activation(Activation act, Eigen::MatrixXd& z) {
    switch (act) {
    case Activation::Tanh:
        z = z.array().tanh();
        break;
    case Activation::Sigmoid:
        z = 1.0 / (1.0 + (-z.array()).exp());
        break;
    case Activation::Linear:
        break;
    }
}

// Derivative of the activation expressed through its output value.
Eigen::ArrayXXd activation_slope(Activation act, const Eigen::MatrixXd& a) {
    switch (act) {
    case Activation::Tanh:
        return 1.0 - a.array().square();
    case Activation::Sigmoid:
        return a.array() * (1.0 - a.array());
    case Activation::Linear:
        return Eigen::ArrayXXd::Ones(a.rows(), a.cols());
    }
    return Eigen::ArrayXXd::Ones(a.rows(), a.cols());
}

// Per-layer forward state needed by the backward pass: the Elman cell keeps
// its hidden-state sequence h_0..h_T, the conv layer its pre-pool activations.
struct LayerState {
    std::vector<Eigen::MatrixXd> seq;
};

StepBatch layer_forward(const Layer& ly, const StepBatch& in, LayerState& state) {
    StepBatch out;
    switch (ly.kind) {
    case LayerKind::Dense: {
        out.steps.reserve(in.steps.size());
        for (const Eigen::MatrixXd& x : in.steps) {
            Eigen::MatrixXd z = x * ly.w.transpose();
            z.rowwise() += ly.b.transpose();
            apply_activation(ly.act, z);
            out.steps.push_back(std::move(z));
        }
        break;
    }
    case LayerKind::Elman: {
        const long batch = in.steps.front().rows();
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(batch, ly.out_width);
        state.seq.push_back(h);
        for (const Eigen::MatrixXd& x : in.steps) {
            Eigen::MatrixXd z = x * ly.w.transpose() + h * ly.r.transpose();
            z.rowwise() += ly.b.transpose();
            apply_activation(ly.act, z);
            h = std::move(z);
            state.seq.push_back(h);
        }
        out.steps.push_back(h);
        break;
    }
    case LayerKind::Conv1D: {
        const long t_in = static_cast<long>(in.steps.size());
        const long k = ly.kernel_width;
        const long t_out = t_in - k + 1;
        for (long u = 0; u < t_out; ++u) {
            Eigen::MatrixXd z = in.steps[u] * ly.w.middleCols(0, ly.in_width).transpose();
            for (long tap = 1; tap < k; ++tap) {
                z.noalias() +=
                    in.steps[u + tap] * ly.w.middleCols(tap * ly.in_width, ly.in_width).transpose();
            }
            z.rowwise() += ly.b.transpose();
            apply_activation(ly.act, z);
            state.seq.push_back(std::move(z));
        }
        if (ly.mean_pool) {
            Eigen::MatrixXd pooled = state.seq[0];
            for (long u = 1; u < t_out; ++u) pooled += state.seq[u];
            out.steps.push_back(pooled / static_cast<double>(t_out));
        } else {
            out.steps = state.seq;
        }
        break;
    }
    }
    return out;
}

StepBatch layer_backward(const Layer& ly, const StepBatch& in, const LayerState& state,
                         const StepBatch& out, const StepBatch& dout, LayerGrads* g,
                         bool need_dx) {
    StepBatch din;
    switch (ly.kind) {
    case LayerKind::Dense: {
        if (need_dx) din.steps.resize(in.steps.size());
        for (std::size_t s = 0; s < in.steps.size(); ++s) {
            const Eigen::MatrixXd dz =
                (dout.steps[s].array() * activation_slope(ly.act, out.steps[s])).matrix();
            if (g) {
                g->w.noalias() += dz.transpose() * in.steps[s];
                g->b += dz.colwise().sum().transpose();
            }
            if (need_dx) din.steps[s].noalias() = dz * ly.w;
        }
        break;
    }
    case LayerKind::Elman: {
        const long t_len = static_cast<long>(in.steps.size());
        Eigen::MatrixXd dh = dout.steps.front();
        if (need_dx) din.steps.resize(t_len);
        for (long t = t_len; t >= 1; --t) {
            const Eigen::MatrixXd dz =
                (dh.array() * activation_slope(ly.act, state.seq[t])).matrix();
            if (g) {
                g->w.noalias() += dz.transpose() * in.steps[t - 1];
                g->r.noalias() += dz.transpose() * state.seq[t - 1];
                g->b += dz.colwise().sum().transpose();
            }
            if (need_dx) din.steps[t - 1].noalias() = dz * ly.w;
            dh.noalias() = dz * ly.r;
        }
        break;
    }
    case LayerKind::Conv1D: {
        const long t_in = static_cast<long>(in.steps.size());
        const long k = ly.kernel_width;
        const long t_out = t_in - k + 1;
        const long batch = in.steps.front().rows();
        if (need_dx) {
            din.steps.assign(t_in, Eigen::MatrixXd::Zero(batch, ly.in_width));
        }
        for (long u = 0; u < t_out; ++u) {
            const Eigen::MatrixXd da = ly.mean_pool
                                           ? (dout.steps.front() / static_cast<double>(t_out)).eval()
                                           : dout.steps[u];
            const Eigen::MatrixXd dz =
                (da.array() * activation_slope(ly.act, state.seq[u])).matrix();
            if (g) {
                for (long tap = 0; tap < k; ++tap) {
                    g->w.middleCols(tap * ly.in_width, ly.in_width).noalias() +=
                        dz.transpose() * in.steps[u + tap];
                }
                g->b += dz.colwise().sum().transpose();
            }
            if (need_dx) {
                for (long tap = 0; tap < k; ++tap) {
                    din.steps[u + tap].noalias() +=
                        dz * ly.w.middleCols(tap * ly.in_width, ly.in_width);
                }
            }
        }
        break;
    }
    }
    return din;
}

struct Tape {
    std::vector<StepBatch> inputs;
    std::vector<LayerState> states;
    std::vector<StepBatch> outputs;
};

StepBatch path_forward(const NetModel& model, const std::vector<std::size_t>& path,
                       const StepBatch& input, Tape* tape) {
    StepBatch cur = input;
    for (std::size_t idx : path) {
        const Layer& ly = model.layers[idx];
        if (cur.steps.empty()) fail(ErrKind::ShapeMismatch, "empty input batch");
        if (cur.steps.front().cols() != ly.in_width) {
            fail(ErrKind::ShapeMismatch, "layer expects " + std::to_string(ly.in_width) +
                                             " channels, got " +
                                             std::to_string(cur.steps.front().cols()));
        }
        if (ly.kind == LayerKind::Conv1D &&
            static_cast<long>(cur.steps.size()) < ly.kernel_width) {
            fail(ErrKind::ShapeMismatch, "window shorter than the conv kernel");
        }
        LayerState state;
        StepBatch out = layer_forward(ly, cur, state);
        if (tape) {
            tape->inputs.push_back(std::move(cur));
            tape->states.push_back(std::move(state));
            tape->outputs.push_back(out);
        }
        cur = std::move(out);
    }
    return cur;
}

void path_backward(const NetModel& model, const std::vector<std::size_t>& path,
                   const Tape& tape, StepBatch dout, Grads& grads) {
    for (long p = static_cast<long>(path.size()) - 1; p >= 0; --p) {
        dout = layer_backward(model.layers[path[p]], tape.inputs[p], tape.states[p],
                              tape.outputs[p], dout, &grads.layers[path[p]], p > 0);
    }
}

Grads make_grads(const NetModel& model) {
    Grads g;
    g.layers.resize(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& ly = model.layers[i];
        g.layers[i].w = Eigen::MatrixXd::Zero(ly.w.rows(), ly.w.cols());
        g.layers[i].r = Eigen::MatrixXd::Zero(ly.r.rows(), ly.r.cols());
        g.layers[i].b = Eigen::VectorXd::Zero(ly.b.size());
    }
    return g;
}

void check_batch_shape(const NetModel& model, const StepBatch& x) {
    if (x.steps.empty() || x.batch() == 0) fail(ErrKind::EmptyBatch, "empty batch");
    if (static_cast<long>(x.steps.size()) != model.input_rows() ||
        x.steps.front().cols() != model.input_cols()) {
        fail(ErrKind::ShapeMismatch,
             "expected " + std::to_string(model.input_rows()) + " x " +
                 std::to_string(model.input_cols()) + " windows, got " +
                 std::to_string(x.steps.size()) + " x " +
                 std::to_string(x.steps.empty() ? 0 : x.steps.front().cols()));
    }
}

std::pair<double, Grads> loss_grads_core(const NetModel& model, const StepBatch& x,
                                         const Eigen::VectorXd& y, NetPhase phase) {
    check_batch_shape(model, x);
    const long batch = x.batch();
    Grads grads = make_grads(model);

    if (phase == NetPhase::Classify) {
        if (y.size() != batch) fail(ErrKind::LengthMismatch, "labels do not match batch size");
        Tape tape;
        const std::vector<std::size_t> path = model.inference_path();
        StepBatch outb = path_forward(model, path, x, &tape);
        const Eigen::VectorXd pred = outb.steps.front().col(0);
        const Eigen::VectorXd diff = pred - y;
        const double loss = diff.squaredNorm() / static_cast<double>(batch);
        StepBatch dout;
        dout.steps.emplace_back((2.0 / static_cast<double>(batch)) * diff);
        path_backward(model, path, tape, std::move(dout), grads);
        return {loss, std::move(grads)};
    }

    if (model.kind != ArchKind::SparseAutoencoder) {
        fail(ErrKind::BadConfig, "reconstruction loss requires the sparse autoencoder");
    }
    const std::vector<std::size_t> path{0, 1};
    Tape tape;
    StepBatch rec = path_forward(model, path, x, &tape);
    const Eigen::MatrixXd& target = x.steps.front();
    const Eigen::MatrixXd diff = rec.steps.front() - target;
    const double denom = static_cast<double>(batch) * static_cast<double>(target.cols());
    double loss = diff.squaredNorm() / denom;

    // KL sparsity on the batch-mean hidden activation.
    const Eigen::MatrixXd& hidden = tape.outputs[0].steps.front();
    Eigen::VectorXd rho_hat = hidden.colwise().mean().transpose();
    rho_hat = rho_hat.cwiseMax(1e-12).cwiseMin(1.0 - 1e-12);
    const double rho = model.sparsity_rho;
    const double beta = model.sparsity_beta;
    double kl = 0.0;
    for (long j = 0; j < rho_hat.size(); ++j) {
        kl += rho * std::log(rho / rho_hat(j)) +
              (1.0 - rho) * std::log((1.0 - rho) / (1.0 - rho_hat(j)));
    }
    loss += beta * kl;

    StepBatch drec;
    drec.steps.emplace_back((2.0 / denom) * diff);
    StepBatch dhidden = layer_backward(model.layers[1], tape.inputs[1], tape.states[1],
                                       tape.outputs[1], std::move(drec), &grads.layers[1], true);
    for (long j = 0; j < rho_hat.size(); ++j) {
        dhidden.steps.front().col(j).array() +=
            beta * (-rho / rho_hat(j) + (1.0 - rho) / (1.0 - rho_hat(j))) /
            static_cast<double>(batch);
    }
    layer_backward(model.layers[0], tape.inputs[0], tape.states[0], tape.outputs[0],
                   std::move(dhidden), &grads.layers[0], false);
    return {loss, std::move(grads)};
}

struct BatchView {
    StepBatch x;
    Eigen::VectorXd y;
};

BatchView gather_windows(const std::vector<Window>& ws, const std::vector<long>& order,
                         long lo, long hi) {
    const long batch = hi - lo;
    const Window& first = ws[order[lo]];
    const long t_len = first.steps.rows();
    const long cols = first.steps.cols();
    BatchView bv;
    bv.x.steps.assign(t_len, Eigen::MatrixXd(batch, cols));
    bv.y.resize(batch);
    for (long i = 0; i < batch; ++i) {
        const Window& w = ws[order[lo + i]];
        if (w.steps.rows() != t_len || w.steps.cols() != cols) {
            fail(ErrKind::ShapeMismatch, "windows in one batch differ in shape");
        }
        for (long t = 0; t < t_len; ++t) bv.x.steps[t].row(i) = w.steps.row(t);
        bv.y(i) = w.label;
    }
    return bv;
}

std::vector<long> identity_order(std::size_t n) {
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0L);
    return order;
}

double recon_mse(const NetModel& model, const std::vector<Window>& ws) {
    const std::vector<long> order = identity_order(ws.size());
    const long n = static_cast<long>(ws.size());
    const std::vector<std::size_t> path{0, 1};
    double acc = 0.0;
    double entries = 0.0;
    for (long lo = 0; lo < n; lo += 1024) {
        const long hi = std::min(n, lo + 1024);
        BatchView bv = gather_windows(ws, order, lo, hi);
        StepBatch rec = path_forward(model, path, bv.x, nullptr);
        acc += (rec.steps.front() - bv.x.steps.front()).squaredNorm();
        entries += static_cast<double>((hi - lo) * bv.x.steps.front().cols());
    }
    return acc / entries;
}

bool params_finite(const NetModel& model) {
    for (const Layer& ly : model.layers) {
        if (!ly.w.allFinite() || !ly.b.allFinite()) return false;
        if (ly.r.size() > 0 && !ly.r.allFinite()) return false;
    }
    return true;
}

void apply_update(NetModel& model, std::vector<LayerGrads>& vel, const Grads& grads,
                  const TrainConfig& cfg) {
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        Layer& ly = model.layers[i];
        if (ly.frozen) continue;
        vel[i].w = cfg.momentum * vel[i].w - cfg.learning_rate * grads.layers[i].w;
        ly.w += vel[i].w;
        if (ly.r.size() > 0) {
            vel[i].r = cfg.momentum * vel[i].r - cfg.learning_rate * grads.layers[i].r;
            ly.r += vel[i].r;
        }
        vel[i].b = cfg.momentum * vel[i].b - cfg.learning_rate * grads.layers[i].b;
        ly.b += vel[i].b;
    }
}

} // namespace

double forward(const NetModel& model, const Eigen::Ref<const Eigen::MatrixXd>& window_steps) {
    if (window_steps.rows() != model.input_rows() ||
        window_steps.cols() != model.input_cols()) {
        fail(ErrKind::ShapeMismatch,
             "expected a " + std::to_string(model.input_rows()) + " x " +
                 std::to_string(model.input_cols()) + " window, got " +
                 std::to_string(window_steps.rows()) + " x " +
                 std::to_string(window_steps.cols()));
    }
    StepBatch sb;
    sb.steps.reserve(window_steps.rows());
    for (long t = 0; t < window_steps.rows(); ++t) {
        sb.steps.emplace_back(window_steps.row(t));
    }
    const StepBatch out = path_forward(model, model.inference_path(), sb, nullptr);
    return out.steps.front()(0, 0);
}

Eigen::VectorXd forward_batch(const NetModel& model, const StepBatch& input) {
    check_batch_shape(model, input);
    const StepBatch out = path_forward(model, model.inference_path(), input, nullptr);
    return out.steps.front().col(0);
}

std::pair<double, Grads> loss_and_gradients(const NetModel& model,
                                            const std::vector<Window>& batch,
                                            NetPhase phase) {
    if (batch.empty()) fail(ErrKind::EmptyBatch, "loss_and_gradients on an empty batch");
    const std::vector<long> order = identity_order(batch.size());
    BatchView bv = gather_windows(batch, order, 0, static_cast<long>(batch.size()));
    return loss_grads_core(model, bv.x, bv.y, phase);
}

std::vector<Window> make_windows(const LabeledDataset& ds, long window, ArchKind kind) {
    if (window < 1) fail(ErrKind::BadConfig, "window must be >= 1");
    if (kind == ArchKind::NarTimeSeries && window < 2) {
        fail(ErrKind::BadConfig, "autoregressive windows need at least one lag");
    }
    const long n = ds.features.rows();
    if (n == 0) fail(ErrKind::EmptyInput, "dataset has no rows");

    std::vector<long> order = identity_order(n);
    std::sort(order.begin(), order.end(),
              [&](long a, long b) { return ds.chrono_index[a] < ds.chrono_index[b]; });

    std::vector<Window> out;
    long run_start = 0;
    for (long i = 1; i <= n; ++i) {
        if (i < n && ds.split_tag[order[i]] == ds.split_tag[order[run_start]]) continue;
        const long len = i - run_start;
        if (len >= window) {
            for (long end = run_start + window - 1; end < i; ++end) {
                const long first = end - window + 1;
                Window w;
                if (kind == ArchKind::NarTimeSeries) {
                    w.steps.resize(1, window - 1);
                    for (long t = 0; t + 1 < window; ++t) {
                        w.steps(0, t) = ds.fault_label[order[first + t]] ? 1.0 : 0.0;
                    }
                } else {
                    w.steps.resize(window, ds.features.cols());
                    for (long t = 0; t < window; ++t) {
                        w.steps.row(t) = ds.features.row(order[first + t]);
                    }
                }
                w.label = ds.fault_label[order[end]] ? 1.0 : 0.0;
                w.tag = ds.split_tag[order[end]];
                out.push_back(std::move(w));
            }
        }
        run_start = i;
    }
    if (out.empty()) {
        fail(ErrKind::WindowTooLong, "a window of " + std::to_string(window) +
                                         " steps exceeds every contiguous split run");
    }
    return out;
}

double evaluate_mse(const NetModel& model, const std::vector<Window>& windows) {
    if (windows.empty()) fail(ErrKind::EmptyInput, "evaluate_mse on empty window list");
    const std::vector<long> order = identity_order(windows.size());
    const long n = static_cast<long>(windows.size());
    double acc = 0.0;
    for (long lo = 0; lo < n; lo += 1024) {
        const long hi = std::min(n, lo + 1024);
        BatchView bv = gather_windows(windows, order, lo, hi);
        const Eigen::VectorXd pred = forward_batch(model, bv.x);
        acc += (pred - bv.y).squaredNorm();
    }
    return acc / static_cast<double>(n);
}

void TrainConfig::validate() const {
    if (max_epochs < 1) fail(ErrKind::BadConfig, "max_epochs must be >= 1");
    if (patience < 1) fail(ErrKind::BadConfig, "patience must be >= 1");
    // learning_rate 0 is allowed as a diagnostic degenerate case (no update).
    if (learning_rate < 0.0) fail(ErrKind::BadConfig, "learning_rate must be >= 0");
    if (batch_size < 1) fail(ErrKind::BadConfig, "batch_size must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) fail(ErrKind::BadConfig, "momentum must lie in [0,1)");
}

EarlyStopper::EarlyStopper(long patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
    if (patience < 1) fail(ErrKind::BadConfig, "patience must be >= 1");
}

bool EarlyStopper::observe(double val_loss) {
    ++seen_;
    if (val_loss < best_) {
        best_ = val_loss;
        best_epoch_ = seen_;
        streak_ = 0;
        return false;
    }
    return ++streak_ >= patience_;
}

namespace {

struct PhaseOut {
    long epochs = 0;
    long best_epoch = 0;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
};

PhaseOut run_phase(NetModel& model, const std::vector<Window>& train_ws,
                   const std::vector<Window>& val_ws, const TrainConfig& cfg,
                   NetPhase phase, Rng& rng) {
    const long n = static_cast<long>(train_ws.size());
    std::vector<long> order = identity_order(train_ws.size());
    std::vector<LayerGrads> vel = make_grads(model).layers;
    EarlyStopper stopper(cfg.patience);
    std::vector<Layer> best_layers = model.layers;
    PhaseOut out;

    for (long epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (long lo = 0; lo < n; lo += cfg.batch_size) {
            const long hi = std::min(n, lo + cfg.batch_size);
            BatchView bv = gather_windows(train_ws, order, lo, hi);
            auto [loss, grads] = loss_grads_core(model, bv.x, bv.y, phase);
            if (!std::isfinite(loss)) {
                fail(ErrKind::DivergenceDetected,
                     "non-finite training loss at epoch " + std::to_string(epoch));
            }
            apply_update(model, vel, grads, cfg);
            total += loss * static_cast<double>(hi - lo);
        }
        const double train_loss = total / static_cast<double>(n);
        const double val =
            phase == NetPhase::Classify ? evaluate_mse(model, val_ws) : recon_mse(model, val_ws);
        if (!std::isfinite(val) || !params_finite(model)) {
            fail(ErrKind::DivergenceDetected,
                 "non-finite parameters or validation loss at epoch " + std::to_string(epoch));
        }
        out.train_loss.push_back(train_loss);
        out.val_loss.push_back(val);
        const bool improved = val < stopper.best_loss();
        const bool halt = stopper.observe(val);
        if (improved) best_layers = model.layers;
        if (halt) break;
    }
    out.epochs = stopper.epochs_seen();
    out.best_epoch = stopper.best_epoch();
    model.layers = std::move(best_layers);
    return out;
}

} // namespace

std::pair<NetModel, TrainTrace> train(NetModel model, const LabeledDataset& ds,
                                      const TrainConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const std::vector<Window> all = make_windows(ds, model.window, model.kind);
    std::vector<Window> train_ws;
    std::vector<Window> val_ws;
    for (const Window& w : all) {
        if (w.tag == SplitTag::Train) {
            train_ws.push_back(w);
        } else if (w.tag == SplitTag::Val) {
            val_ws.push_back(w);
        }
    }
    if (train_ws.empty()) fail(ErrKind::EmptySplit, "no training windows");
    if (val_ws.empty()) fail(ErrKind::EmptySplit, "no validation windows");

    Rng rng(cfg.seed);
    TrainTrace trace;
    if (model.kind == ArchKind::SparseAutoencoder) {
        for (Layer& ly : model.layers) ly.frozen = false;
        const PhaseOut pre = run_phase(model, train_ws, val_ws, cfg, NetPhase::Reconstruct, rng);
        trace.pretrain_epochs = pre.epochs;
        model.layers[0].frozen = true;
        model.layers[1].frozen = true;
        const PhaseOut main = run_phase(model, train_ws, val_ws, cfg, NetPhase::Classify, rng);
        trace.epochs_run = main.epochs;
        trace.best_epoch = main.best_epoch;
        trace.train_loss_per_epoch = main.train_loss;
        trace.val_loss_per_epoch = main.val_loss;
    } else {
        const PhaseOut main = run_phase(model, train_ws, val_ws, cfg, NetPhase::Classify, rng);
        trace.epochs_run = main.epochs;
        trace.best_epoch = main.best_epoch;
        trace.train_loss_per_epoch = main.train_loss;
        trace.val_loss_per_epoch = main.val_loss;
    }

    model.stats = ds.stats;
    trace.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(model), std::move(trace)};
}

// ---------------------------------------------------------------------------
// persistence

namespace {

std::string matrix_csv(const Eigen::MatrixXd& m) {
    std::string out;
    for (long r = 0; r < m.rows(); ++r) {
        for (long c = 0; c < m.cols(); ++c) {
            if (r + c > 0) out += ",";
            out += format_double(m(r, c));
        }
    }
    return out;
}

std::string vector_csv(const Eigen::VectorXd& v) {
    std::string out;
    for (long i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v(i));
    }
    return out;
}

void parse_matrix_csv(const std::string& csv, Eigen::MatrixXd& m, const char* what) {
    const auto parts = split(csv, ',');
    if (static_cast<long>(parts.size()) != m.rows() * m.cols()) {
        fail(ErrKind::ParseError, std::string("bad element count for ") + what);
    }
    long idx = 0;
    for (long r = 0; r < m.rows(); ++r) {
        for (long c = 0; c < m.cols(); ++c) {
            const auto v = parse_double(parts[idx++]);
            if (!v) fail(ErrKind::ParseError, std::string("bad number in ") + what);
            m(r, c) = *v;
        }
    }
}

std::string expect_kv_line(std::istream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrKind::ParseError, "missing \"" + key + "\" line");
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)) != key) {
        fail(ErrKind::ParseError, "expected \"" + key + "\" line, got: " + line);
    }
    return trim(line.substr(eq + 1));
}

} // namespace

std::string render_net(const NetModel& model) {
    std::string out;
    out += "turbperf-nn v1\n";
    out += std::string("arch = ") + arch_name(model.kind) + "\n";
    out += "window = " + std::to_string(model.window) + "\n";
    out += "sparsity_rho = " + format_double(model.sparsity_rho) + "\n";
    out += "sparsity_beta = " + format_double(model.sparsity_beta) + "\n";
    out += "stat.mean = " + vector_csv(model.stats.mean) + "\n";
    out += "stat.stddev = " + vector_csv(model.stats.stddev) + "\n";
    out += "stat.power_min = " + format_double(model.stats.power_min) + "\n";
    out += "stat.power_max = " + format_double(model.stats.power_max) + "\n";
    out += "n_layers = " + std::to_string(model.layers.size()) + "\n";
    for (const Layer& ly : model.layers) {
        out += std::string("layer = ") + layer_kind_name(ly.kind) +
               ", act = " + activation_name(ly.act) + ", in = " + std::to_string(ly.in_width) +
               ", out = " + std::to_string(ly.out_width) +
               ", kernel = " + std::to_string(ly.kernel_width) +
               ", pool = " + (ly.mean_pool ? "1" : "0") +
               ", frozen = " + (ly.frozen ? "1" : "0") + "\n";
        out += "w = " + matrix_csv(ly.w) + "\n";
        if (ly.kind == LayerKind::Elman) out += "r = " + matrix_csv(ly.r) + "\n";
        out += "b = " + vector_csv(ly.b) + "\n";
    }
    return out;
}

NetModel parse_net(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "turbperf-nn v1") {
        fail(ErrKind::ParseError, "not a turbperf network model file");
    }

    NetModel model;
    const auto arch = arch_from_name(expect_kv_line(in, "arch"));
    if (!arch) fail(ErrKind::ParseError, "unknown architecture name");
    model.kind = *arch;
    model.window = parse_int(expect_kv_line(in, "window")).value_or(0);
    if (model.window < 1) fail(ErrKind::ParseError, "bad window");
    model.sparsity_rho = parse_double(expect_kv_line(in, "sparsity_rho")).value_or(-1.0);
    model.sparsity_beta = parse_double(expect_kv_line(in, "sparsity_beta")).value_or(-1.0);

    const auto mean_parts = split(expect_kv_line(in, "stat.mean"), ',');
    const auto std_parts = split(expect_kv_line(in, "stat.stddev"), ',');
    if (mean_parts.size() != kFeatureCount || std_parts.size() != kFeatureCount) {
        fail(ErrKind::ParseError, "bad normalization stats");
    }
    for (int f = 0; f < kFeatureCount; ++f) {
        model.stats.mean(f) = parse_double(mean_parts[f]).value_or(0.0);
        model.stats.stddev(f) = parse_double(std_parts[f]).value_or(1.0);
    }
    model.stats.power_min = parse_double(expect_kv_line(in, "stat.power_min")).value_or(0.0);
    model.stats.power_max = parse_double(expect_kv_line(in, "stat.power_max")).value_or(1.0);

    const long n_layers = parse_int(expect_kv_line(in, "n_layers")).value_or(-1);
    if (n_layers < 1) fail(ErrKind::ParseError, "bad layer count");

    for (long i = 0; i < n_layers; ++i) {
        if (!std::getline(in, line)) fail(ErrKind::ParseError, "truncated layer block");
        Layer ly;
        for (const std::string& tok : split(line, ',')) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) fail(ErrKind::ParseError, "bad layer field: " + tok);
            const std::string key = trim(tok.substr(0, eq));
            const std::string value = trim(tok.substr(eq + 1));
            if (key == "layer") {
                const auto k = layer_kind_from_name(value);
                if (!k) fail(ErrKind::ParseError, "unknown layer kind " + value);
                ly.kind = *k;
            } else if (key == "act") {
                const auto a = activation_from_name(value);
                if (!a) fail(ErrKind::ParseError, "unknown activation " + value);
                ly.act = *a;
            } else if (key == "in") {
                ly.in_width = parse_int(value).value_or(0);
            } else if (key == "out") {
                ly.out_width = parse_int(value).value_or(0);
            } else if (key == "kernel") {
                ly.kernel_width = parse_int(value).value_or(0);
            } else if (key == "pool") {
                ly.mean_pool = value == "1";
            } else if (key == "frozen") {
                ly.frozen = value == "1";
            } else {
                fail(ErrKind::ParseError, "unknown layer field \"" + key + "\"");
            }
        }
        if (ly.in_width < 1 || ly.out_width < 1 || ly.kernel_width < 1) {
            fail(ErrKind::ParseError, "bad layer dimensions");
        }
        const long w_cols = ly.kind == LayerKind::Conv1D ? ly.kernel_width * ly.in_width
                                                         : ly.in_width;
        ly.w.resize(ly.out_width, w_cols);
        parse_matrix_csv(expect_kv_line(in, "w"), ly.w, "layer weights");
        if (ly.kind == LayerKind::Elman) {
            ly.r.resize(ly.out_width, ly.out_width);
            parse_matrix_csv(expect_kv_line(in, "r"), ly.r, "recurrent weights");
        }
        Eigen::MatrixXd bm(ly.out_width, 1);
        parse_matrix_csv(expect_kv_line(in, "b"), bm, "layer bias");
        ly.b = bm.col(0);
        model.layers.push_back(std::move(ly));
    }
    return model;
}

void save_net(const NetModel& model, const std::string& path) {
    write_file_atomic(path, render_net(model));
}

NetModel load_net(const std::string& path) {
    return parse_net(read_file(path));
}

} // namespace turbperf
