#pragma once

// Minimal from-scratch neural-network engine: dense / Elman-recurrent /
// 1-D convolutional layers, reverse-mode backpropagation (through time for
// the recurrent cell), SGD with momentum, and patience-based early stopping.
// Five fixed architectures act as fault classifiers over labeled datasets:
//
//   feedforward         9 -> 32(tanh) -> 16(tanh) -> 1(sigmoid), window 1
//   recurrent           Elman cell, hidden 32, window 12, sigmoid read-out
//                       from the final hidden state
//   convolutional       16 filters of width 3 (tanh) over the time axis of a
//                       window-12 feature sequence, mean-pool, 16 -> 1 sigmoid
//   sparse autoencoder  phase 1: 9 -> 16(sigmoid) -> 9(linear) reconstruction
//                       with a KL sparsity penalty (rho target on the mean
//                       hidden activation); phase 2: encoder frozen, a dense
//                       16 -> 1 sigmoid head trained on the fault labels
//   nar                 fault label regressed on its own previous labels:
//                       the window spans `window` consecutive steps, the
//                       first window-1 fault labels are the input and the
//                       final step's label is the target (default window 13,
//                       i.e. 12 lags), through 12 -> 16(tanh) -> 1(sigmoid)
//
// All windows are built over chronological order and never straddle split
// boundaries; a window's label is the fault label at its final step.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dataio.hpp"

namespace turbperf {

enum class ArchKind { Feedforward, Recurrent, Convolutional, SparseAutoencoder, NarTimeSeries };

inline constexpr ArchKind kAllArchs[] = {
    ArchKind::Feedforward, ArchKind::Recurrent, ArchKind::Convolutional,
    ArchKind::SparseAutoencoder, ArchKind::NarTimeSeries};

// Stable identifier used in files and config keys.
const char* arch_name(ArchKind kind);
// Human-readable row label for comparison tables.
const char* arch_label(ArchKind kind);
// Accepts the stable identifier or the short alias (ff, rnn, cnn, sae, nar).
std::optional<ArchKind> arch_from_name(const std::string& name);

enum class LayerKind { Dense, Elman, Conv1D };
enum class Activation { Tanh, Sigmoid, Linear };

const char* layer_kind_name(LayerKind kind);
const char* activation_name(Activation act);

struct Layer {
    LayerKind kind = LayerKind::Dense;
    Activation act = Activation::Linear;
    long in_width = 0;      // input channels per time step
    long out_width = 0;     // output units (conv: filter count)
    long kernel_width = 1;  // conv taps along the time axis; 1 otherwise
    bool mean_pool = false; // conv only: average outputs over time
    bool frozen = false;    // excluded from optimizer updates
    Eigen::MatrixXd w;      // dense/elman: out x in; conv: out x (kernel_width*in)
    Eigen::MatrixXd r;      // elman recurrent weights out x out; empty otherwise
    Eigen::VectorXd b;      // out
};

struct NetModel {
    ArchKind kind = ArchKind::Feedforward;
    std::vector<Layer> layers;
    long window = 1;            // chronological span of one input window
    double sparsity_rho = 0.0;  // sparse autoencoder only
    double sparsity_beta = 0.0; // sparse autoencoder only
    NormalizationStats stats;   // feature scaling frozen at training time

    // Layer indices used for fault prediction (the autoencoder skips its
    // decoder); every other architecture uses all layers in order.
    std::vector<std::size_t> inference_path() const;
    // Expected shape of one input window: rows x cols of Window::steps.
    long input_rows() const;
    long input_cols() const;
};

// Architecture overrides; zero / negative sentinels mean "use the default".
struct ArchOverrides {
    std::uint64_t seed = 1; // parameter initialization stream
    long window = 0;
    long hidden = 0;        // main hidden width (ff first layer, elman state,
                            // autoencoder code, nar hidden)
    long hidden2 = 0;       // feedforward second hidden width
    long filters = 0;       // conv output channels
    long kernel_width = 0;  // conv taps
    double rho = 0.0;       // autoencoder sparsity target in (0,1)
    double beta = -1.0;     // autoencoder penalty weight >= 0
};

struct TrainConfig {
    long max_epochs = 500;
    long patience = 6;
    double learning_rate = 0.01;
    long batch_size = 64;
    double momentum = 0.9;
    std::uint64_t seed = 1;

    void validate() const;
};

struct TrainTrace {
    long epochs_run = 0;     // classifier-phase epochs (<= max_epochs)
    long pretrain_epochs = 0; // autoencoder reconstruction phase; 0 otherwise
    std::vector<double> train_loss_per_epoch;
    std::vector<double> val_loss_per_epoch;
    double wall_time_seconds = 0.0;
    long best_epoch = 0; // 1-based index into val_loss_per_epoch
};

// One training/evaluation example: a window of steps plus its target label.
// Feature architectures store the window x 9 normalized feature block; the
// autoregressive kind stores a single 1 x (window-1) row of past labels.
struct Window {
    Eigen::MatrixXd steps;
    double label = 0.0;
    SplitTag tag = SplitTag::Train;
};

// Time-major minibatch: steps[t] is batch x channels.
struct StepBatch {
    std::vector<Eigen::MatrixXd> steps;
    long batch() const { return steps.empty() ? 0 : steps.front().rows(); }
};

struct LayerGrads {
    Eigen::MatrixXd w;
    Eigen::MatrixXd r;
    Eigen::VectorXd b;
};

struct Grads {
    std::vector<LayerGrads> layers; // aligned with NetModel::layers
};

// Loss selector: Classify is the MSE fault objective on the sigmoid output;
// Reconstruct is the autoencoder phase-1 objective (reconstruction MSE plus
// the KL sparsity penalty) and is only valid for SparseAutoencoder models.
enum class NetPhase { Classify, Reconstruct };

NetModel build_arch(ArchKind kind, long input_width, const ArchOverrides& cfg = {});

// Deterministic prediction in (0,1) for a single window (shape from
// NetModel::input_rows/input_cols).
double forward(const NetModel& model, const Eigen::Ref<const Eigen::MatrixXd>& window_steps);

// Batched prediction for the classify path.
Eigen::VectorXd forward_batch(const NetModel& model, const StepBatch& input);

// Sliding windows over chronological order, one per position where `window`
// consecutive steps share a split tag. Throws WindowTooLong when no run is
// long enough to produce a single window.
std::vector<Window> make_windows(const LabeledDataset& ds, long window, ArchKind kind);

std::pair<double, Grads> loss_and_gradients(const NetModel& model,
                                            const std::vector<Window>& batch,
                                            NetPhase phase = NetPhase::Classify);

// Mean squared error of the classify output over a window list.
double evaluate_mse(const NetModel& model, const std::vector<Window>& windows);

// Patience-based validation watcher. observe() consumes one epoch's
// validation loss (epochs are 1-based) and returns true when the loss has
// failed to improve for `patience` consecutive epochs.
class EarlyStopper {
public:
    explicit EarlyStopper(long patience);
    bool observe(double val_loss);
    long best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_; }
    long epochs_seen() const { return seen_; }

private:
    long patience_;
    long seen_ = 0;
    long best_epoch_ = 0;
    long streak_ = 0;
    double best_;
};

// Mini-batch SGD with momentum and early stopping on validation MSE.
// Returns the parameters from the best validation epoch, not the last.
// The autoencoder first trains its reconstruction phase (same budget),
// freezes the encoder, then trains the classifier head; its trace covers
// the classifier phase, with the reconstruction epochs in pretrain_epochs.
std::pair<NetModel, TrainTrace> train(NetModel model, const LabeledDataset& ds,
                                      const TrainConfig& cfg);

// Diagnostic threshold on the sigmoid output (not used by any MSE metric).
inline int fault_decision(double prediction) { return prediction >= 0.5 ? 1 : 0; }

std::string render_net(const NetModel& model);
NetModel parse_net(const std::string& text);
void save_net(const NetModel& model, const std::string& path);
NetModel load_net(const std::string& path);

} // namespace turbperf
