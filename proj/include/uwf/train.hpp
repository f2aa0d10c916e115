#pragma once

#include <functional>
#include <string>
#include <vector>

#include "uwf/fno.hpp"

namespace uwf {

enum class LossKind { RelativeL2, Mse };

/// Optimization hyperparameters. Defaults follow the usual FNO recipe:
/// Adam with bias-corrected moments and no weight decay.
struct TrainConfig {
    int epochs = 100;
    int batch_size = 100;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;   ///< mini-batch shuffling stream
    LossKind loss = LossKind::RelativeL2;

    void validate() const;
};

/// Adam over a fixed list of parameter tensors. Updates run in list order
/// with sequential arithmetic, so training is reproducible.
class Adam {
  public:
    Adam(std::vector<Tensor*> params, const TrainConfig& cfg);

    /// One update from gradients aligned with the parameter list.
    void step(const std::vector<const Eigen::ArrayXd*>& grads);

  private:
    std::vector<Tensor*> params_;
    std::vector<Eigen::ArrayXd> m_, v_;
    double lr_, b1_, b2_, eps_, wd_;
    std::int64_t t_ = 0;
};

/// In-memory supervised pairs: inputs [N, C, H, W], targets [N, C', H, W].
struct TensorDataset {
    Tensor inputs;
    Tensor targets;

    int size() const { return inputs.shape.empty() ? 0 : inputs.dim(0); }
    void validate() const;
};

struct EpochLog {
    int epoch = 0;            ///< 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    FnoParameters best;       ///< parameters at the best validation epoch
    int best_epoch = 0;
    double best_val = 0.0;
    std::vector<EpochLog> log;
};

/// Mean loss of `params` over a dataset, computed in mini-batches without
/// recording gradients.
double evaluate_loss(const FnoParameters& params, const TensorDataset& data, LossKind loss,
                     int batch_size);

/// Full training loop: seeded initialization, shuffled mini-batches, Adam
/// steps, per-epoch validation, best-validation checkpointing. Non-finite
/// loss raises TrainingDiverged with the epoch and batch.
TrainResult train(const TensorDataset& train_set, const TensorDataset& val_set,
                  const FnoConfig& model_cfg, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = nullptr);

/// JSON-lines training log: one {epoch, train_loss, val_loss, wall_seconds}
/// object per line.
void write_training_log(const std::vector<EpochLog>& log, const std::string& path);

} // namespace uwf
