#include "uwf/train.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "uwf/rng.hpp"

namespace uwf {

namespace {

// Rows `idx` of a [N, ...] tensor gathered into a fresh [idx.size(), ...]
// tensor.
Tensor gather_rows(const Tensor& t, const std::vector<int>& idx) {
    std::vector<int> shape = t.shape;
    shape[0] = int(idx.size());
    const std::int64_t per = t.size() / t.dim(0);
    Tensor out = Tensor::zeros(shape);
    for (size_t i = 0; i < idx.size(); ++i)
        out.data.segment(std::int64_t(i) * per, per) = t.data.segment(idx[size_t(i)] * per, per);
    return out;
}

Var loss_node(Tape& tape, LossKind kind, Var pred, Var target) {
    return kind == LossKind::RelativeL2 ? tape.relative_l2(pred, target)
                                        : tape.mse(pred, target);
}

} // namespace

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1)
        throw ContractError("TrainConfig: epochs and batch_size must be at least 1");
    if (learning_rate <= 0.0 || epsilon <= 0.0)
        throw ContractError("TrainConfig: learning_rate and epsilon must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ContractError("TrainConfig: betas must lie in [0, 1)");
}

void TensorDataset::validate() const {
    if (inputs.shape.size() != 4 || targets.shape.size() != 4)
        throw ContractError("TensorDataset: inputs and targets must be [N,C,H,W]");
    if (inputs.dim(0) != targets.dim(0))
        throw ContractError("TensorDataset: inputs and targets disagree on N");
    if (inputs.dim(2) != targets.dim(2) || inputs.dim(3) != targets.dim(3))
        throw ContractError("TensorDataset: inputs and targets disagree on H, W");
}

Adam::Adam(std::vector<Tensor*> params, const TrainConfig& cfg)
    : params_(std::move(params)), lr_(cfg.learning_rate), b1_(cfg.beta1), b2_(cfg.beta2),
      eps_(cfg.epsilon), wd_(cfg.weight_decay) {
    for (Tensor* p : params_) {
        m_.emplace_back(Eigen::ArrayXd::Zero(p->size()));
        v_.emplace_back(Eigen::ArrayXd::Zero(p->size()));
    }
}

void Adam::step(const std::vector<const Eigen::ArrayXd*>& grads) {
    if (grads.size() != params_.size())
        throw ContractError("Adam::step: gradient list does not match the parameter list");
    ++t_;
    const double mc = 1.0 - std::pow(b1_, double(t_));
    const double vc = 1.0 - std::pow(b2_, double(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Eigen::ArrayXd& theta = params_[i]->data;
        Eigen::ArrayXd g = *grads[i];
        if (wd_ != 0.0) g += wd_ * theta;
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.square();
        theta -= lr_ * (m_[i] / mc) / ((v_[i] / vc).sqrt() + eps_);
    }
}

double evaluate_loss(const FnoParameters& params, const TensorDataset& data, LossKind loss,
                     int batch_size) {
    data.validate();
    const int n = data.size();
    if (n == 0) throw ContractError("evaluate_loss: empty dataset");
    double acc = 0.0;
    for (int start = 0; start < n; start += batch_size) {
        const int b = std::min(batch_size, n - start);
        std::vector<int> idx(static_cast<size_t>(b));
        std::iota(idx.begin(), idx.end(), start);
        Tape tape;
        FnoVars vars = register_parameters(tape, params, false);
        Var in = tape.input(gather_rows(data.inputs, idx));
        Var tgt = tape.input(gather_rows(data.targets, idx));
        Var l = loss_node(tape, loss, fno_forward(tape, params.config, vars, in).output, tgt);
        acc += tape.value(l).data[0] * b;
    }
    return acc / n;
}

TrainResult train(const TensorDataset& train_set, const TensorDataset& val_set,
                  const FnoConfig& model_cfg, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
    cfg.validate();
    train_set.validate();
    val_set.validate();
    if (train_set.size() == 0) throw ContractError("train: empty training split");

    FnoParameters params = init_fno(model_cfg);
    std::vector<Tensor*> tensors = params.tensors();
    Adam opt(tensors, cfg);
    UnitRng shuffle_rng(cfg.seed);

    TrainResult result;
    result.best_val = std::numeric_limits<double>::infinity();

    std::vector<int> order(size_t(train_set.size()));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle(order, shuffle_rng);
        double train_acc = 0.0;
        int batch_index = 0;
        for (int start = 0; start < train_set.size(); start += cfg.batch_size, ++batch_index) {
            const int b = std::min(cfg.batch_size, train_set.size() - start);
            const std::vector<int> idx(order.begin() + start, order.begin() + start + b);

            Tape tape;
            FnoVars vars = register_parameters(tape, params, true);
            Var in = tape.input(gather_rows(train_set.inputs, idx));
            Var tgt = tape.input(gather_rows(train_set.targets, idx));
            Var l = loss_node(tape, cfg.loss,
                              fno_forward(tape, model_cfg, vars, in).output, tgt);
            const double batch_loss = tape.value(l).data[0];
            if (!std::isfinite(batch_loss))
                throw TrainingDiverged(epoch, batch_index,
                                       "train: non-finite training loss");
            tape.backward(l);

            std::vector<const Eigen::ArrayXd*> grads;
            for (Var v : vars.ordered()) grads.push_back(&tape.grad(v).data);
            opt.step(grads);
            train_acc += batch_loss * b;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = train_acc / train_set.size();
        entry.val_loss = evaluate_loss(params, val_set, cfg.loss, cfg.batch_size);
        if (!std::isfinite(entry.val_loss))
            throw TrainingDiverged(epoch, -1, "train: non-finite validation loss");
        entry.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);

        if (entry.val_loss < result.best_val) {
            result.best_val = entry.val_loss;
            result.best_epoch = epoch;
            result.best = params;
        }
    }
    return result;
}

void write_training_log(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("write_training_log: cannot open " + path);
    for (const EpochLog& e : log) {
        nlohmann::json line = {{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"val_loss", e.val_loss},
                               {"wall_seconds", e.wall_seconds}};
        f << line.dump() << "\n";
    }
}

} // namespace uwf
