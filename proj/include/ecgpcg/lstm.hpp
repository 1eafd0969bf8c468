#pragma once

#include <Eigen/Dense>

#include "ecgpcg/train.hpp"
#include "ecgpcg/windowing.hpp"

namespace ecgpcg {

// Gate rows are packed input, forget, cell candidate, output.
struct LstmLayer {
    Eigen::MatrixXd w;  // 4H x input size
    Eigen::MatrixXd r;  // 4H x H
    Eigen::VectorXd b;  // 4H

    Eigen::Index hidden() const { return r.cols(); }
    Eigen::Index in_size() const { return w.cols(); }
};

// Two stacked recurrent layers (200 and 100 units, doubled under
// CrossSubject) with a leaky-ReLU stage between them and 10% dropout on the
// inter-stage activations during training. The last hidden state feeds a
// 25-unit linear layer and a scalar head. Windows are consumed as
// time-ordered sequences; `frame` consecutive samples form one step.
struct LstmModel {
    LstmLayer l1, l2;
    Eigen::MatrixXd wd;  // 25*scale x H2
    Eigen::VectorXd bd;
    Eigen::RowVectorXd wo;  // 1 x 25*scale
    double bo = 0.0;

    double leaky_slope = 0.01;
    double dropout_rate = 0.10;

    int input_len = 0;
    int frame = 1;
    WindowScheme scheme;
    Direction direction = Direction::EcgToPcg;
    TargetKind target_kind = TargetKind::RawWaveform;
    TrainConfig cfg;

    // columns are windows; dropout off
    Eigen::RowVectorXd forward(const Eigen::MatrixXd& x) const;
};

LstmModel train_lstm(const WindowedDataset& ds, const TrainConfig& cfg);

double grad_check_lstm(const LstmModel& model, const Eigen::VectorXd& window, double target,
                       double epsilon = 1e-5, int n_params = 50, std::uint64_t seed = 1);

}  // namespace ecgpcg
