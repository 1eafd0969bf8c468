#pragma once

#include <Eigen/Dense>

#include "ecgpcg/train.hpp"
#include "ecgpcg/windowing.hpp"

namespace ecgpcg {

// Two hidden layers: clipped ReLU (ceiling 10) then leaky ReLU (slope 0.01),
// 10% inverted dropout after the second activation during training, scalar
// linear head. Widths 50/25, doubled under CrossSubject.
struct MlpModel {
    Eigen::MatrixXd w1;  // h1 x input_len
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // h2 x h1
    Eigen::VectorXd b2;
    Eigen::RowVectorXd w3;  // 1 x h2
    double b3 = 0.0;

    double dropout_rate = 0.10;
    double relu_ceiling = 10.0;
    double leaky_slope = 0.01;

    int input_len = 0;
    WindowScheme scheme;
    Direction direction = Direction::EcgToPcg;
    TargetKind target_kind = TargetKind::RawWaveform;
    TrainConfig cfg;

    // columns are samples; dropout off
    Eigen::RowVectorXd forward(const Eigen::MatrixXd& x) const;
};

MlpModel train_mlp(const WindowedDataset& ds, const TrainConfig& cfg);

// Max relative mismatch between analytic and central finite-difference
// gradients of the squared-error loss on one sample, over n_params randomly
// chosen parameters.
double grad_check_mlp(const MlpModel& model, const Eigen::VectorXd& window, double target,
                      double epsilon = 1e-5, int n_params = 50, std::uint64_t seed = 1);

}  // namespace ecgpcg
