#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "ecgpcg/windowing.hpp"

namespace ecgpcg {

struct LinearLassoModel {
    Eigen::VectorXd weights;  // raw feature units
    double bias = 0.0;
    double lambda = 0.0;
    int input_len = 0;
    WindowScheme scheme;
    Direction direction = Direction::EcgToPcg;
    TargetKind target_kind = TargetKind::RawWaveform;
};

// Cyclic coordinate descent with soft thresholding. Features are standardized
// internally on the training set and the stored weights are mapped back to
// raw units. Objective: mean squared residual / 2 + lambda * |w|_1 in the
// standardized space. objective_trace, when provided, records the objective
// after every full sweep.
LinearLassoModel train_lasso(const WindowedDataset& ds, double lambda, double tol = 1e-7,
                             std::size_t max_iter = 1000,
                             std::vector<double>* objective_trace = nullptr);

// Compares the analytic gradient of the penalized squared-error loss on one
// sample against central finite differences. Coordinates within 10*epsilon of
// a soft-threshold kink are skipped. Returns the max relative mismatch.
double grad_check_lasso(const LinearLassoModel& model, const Eigen::VectorXd& window,
                        double target, double epsilon = 1e-5);

}  // namespace ecgpcg
