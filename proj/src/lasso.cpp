#include "ecgpcg/lasso.hpp"

#include <cmath>

#include "ecgpcg/error.hpp"

namespace ecgpcg {

namespace {

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace

LinearLassoModel train_lasso(const WindowedDataset& ds, double lambda, double tol,
                             std::size_t max_iter, std::vector<double>* objective_trace) {
    if (ds.size() == 0) raise(ErrorKind::EmptyDataset, "cannot fit on an empty dataset");
    if (!(lambda >= 0.0)) raise(ErrorKind::InvalidConfig, "lambda must be >= 0");
    if (!(tol > 0.0)) raise(ErrorKind::InvalidConfig, "tol must be > 0");
    if (!ds.inputs.allFinite() || !ds.targets.allFinite())
        raise(ErrorKind::NonFiniteFeature, "dataset contains non-finite values");

    const Eigen::Index m = ds.inputs.rows();
    const Eigen::Index p = ds.inputs.cols();
    const double inv_m = 1.0 / static_cast<double>(m);

    const Eigen::RowVectorXd mu = ds.inputs.colwise().mean();
    Eigen::RowVectorXd sigma(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = (ds.inputs.col(j).array() - mu[j]).square().sum() * inv_m;
        sigma[j] = std::sqrt(std::max(var, 0.0));
    }

    // standardized design; constant columns are left at zero weight
    Eigen::MatrixXd xs(m, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (sigma[j] > 0.0)
            xs.col(j) = (ds.inputs.col(j).array() - mu[j]) / sigma[j];
        else
            xs.col(j).setZero();
    }
    const double y_mean = ds.targets.mean();
    Eigen::VectorXd yc = ds.targets.array() - y_mean;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = yc;

    for (std::size_t sweep = 0; sweep < max_iter; ++sweep) {
        double max_step = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (sigma[j] <= 0.0) continue;
            const double rho = inv_m * xs.col(j).dot(r) + w[j];
            const double wj = soft_threshold(rho, lambda);
            const double delta = wj - w[j];
            if (delta != 0.0) {
                r.noalias() -= xs.col(j) * delta;
                w[j] = wj;
            }
            max_step = std::max(max_step, std::abs(delta));
        }
        if (objective_trace)
            objective_trace->push_back(0.5 * inv_m * r.squaredNorm() +
                                       lambda * w.template lpNorm<1>());
        if (max_step < tol) break;
    }

    LinearLassoModel model;
    model.weights = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j)
        if (sigma[j] > 0.0) model.weights[j] = w[j] / sigma[j];
    model.bias = y_mean - model.weights.dot(mu.transpose());
    model.lambda = lambda;
    model.input_len = ds.input_len;
    model.scheme = ds.scheme;
    model.direction = ds.direction;
    model.target_kind = ds.target_kind;
    return model;
}

double grad_check_lasso(const LinearLassoModel& model, const Eigen::VectorXd& window,
                        double target, double epsilon) {
    LinearLassoModel m = model;
    auto loss = [&]() {
        const double yh = m.weights.dot(window) + m.bias;
        return 0.5 * (yh - target) * (yh - target) + m.lambda * m.weights.lpNorm<1>();
    };

    const double resid = m.weights.dot(window) + m.bias - target;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < m.weights.size(); ++j) {
        if (std::abs(m.weights[j]) <= 10.0 * epsilon) continue;
        const double analytic =
            resid * window[j] + m.lambda * (m.weights[j] > 0.0 ? 1.0 : -1.0);
        const double saved = m.weights[j];
        m.weights[j] = saved + epsilon;
        const double up = loss();
        m.weights[j] = saved - epsilon;
        const double down = loss();
        m.weights[j] = saved;
        const double fd = (up - down) / (2.0 * epsilon);
        const double rel =
            std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8});
        worst = std::max(worst, rel);
    }
    {
        const double saved = m.bias;
        m.bias = saved + epsilon;
        const double up = loss();
        m.bias = saved - epsilon;
        const double down = loss();
        m.bias = saved;
        const double fd = (up - down) / (2.0 * epsilon);
        const double rel = std::abs(resid - fd) / std::max({std::abs(resid), std::abs(fd), 1e-8});
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace ecgpcg
