#include "ecgpcg/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ecgpcg/error.hpp"

namespace ecgpcg {

namespace {

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, double sd,
                              std::mt19937& rng) {
    std::normal_distribution<double> dist(0.0, sd);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    return m;
}

struct Adam {
    Eigen::ArrayXXd m, v;
    explicit Adam(const Eigen::MatrixXd& shape)
        : m(Eigen::ArrayXXd::Zero(shape.rows(), shape.cols())),
          v(Eigen::ArrayXXd::Zero(shape.rows(), shape.cols())) {}

    void step(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad, double lr,
              long t) {
        constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
        m = kB1 * m + (1.0 - kB1) * grad.array();
        v = kB2 * v + (1.0 - kB2) * grad.array().square();
        const double c1 = 1.0 - std::pow(kB1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(kB2, static_cast<double>(t));
        param.array() -= lr * (m / c1) / ((v / c2).sqrt() + kEps);
    }
};

struct Activations {
    Eigen::MatrixXd z1, a1, z2, a2, a2d;
    Eigen::RowVectorXd yhat;
};

Activations forward_train(const MlpModel& net, const Eigen::MatrixXd& x,
                          const Eigen::MatrixXd* dropout_mask) {
    Activations act;
    act.z1 = (net.w1 * x).colwise() + net.b1;
    act.a1 = act.z1.array().cwiseMax(0.0).cwiseMin(net.relu_ceiling);
    act.z2 = (net.w2 * act.a1).colwise() + net.b2;
    act.a2 = act.z2.array().cwiseMax(act.z2.array() * net.leaky_slope);
    act.a2d = dropout_mask ? act.a2.cwiseProduct(*dropout_mask) : act.a2;
    act.yhat = (net.w3 * act.a2d).array() + net.b3;
    return act;
}

struct Grads {
    Eigen::MatrixXd w1, w2;
    Eigen::VectorXd b1, b2;
    Eigen::RowVectorXd w3;
    double b3 = 0.0;
};

// dY holds dL/dyhat per column
Grads backward(const MlpModel& net, const Eigen::MatrixXd& x, const Activations& act,
               const Eigen::RowVectorXd& d_y, const Eigen::MatrixXd* dropout_mask) {
    Grads g;
    g.w3 = d_y * act.a2d.transpose();
    g.b3 = d_y.sum();
    Eigen::MatrixXd d_a2 = net.w3.transpose() * d_y;
    if (dropout_mask) d_a2 = d_a2.cwiseProduct(*dropout_mask);
    const Eigen::ArrayXXd leaky_gate =
        (act.z2.array() > 0.0).cast<double>() +
        (act.z2.array() <= 0.0).cast<double>() * net.leaky_slope;
    const Eigen::MatrixXd d_z2 = d_a2.array() * leaky_gate;
    g.w2 = d_z2 * act.a1.transpose();
    g.b2 = d_z2.rowwise().sum();
    const Eigen::MatrixXd d_a1 = net.w2.transpose() * d_z2;
    const Eigen::ArrayXXd clip_gate =
        ((act.z1.array() > 0.0) && (act.z1.array() < net.relu_ceiling)).cast<double>();
    const Eigen::MatrixXd d_z1 = d_a1.array() * clip_gate;
    g.w1 = d_z1 * x.transpose();
    g.b1 = d_z1.rowwise().sum();
    return g;
}

double mse(const MlpModel& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::RowVectorXd yhat = net.forward(x);
    return (yhat.transpose() - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

Eigen::RowVectorXd MlpModel::forward(const Eigen::MatrixXd& x) const {
    return forward_train(*this, x, nullptr).yhat;
}

MlpModel train_mlp(const WindowedDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.size() == 0) raise(ErrorKind::EmptyDataset, "cannot fit on an empty dataset");
    if (!ds.inputs.allFinite() || !ds.targets.allFinite())
        raise(ErrorKind::NonFiniteFeature, "dataset contains non-finite values");

    const int scale = cfg.parameter_scale == ParameterScale::CrossSubject ? 2 : 1;
    const Eigen::Index h1 = 50 * scale;
    const Eigen::Index h2 = 25 * scale;
    const Eigen::Index d = ds.inputs.cols();
    const Eigen::Index n = ds.inputs.rows();

    std::mt19937 rng(static_cast<std::uint32_t>(cfg.rng_seed));
    MlpModel net;
    net.w1 = normal_matrix(h1, d, std::sqrt(2.0 / static_cast<double>(d)), rng);
    net.b1 = Eigen::VectorXd::Zero(h1);
    net.w2 = normal_matrix(h2, h1, std::sqrt(2.0 / static_cast<double>(h1)), rng);
    net.b2 = Eigen::VectorXd::Zero(h2);
    net.w3 = normal_matrix(1, h2, std::sqrt(2.0 / static_cast<double>(h2)), rng);
    net.b3 = 0.0;
    net.input_len = ds.input_len;
    net.scheme = ds.scheme;
    net.direction = ds.direction;
    net.target_kind = ds.target_kind;
    net.cfg = cfg;

    const Eigen::Index n_hold =
        std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(
                                          std::floor(static_cast<double>(n) * cfg.holdout_fraction)));
    const Eigen::Index n_train = n - n_hold;
    const Eigen::MatrixXd train_x = ds.inputs.topRows(n_train).transpose();
    const Eigen::VectorXd train_y = ds.targets.head(n_train);
    const Eigen::MatrixXd hold_x = ds.inputs.bottomRows(n_hold).transpose();
    const Eigen::VectorXd hold_y = ds.targets.tail(n_hold);

    Adam ow1(net.w1), ob1(net.b1), ow2(net.w2), ob2(net.b2), ow3(net.w3);
    double mb3 = 0.0, vb3 = 0.0;
    long step = 0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep = 1.0 - net.dropout_rate;

    MlpModel best = net;
    double best_score = n_hold > 0 ? mse(net, hold_x, hold_y) : mse(net, train_x, train_y);
    int stale = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index at = 0; at < n_train; at += cfg.batch_size) {
            const Eigen::Index b =
                std::min<Eigen::Index>(cfg.batch_size, n_train - at);
            Eigen::MatrixXd xb(d, b);
            Eigen::VectorXd yb(b);
            for (Eigen::Index i = 0; i < b; ++i) {
                xb.col(i) = train_x.col(order[static_cast<std::size_t>(at + i)]);
                yb[i] = train_y[order[static_cast<std::size_t>(at + i)]];
            }

            Eigen::MatrixXd mask(h2, b);
            for (Eigen::Index c = 0; c < b; ++c)
                for (Eigen::Index r = 0; r < h2; ++r)
                    mask(r, c) = unit(rng) < keep ? 1.0 / keep : 0.0;

            const Activations act = forward_train(net, xb, &mask);
            const Eigen::RowVectorXd d_y =
                (act.yhat - yb.transpose()) / static_cast<double>(b);
            const double loss = 0.5 * (act.yhat - yb.transpose()).squaredNorm() /
                                static_cast<double>(b);
            if (!std::isfinite(loss))
                raise(ErrorKind::DivergedTraining, "training loss is not finite");

            const Grads g = backward(net, xb, act, d_y, &mask);
            ++step;
            ow1.step(net.w1, g.w1, cfg.learning_rate, step);
            ob1.step(net.b1, g.b1, cfg.learning_rate, step);
            ow2.step(net.w2, g.w2, cfg.learning_rate, step);
            ob2.step(net.b2, g.b2, cfg.learning_rate, step);
            ow3.step(net.w3, g.w3, cfg.learning_rate, step);
            constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
            mb3 = kB1 * mb3 + (1.0 - kB1) * g.b3;
            vb3 = kB2 * vb3 + (1.0 - kB2) * g.b3 * g.b3;
            const double c1 = 1.0 - std::pow(kB1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(kB2, static_cast<double>(step));
            net.b3 -= cfg.learning_rate * (mb3 / c1) / (std::sqrt(vb3 / c2) + kEps);
        }

        const double score = n_hold > 0 ? mse(net, hold_x, hold_y) : mse(net, train_x, train_y);
        if (!std::isfinite(score))
            raise(ErrorKind::DivergedTraining, "validation loss is not finite");
        if (score < best_score) {
            best_score = score;
            best = net;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    return best;
}

double grad_check_mlp(const MlpModel& model, const Eigen::VectorXd& window, double target,
                      double epsilon, int n_params, std::uint64_t seed) {
    MlpModel net = model;
    const Eigen::MatrixXd x = window;
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, target);

    const Activations act = forward_train(net, x, nullptr);
    Eigen::RowVectorXd d_y(1);
    d_y[0] = act.yhat[0] - target;
    const Grads g = backward(net, x, act, d_y, nullptr);

    std::vector<double*> params;
    std::vector<double> analytic;
    auto add = [&](Eigen::Ref<Eigen::MatrixXd> p, const Eigen::MatrixXd& gr) {
        for (Eigen::Index c = 0; c < p.cols(); ++c)
            for (Eigen::Index r = 0; r < p.rows(); ++r) {
                params.push_back(&p(r, c));
                analytic.push_back(gr(r, c));
            }
    };
    add(net.w1, g.w1);
    add(net.w2, g.w2);
    add(net.w3, g.w3);
    for (Eigen::Index r = 0; r < net.b1.size(); ++r) {
        params.push_back(&net.b1[r]);
        analytic.push_back(g.b1[r]);
    }
    for (Eigen::Index r = 0; r < net.b2.size(); ++r) {
        params.push_back(&net.b2[r]);
        analytic.push_back(g.b2[r]);
    }
    params.push_back(&net.b3);
    analytic.push_back(g.b3);

    auto loss = [&]() {
        const double yh = net.forward(x)[0];
        return 0.5 * (yh - target) * (yh - target);
    };

    std::mt19937 rng(static_cast<std::uint32_t>(seed));
    std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
    double worst = 0.0;
    const int count = std::min<int>(n_params, static_cast<int>(params.size()));
    for (int i = 0; i < count; ++i) {
        const std::size_t j = pick(rng);
        const double saved = *params[j];
        *params[j] = saved + epsilon;
        const double up = loss();
        *params[j] = saved - epsilon;
        const double down = loss();
        *params[j] = saved;
        const double fd = (up - down) / (2.0 * epsilon);
        // the floor keeps finite-difference noise on near-zero gradients from
        // drowning out the comparison
        const double rel = std::abs(analytic[j] - fd) /
                           std::max({std::abs(analytic[j]), std::abs(fd), 1e-3});
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace ecgpcg
