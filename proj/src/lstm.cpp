#include "ecgpcg/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ecgpcg/error.hpp"

namespace ecgpcg {

namespace {

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) { return 1.0 / (1.0 + (-z).exp()); }

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, double sd,
                              std::mt19937& rng) {
    std::normal_distribution<double> dist(0.0, sd);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    return m;
}

LstmLayer make_layer(Eigen::Index in, Eigen::Index hidden, std::mt19937& rng) {
    LstmLayer layer;
    layer.w = normal_matrix(4 * hidden, in, std::sqrt(1.0 / static_cast<double>(in)), rng);
    layer.r = normal_matrix(4 * hidden, hidden, std::sqrt(1.0 / static_cast<double>(hidden)),
                            rng);
    layer.b = Eigen::VectorXd::Zero(4 * hidden);
    layer.b.segment(hidden, hidden).setOnes();  // open forget gates at start
    return layer;
}

// per-step state kept for backpropagation
struct LayerTrace {
    std::vector<Eigen::MatrixXd> gates;   // 4H x B, post-activation
    std::vector<Eigen::MatrixXd> c;       // H x B
    std::vector<Eigen::MatrixXd> tanh_c;  // H x B
    std::vector<Eigen::MatrixXd> h;       // H x B
};

void lstm_step(const LstmLayer& layer, const Eigen::MatrixXd& x_t,
               const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& c_prev,
               Eigen::MatrixXd& gates, Eigen::MatrixXd& c, Eigen::MatrixXd& tanh_c,
               Eigen::MatrixXd& h) {
    const Eigen::Index hidden = layer.hidden();
    Eigen::MatrixXd z = layer.w * x_t;
    z.noalias() += layer.r * h_prev;
    z.colwise() += layer.b;

    gates.resize(4 * hidden, x_t.cols());
    gates.topRows(2 * hidden) = sigmoid(z.topRows(2 * hidden).array());
    gates.middleRows(2 * hidden, hidden) = z.middleRows(2 * hidden, hidden).array().tanh();
    gates.bottomRows(hidden) = sigmoid(z.bottomRows(hidden).array());

    c = gates.middleRows(hidden, hidden).cwiseProduct(c_prev) +
        gates.topRows(hidden).cwiseProduct(gates.middleRows(2 * hidden, hidden));
    tanh_c = c.array().tanh();
    h = gates.bottomRows(hidden).cwiseProduct(tanh_c);
}

struct Trace {
    LayerTrace t1, t2;
    std::vector<Eigen::MatrixXd> a;  // inter-stage activations fed to layer 2
    Eigen::MatrixXd out25;
    Eigen::RowVectorXd yhat;
};

// x: input_len x B; mask (H1 x B) applies to every step when given
Trace forward_full(const LstmModel& net, const Eigen::MatrixXd& x,
                   const Eigen::MatrixXd* dropout_mask) {
    const Eigen::Index b = x.cols();
    const Eigen::Index h1 = net.l1.hidden();
    const Eigen::Index h2 = net.l2.hidden();
    const Eigen::Index steps = x.rows() / net.frame;

    Trace tr;
    tr.t1.gates.resize(steps);
    tr.t1.c.resize(steps);
    tr.t1.tanh_c.resize(steps);
    tr.t1.h.resize(steps);
    tr.t2 = tr.t1;
    tr.a.resize(steps);

    Eigen::MatrixXd h1_prev = Eigen::MatrixXd::Zero(h1, b);
    Eigen::MatrixXd c1_prev = h1_prev;
    Eigen::MatrixXd h2_prev = Eigen::MatrixXd::Zero(h2, b);
    Eigen::MatrixXd c2_prev = h2_prev;

    for (Eigen::Index t = 0; t < steps; ++t) {
        const Eigen::MatrixXd x_t = x.middleRows(t * net.frame, net.frame);
        lstm_step(net.l1, x_t, h1_prev, c1_prev, tr.t1.gates[t], tr.t1.c[t], tr.t1.tanh_c[t],
                  tr.t1.h[t]);
        h1_prev = tr.t1.h[t];
        c1_prev = tr.t1.c[t];

        Eigen::MatrixXd act =
            tr.t1.h[t].array().cwiseMax(tr.t1.h[t].array() * net.leaky_slope);
        if (dropout_mask) act = act.cwiseProduct(*dropout_mask);
        tr.a[t] = std::move(act);

        lstm_step(net.l2, tr.a[t], h2_prev, c2_prev, tr.t2.gates[t], tr.t2.c[t],
                  tr.t2.tanh_c[t], tr.t2.h[t]);
        h2_prev = tr.t2.h[t];
        c2_prev = tr.t2.c[t];
    }

    tr.out25 = (net.wd * tr.t2.h[steps - 1]).colwise() + net.bd;
    tr.yhat = (net.wo * tr.out25).array() + net.bo;
    return tr;
}

struct Grads {
    Eigen::MatrixXd w1, r1, w2, r2, wd;
    Eigen::VectorXd b1, b2, bd;
    Eigen::RowVectorXd wo;
    double bo = 0.0;
};

Grads zero_grads(const LstmModel& net) {
    Grads g;
    g.w1 = Eigen::MatrixXd::Zero(net.l1.w.rows(), net.l1.w.cols());
    g.r1 = Eigen::MatrixXd::Zero(net.l1.r.rows(), net.l1.r.cols());
    g.b1 = Eigen::VectorXd::Zero(net.l1.b.size());
    g.w2 = Eigen::MatrixXd::Zero(net.l2.w.rows(), net.l2.w.cols());
    g.r2 = Eigen::MatrixXd::Zero(net.l2.r.rows(), net.l2.r.cols());
    g.b2 = Eigen::VectorXd::Zero(net.l2.b.size());
    g.wd = Eigen::MatrixXd::Zero(net.wd.rows(), net.wd.cols());
    g.bd = Eigen::VectorXd::Zero(net.bd.size());
    g.wo = Eigen::RowVectorXd::Zero(net.wo.size());
    g.bo = 0.0;
    return g;
}

// d_y: 1 x B loss gradient at the scalar head
Grads backward_full(const LstmModel& net, const Eigen::MatrixXd& x, const Trace& tr,
                    const Eigen::RowVectorXd& d_y, const Eigen::MatrixXd* dropout_mask) {
    const Eigen::Index b = x.cols();
    const Eigen::Index h1 = net.l1.hidden();
    const Eigen::Index h2 = net.l2.hidden();
    const Eigen::Index steps = x.rows() / net.frame;

    Grads g = zero_grads(net);

    g.wo = d_y * tr.out25.transpose();
    g.bo = d_y.sum();
    const Eigen::MatrixXd d_out25 = net.wo.transpose() * d_y;
    g.wd = d_out25 * tr.t2.h[steps - 1].transpose();
    g.bd = d_out25.rowwise().sum();

    // layer 2 runs first so the inter-stage gradients can seed layer 1
    std::vector<Eigen::MatrixXd> d_h1_ext(steps, Eigen::MatrixXd::Zero(h1, b));
    {
        Eigen::MatrixXd d_h = net.wd.transpose() * d_out25;
        Eigen::MatrixXd d_c = Eigen::MatrixXd::Zero(h2, b);
        for (Eigen::Index t = steps - 1; t >= 0; --t) {
            const auto gate_i = tr.t2.gates[t].topRows(h2);
            const auto gate_f = tr.t2.gates[t].middleRows(h2, h2);
            const auto gate_g = tr.t2.gates[t].middleRows(2 * h2, h2);
            const auto gate_o = tr.t2.gates[t].bottomRows(h2);

            d_c.array() += d_h.array() * gate_o.array() *
                           (1.0 - tr.t2.tanh_c[t].array().square());
            Eigen::MatrixXd dz(4 * h2, b);
            dz.topRows(h2) = (d_c.array() * gate_g.array()) * gate_i.array() *
                             (1.0 - gate_i.array());
            const Eigen::MatrixXd c_prev =
                t > 0 ? tr.t2.c[t - 1] : Eigen::MatrixXd::Zero(h2, b);
            dz.middleRows(h2, h2) = (d_c.array() * c_prev.array()) * gate_f.array() *
                                    (1.0 - gate_f.array());
            dz.middleRows(2 * h2, h2) =
                (d_c.array() * gate_i.array()) * (1.0 - gate_g.array().square());
            dz.bottomRows(h2) = (d_h.array() * tr.t2.tanh_c[t].array()) * gate_o.array() *
                                (1.0 - gate_o.array());

            g.w2.noalias() += dz * tr.a[t].transpose();
            if (t > 0) g.r2.noalias() += dz * tr.t2.h[t - 1].transpose();
            g.b2.noalias() += dz.rowwise().sum();

            Eigen::MatrixXd d_a = net.l2.w.transpose() * dz;
            if (dropout_mask) d_a = d_a.cwiseProduct(*dropout_mask);
            const Eigen::ArrayXXd leaky_gate =
                (tr.t1.h[t].array() > 0.0).cast<double>() +
                (tr.t1.h[t].array() <= 0.0).cast<double>() * net.leaky_slope;
            d_h1_ext[t] = d_a.array() * leaky_gate;

            d_h = net.l2.r.transpose() * dz;
            d_c = d_c.cwiseProduct(gate_f);
        }
    }

    {
        Eigen::MatrixXd d_h = Eigen::MatrixXd::Zero(h1, b);
        Eigen::MatrixXd d_c = Eigen::MatrixXd::Zero(h1, b);
        for (Eigen::Index t = steps - 1; t >= 0; --t) {
            d_h += d_h1_ext[t];
            const auto gate_i = tr.t1.gates[t].topRows(h1);
            const auto gate_f = tr.t1.gates[t].middleRows(h1, h1);
            const auto gate_g = tr.t1.gates[t].middleRows(2 * h1, h1);
            const auto gate_o = tr.t1.gates[t].bottomRows(h1);

            d_c.array() += d_h.array() * gate_o.array() *
                           (1.0 - tr.t1.tanh_c[t].array().square());
            Eigen::MatrixXd dz(4 * h1, b);
            dz.topRows(h1) = (d_c.array() * gate_g.array()) * gate_i.array() *
                             (1.0 - gate_i.array());
            const Eigen::MatrixXd c_prev =
                t > 0 ? tr.t1.c[t - 1] : Eigen::MatrixXd::Zero(h1, b);
            dz.middleRows(h1, h1) = (d_c.array() * c_prev.array()) * gate_f.array() *
                                    (1.0 - gate_f.array());
            dz.middleRows(2 * h1, h1) =
                (d_c.array() * gate_i.array()) * (1.0 - gate_g.array().square());
            dz.bottomRows(h1) = (d_h.array() * tr.t1.tanh_c[t].array()) * gate_o.array() *
                                (1.0 - gate_o.array());

            g.w1.noalias() += dz * x.middleRows(t * net.frame, net.frame).transpose();
            if (t > 0) g.r1.noalias() += dz * tr.t1.h[t - 1].transpose();
            g.b1.noalias() += dz.rowwise().sum();

            d_h = net.l1.r.transpose() * dz;
            d_c = d_c.cwiseProduct(gate_f);
        }
    }
    return g;
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

double mse_batched(const LstmModel& net, const Eigen::MatrixXd& x_cols,
                   const Eigen::VectorXd& y) {
    const Eigen::Index n = x_cols.cols();
    double acc = 0.0;
    constexpr Eigen::Index kChunk = 512;
    for (Eigen::Index at = 0; at < n; at += kChunk) {
        const Eigen::Index b = std::min(kChunk, n - at);
        const Eigen::RowVectorXd yh = net.forward(x_cols.middleCols(at, b));
        acc += (yh.transpose() - y.segment(at, b)).squaredNorm();
    }
    return acc / static_cast<double>(n);
}

}  // namespace

Eigen::RowVectorXd LstmModel::forward(const Eigen::MatrixXd& x) const {
    const Eigen::Index b = x.cols();
    const Eigen::Index h1n = l1.hidden();
    const Eigen::Index h2n = l2.hidden();
    const Eigen::Index steps = x.rows() / frame;

    Eigen::MatrixXd h1 = Eigen::MatrixXd::Zero(h1n, b), c1 = h1;
    Eigen::MatrixXd h2 = Eigen::MatrixXd::Zero(h2n, b), c2 = h2;
    Eigen::MatrixXd gates, c, tanh_c, h;
    for (Eigen::Index t = 0; t < steps; ++t) {
        lstm_step(l1, x.middleRows(t * frame, frame), h1, c1, gates, c, tanh_c, h);
        h1 = h;
        c1 = c;
        const Eigen::MatrixXd act = h1.array().cwiseMax(h1.array() * leaky_slope);
        lstm_step(l2, act, h2, c2, gates, c, tanh_c, h);
        h2 = h;
        c2 = c;
    }
    const Eigen::MatrixXd out25 = (wd * h2).colwise() + bd;
    return (wo * out25).array() + bo;
}

LstmModel train_lstm(const WindowedDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.size() == 0) raise(ErrorKind::EmptyDataset, "cannot fit on an empty dataset");
    if (!ds.inputs.allFinite() || !ds.targets.allFinite())
        raise(ErrorKind::NonFiniteFeature, "dataset contains non-finite values");
    if (ds.input_len % cfg.frame != 0)
        raise(ErrorKind::InvalidConfig, "window length is not a multiple of the frame size");

    const int scale = cfg.parameter_scale == ParameterScale::CrossSubject ? 2 : 1;
    const Eigen::Index h1 = 200 * scale;
    const Eigen::Index h2 = 100 * scale;
    const Eigen::Index hd = 25 * scale;
    const Eigen::Index n = ds.inputs.rows();

    std::mt19937 rng(static_cast<std::uint32_t>(cfg.rng_seed));
    LstmModel net;
    net.l1 = make_layer(cfg.frame, h1, rng);
    net.l2 = make_layer(h1, h2, rng);
    net.wd = normal_matrix(hd, h2, std::sqrt(1.0 / static_cast<double>(h2)), rng);
    net.bd = Eigen::VectorXd::Zero(hd);
    net.wo = normal_matrix(1, hd, std::sqrt(1.0 / static_cast<double>(hd)), rng);
    net.bo = 0.0;
    net.input_len = ds.input_len;
    net.frame = cfg.frame;
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

    Adam ow1(net.l1.w), or1(net.l1.r), ob1(net.l1.b), ow2(net.l2.w), or2(net.l2.r),
        ob2(net.l2.b), owd(net.wd), obd(net.bd), owo(net.wo);
    double mbo = 0.0, vbo = 0.0;
    long step = 0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep = 1.0 - net.dropout_rate;

    LstmModel best = net;
    double best_score =
        n_hold > 0 ? mse_batched(net, hold_x, hold_y) : mse_batched(net, train_x, train_y);
    int stale = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index at = 0; at < n_train; at += cfg.batch_size) {
            const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n_train - at);
            Eigen::MatrixXd xb(ds.input_len, b);
            Eigen::VectorXd yb(b);
            for (Eigen::Index i = 0; i < b; ++i) {
                xb.col(i) = train_x.col(order[static_cast<std::size_t>(at + i)]);
                yb[i] = train_y[order[static_cast<std::size_t>(at + i)]];
            }

            Eigen::MatrixXd mask(h1, b);
            for (Eigen::Index col = 0; col < b; ++col)
                for (Eigen::Index row = 0; row < h1; ++row)
                    mask(row, col) = unit(rng) < keep ? 1.0 / keep : 0.0;

            const Trace tr = forward_full(net, xb, &mask);
            const Eigen::RowVectorXd d_y =
                (tr.yhat - yb.transpose()) / static_cast<double>(b);
            const double loss = 0.5 * (tr.yhat - yb.transpose()).squaredNorm() /
                                static_cast<double>(b);
            if (!std::isfinite(loss))
                raise(ErrorKind::DivergedTraining, "training loss is not finite");

            const Grads g = backward_full(net, xb, tr, d_y, &mask);
            ++step;
            ow1.step(net.l1.w, g.w1, cfg.learning_rate, step);
            or1.step(net.l1.r, g.r1, cfg.learning_rate, step);
            ob1.step(net.l1.b, g.b1, cfg.learning_rate, step);
            ow2.step(net.l2.w, g.w2, cfg.learning_rate, step);
            or2.step(net.l2.r, g.r2, cfg.learning_rate, step);
            ob2.step(net.l2.b, g.b2, cfg.learning_rate, step);
            owd.step(net.wd, g.wd, cfg.learning_rate, step);
            obd.step(net.bd, g.bd, cfg.learning_rate, step);
            owo.step(net.wo, g.wo, cfg.learning_rate, step);
            constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
            mbo = kB1 * mbo + (1.0 - kB1) * g.bo;
            vbo = kB2 * vbo + (1.0 - kB2) * g.bo * g.bo;
            const double c1 = 1.0 - std::pow(kB1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(kB2, static_cast<double>(step));
            net.bo -= cfg.learning_rate * (mbo / c1) / (std::sqrt(vbo / c2) + kEps);
        }

        const double score = n_hold > 0 ? mse_batched(net, hold_x, hold_y)
                                        : mse_batched(net, train_x, train_y);
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

double grad_check_lstm(const LstmModel& model, const Eigen::VectorXd& window, double target,
                       double epsilon, int n_params, std::uint64_t seed) {
    LstmModel net = model;
    const Eigen::MatrixXd x = window;

    const Trace tr = forward_full(net, x, nullptr);
    Eigen::RowVectorXd d_y(1);
    d_y[0] = tr.yhat[0] - target;
    const Grads g = backward_full(net, x, tr, d_y, nullptr);

    std::vector<double*> params;
    std::vector<double> analytic;
    auto add = [&](Eigen::Ref<Eigen::MatrixXd> p, const Eigen::MatrixXd& gr) {
        for (Eigen::Index c = 0; c < p.cols(); ++c)
            for (Eigen::Index r = 0; r < p.rows(); ++r) {
                params.push_back(&p(r, c));
                analytic.push_back(gr(r, c));
            }
    };
    add(net.l1.w, g.w1);
    add(net.l1.r, g.r1);
    add(net.l2.w, g.w2);
    add(net.l2.r, g.r2);
    add(net.wd, g.wd);
    for (Eigen::Index r = 0; r < net.l1.b.size(); ++r) {
        params.push_back(&net.l1.b[r]);
        analytic.push_back(g.b1[r]);
    }
    for (Eigen::Index r = 0; r < net.l2.b.size(); ++r) {
        params.push_back(&net.l2.b[r]);
        analytic.push_back(g.b2[r]);
    }
    for (Eigen::Index r = 0; r < net.bd.size(); ++r) {
        params.push_back(&net.bd[r]);
        analytic.push_back(g.bd[r]);
    }
    for (Eigen::Index r = 0; r < net.wo.size(); ++r) {
        params.push_back(&net.wo[r]);
        analytic.push_back(g.wo[r]);
    }
    params.push_back(&net.bo);
    analytic.push_back(g.bo);

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
