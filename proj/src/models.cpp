#include "ecgpcg/models.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include "ecgpcg/error.hpp"

namespace ecgpcg {

const char* parameter_scale_name(ParameterScale s) {
    return s == ParameterScale::WithinSubject ? "within_subject" : "cross_subject";
}

ParameterScale parameter_scale_from_name(const std::string& name) {
    if (name == "within_subject") return ParameterScale::WithinSubject;
    if (name == "cross_subject") return ParameterScale::CrossSubject;
    raise(ErrorKind::InvalidConfig, "unknown parameter scale '" + name + "'");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) raise(ErrorKind::InvalidConfig, "learning_rate must be > 0");
    if (epochs < 1) raise(ErrorKind::InvalidConfig, "epochs must be >= 1");
    if (batch_size < 1) raise(ErrorKind::InvalidConfig, "batch_size must be >= 1");
    if (patience < 1) raise(ErrorKind::InvalidConfig, "patience must be >= 1");
    if (!(holdout_fraction >= 0.0 && holdout_fraction <= 0.5))
        raise(ErrorKind::InvalidConfig, "holdout_fraction must be in [0, 0.5]");
    if (frame < 1) raise(ErrorKind::InvalidConfig, "frame must be >= 1");
}

kv::Map TrainConfig::to_kv() const {
    kv::Map m;
    m["learning_rate"] = kv::format_num(learning_rate);
    m["epochs"] = std::to_string(epochs);
    m["batch_size"] = std::to_string(batch_size);
    m["rng_seed"] = std::to_string(rng_seed);
    m["patience"] = std::to_string(patience);
    m["holdout_fraction"] = kv::format_num(holdout_fraction);
    m["parameter_scale"] = parameter_scale_name(parameter_scale);
    m["frame"] = std::to_string(frame);
    return m;
}

TrainConfig TrainConfig::from_kv(const kv::Map& m) {
    TrainConfig cfg;
    cfg.learning_rate = kv::get_num(m, "learning_rate", cfg.learning_rate);
    cfg.epochs = static_cast<int>(kv::get_int(m, "epochs", cfg.epochs));
    cfg.batch_size = static_cast<int>(kv::get_int(m, "batch_size", cfg.batch_size));
    cfg.rng_seed = static_cast<std::uint64_t>(
        kv::get_int(m, "rng_seed", static_cast<long>(cfg.rng_seed)));
    cfg.patience = static_cast<int>(kv::get_int(m, "patience", cfg.patience));
    cfg.holdout_fraction = kv::get_num(m, "holdout_fraction", cfg.holdout_fraction);
    cfg.parameter_scale =
        parameter_scale_from_name(kv::get(m, "parameter_scale", "within_subject"));
    cfg.frame = static_cast<int>(kv::get_int(m, "frame", cfg.frame));
    cfg.validate();
    return cfg;
}

const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Lasso: return "lasso";
        case ModelKind::Mlp: return "mlp";
        case ModelKind::Lstm: return "lstm";
    }
    return "?";
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "lasso") return ModelKind::Lasso;
    if (name == "mlp") return ModelKind::Mlp;
    if (name == "lstm") return ModelKind::Lstm;
    raise(ErrorKind::InvalidConfig, "unknown model kind '" + name + "'");
}

ModelKind model_kind(const AnyModel& model) {
    return static_cast<ModelKind>(model.index());
}

WindowScheme model_scheme(const AnyModel& model) {
    return std::visit([](const auto& m) { return m.scheme; }, model);
}

Direction model_direction(const AnyModel& model) {
    return std::visit([](const auto& m) { return m.direction; }, model);
}

TargetKind model_target_kind(const AnyModel& model) {
    return std::visit([](const auto& m) { return m.target_kind; }, model);
}

int model_input_len(const AnyModel& model) {
    return std::visit([](const auto& m) { return m.input_len; }, model);
}

namespace {

int stored_input_len(const AnyModel& model) { return model_input_len(model); }

const WindowScheme& stored_scheme(const AnyModel& model) {
    return std::visit([](const auto& m) -> const WindowScheme& { return m.scheme; }, model);
}

// batched forward for one chunk; x has one window per column
Eigen::RowVectorXd forward_chunk(const AnyModel& model, const Eigen::MatrixXd& x) {
    if (const auto* lasso = std::get_if<LinearLassoModel>(&model))
        return ((lasso->weights.transpose() * x).array() + lasso->bias).matrix();
    if (const auto* mlp = std::get_if<MlpModel>(&model)) return mlp->forward(x);
    return std::get<LstmModel>(model).forward(x);
}

}  // namespace

double predict(const AnyModel& model, std::span<const double> window) {
    const int len = stored_input_len(model);
    if (static_cast<int>(window.size()) != len)
        raise(ErrorKind::LengthMismatch, "window length does not match the model input");
    Eigen::MatrixXd x(len, 1);
    for (int i = 0; i < len; ++i) x(i, 0) = window[static_cast<std::size_t>(i)];
    return forward_chunk(model, x)[0];
}

std::vector<double> reconstruct(const AnyModel& model, const std::vector<double>& input_series,
                                double fs, const WindowScheme& scheme) {
    const WindowScheme& own = stored_scheme(model);
    if (scheme.kind != own.kind || std::abs(scheme.delta_t_s - own.delta_t_s) > 1e-12 ||
        scheme.input_len(fs) != stored_input_len(model))
        raise(ErrorKind::SchemeMismatch,
              "reconstruction scheme does not match the trained model");

    const long n = static_cast<long>(input_series.size());
    const long len = stored_input_len(model);
    const long half = std::llround(scheme.delta_t_s * fs);
    const long start_off = scheme.kind == SchemeKind::AntiCausal ? 0 : -half;

    std::vector<double> out(input_series.size(), 0.0);
    std::vector<long> valid;
    valid.reserve(input_series.size());
    for (long k = 0; k < n; ++k) {
        const long s = k + start_off;
        if (s >= 0 && s + len <= n) valid.push_back(k);
    }

    const Eigen::Index chunk = 1024;
    for (std::size_t at = 0; at < valid.size(); at += static_cast<std::size_t>(chunk)) {
        const Eigen::Index b = static_cast<Eigen::Index>(
            std::min<std::size_t>(static_cast<std::size_t>(chunk), valid.size() - at));
        Eigen::MatrixXd x(len, b);
        for (Eigen::Index i = 0; i < b; ++i) {
            const long s = valid[at + static_cast<std::size_t>(i)] + start_off;
            for (long j = 0; j < len; ++j)
                x(j, i) = input_series[static_cast<std::size_t>(s + j)];
        }
        const Eigen::RowVectorXd yh = forward_chunk(model, x);
        for (Eigen::Index i = 0; i < b; ++i)
            out[static_cast<std::size_t>(valid[at + static_cast<std::size_t>(i)])] = yh[i];
    }
    return out;
}

namespace {

constexpr char kMagic[9] = "EPML0001";

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) raise(ErrorKind::MalformedFile, "truncated model file '" + path + "'");
    return v;
}

void put_mat(std::ofstream& out, const Eigen::MatrixXd& m) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) put(out, m(r, c));
}

Eigen::MatrixXd take_mat(std::ifstream& in, const std::string& path) {
    const auto rows = take<std::uint64_t>(in, path);
    const auto cols = take<std::uint64_t>(in, path);
    if (rows > (1u << 24) || cols > (1u << 24))
        raise(ErrorKind::MalformedFile, "implausible matrix shape in '" + path + "'");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = take<double>(in, path);
    return m;
}

void put_string(std::ofstream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::ifstream& in, const std::string& path) {
    const auto len = take<std::uint32_t>(in, path);
    if (len > (1u << 20)) raise(ErrorKind::MalformedFile, "implausible string in '" + path + "'");
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) raise(ErrorKind::MalformedFile, "truncated model file '" + path + "'");
    return s;
}

void put_header(std::ofstream& out, const std::string& provenance, ModelKind kind,
                const WindowScheme& scheme, Direction direction, TargetKind target,
                int input_len, const std::string& cfg_echo) {
    out.write(kMagic, 8);
    put_string(out, provenance);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(kind));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(scheme.kind));
    put<double>(out, scheme.delta_t_s);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(direction));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(target));
    put<std::int32_t>(out, input_len);
    put_string(out, cfg_echo);
}

}  // namespace

void save_model(const std::string& path, const AnyModel& model,
                const std::string& provenance) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");

    if (const auto* lasso = std::get_if<LinearLassoModel>(&model)) {
        kv::Map echo;
        echo["lambda"] = kv::format_num(lasso->lambda);
        put_header(out, provenance, ModelKind::Lasso, lasso->scheme, lasso->direction, lasso->target_kind,
                   lasso->input_len, kv::serialize(echo));
        put<double>(out, lasso->bias);
        put<double>(out, lasso->lambda);
        put_mat(out, lasso->weights);
    } else if (const auto* mlp = std::get_if<MlpModel>(&model)) {
        put_header(out, provenance, ModelKind::Mlp, mlp->scheme, mlp->direction, mlp->target_kind,
                   mlp->input_len, kv::serialize(mlp->cfg.to_kv()));
        put<double>(out, mlp->dropout_rate);
        put<double>(out, mlp->relu_ceiling);
        put<double>(out, mlp->leaky_slope);
        put<double>(out, mlp->b3);
        put_mat(out, mlp->w1);
        put_mat(out, mlp->b1);
        put_mat(out, mlp->w2);
        put_mat(out, mlp->b2);
        put_mat(out, mlp->w3);
    } else {
        const auto& net = std::get<LstmModel>(model);
        put_header(out, provenance, ModelKind::Lstm, net.scheme, net.direction, net.target_kind,
                   net.input_len, kv::serialize(net.cfg.to_kv()));
        put<double>(out, net.dropout_rate);
        put<double>(out, net.leaky_slope);
        put<double>(out, net.bo);
        put<std::int32_t>(out, net.frame);
        put_mat(out, net.l1.w);
        put_mat(out, net.l1.r);
        put_mat(out, net.l1.b);
        put_mat(out, net.l2.w);
        put_mat(out, net.l2.r);
        put_mat(out, net.l2.b);
        put_mat(out, net.wd);
        put_mat(out, net.bd);
        put_mat(out, net.wo);
    }
    if (!out) raise(ErrorKind::IoFailure, "failed writing '" + path + "'");
}

AnyModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::IoFailure, "cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != kMagic)
        raise(ErrorKind::MalformedFile, "'" + path + "' is not a model file");
    take_string(in, path);  // stored provenance, not needed to rebuild the model

    const auto kind = static_cast<ModelKind>(take<std::uint32_t>(in, path));
    WindowScheme scheme;
    scheme.kind = static_cast<SchemeKind>(take<std::uint32_t>(in, path));
    scheme.delta_t_s = take<double>(in, path);
    const auto direction = static_cast<Direction>(take<std::uint32_t>(in, path));
    const auto target = static_cast<TargetKind>(take<std::uint32_t>(in, path));
    const int input_len = take<std::int32_t>(in, path);
    const std::string echo = take_string(in, path);

    if (kind == ModelKind::Lasso) {
        LinearLassoModel m;
        m.scheme = scheme;
        m.direction = direction;
        m.target_kind = target;
        m.input_len = input_len;
        m.bias = take<double>(in, path);
        m.lambda = take<double>(in, path);
        m.weights = take_mat(in, path);
        return m;
    }
    if (kind == ModelKind::Mlp) {
        MlpModel m;
        m.scheme = scheme;
        m.direction = direction;
        m.target_kind = target;
        m.input_len = input_len;
        m.cfg = TrainConfig::from_kv(kv::parse(echo));
        m.dropout_rate = take<double>(in, path);
        m.relu_ceiling = take<double>(in, path);
        m.leaky_slope = take<double>(in, path);
        m.b3 = take<double>(in, path);
        m.w1 = take_mat(in, path);
        m.b1 = take_mat(in, path);
        m.w2 = take_mat(in, path);
        m.b2 = take_mat(in, path);
        m.w3 = take_mat(in, path);
        return m;
    }
    if (kind == ModelKind::Lstm) {
        LstmModel m;
        m.scheme = scheme;
        m.direction = direction;
        m.target_kind = target;
        m.input_len = input_len;
        m.cfg = TrainConfig::from_kv(kv::parse(echo));
        m.dropout_rate = take<double>(in, path);
        m.leaky_slope = take<double>(in, path);
        m.bo = take<double>(in, path);
        m.frame = take<std::int32_t>(in, path);
        m.l1.w = take_mat(in, path);
        m.l1.r = take_mat(in, path);
        m.l1.b = take_mat(in, path);
        m.l2.w = take_mat(in, path);
        m.l2.r = take_mat(in, path);
        m.l2.b = take_mat(in, path);
        m.wd = take_mat(in, path);
        m.bd = take_mat(in, path);
        m.wo = take_mat(in, path);
        return m;
    }
    raise(ErrorKind::MalformedFile, "unknown model kind in '" + path + "'");
}

}  // namespace ecgpcg
