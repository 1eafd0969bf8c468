#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ecgpcg/lasso.hpp"
#include "ecgpcg/lstm.hpp"
#include "ecgpcg/mlp.hpp"

namespace ecgpcg {

enum class ModelKind {
    Lasso,
    Mlp,
    Lstm,
};

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

using AnyModel = std::variant<LinearLassoModel, MlpModel, LstmModel>;

ModelKind model_kind(const AnyModel& model);

WindowScheme model_scheme(const AnyModel& model);
Direction model_direction(const AnyModel& model);
TargetKind model_target_kind(const AnyModel& model);
int model_input_len(const AnyModel& model);

// Scalar prediction for one input window; inference is dropout-free and pure.
double predict(const AnyModel& model, std::span<const double> window);

// One output sample per input sample. Samples whose window does not fit
// inside the record are emitted as zero; the evaluation guard is expected to
// exclude them. The scheme must match the one the model was trained with.
std::vector<double> reconstruct(const AnyModel& model, const std::vector<double>& input_series,
                                double fs, const WindowScheme& scheme);

// The provenance string is stored verbatim in the file header.
void save_model(const std::string& path, const AnyModel& model,
                const std::string& provenance = "");
AnyModel load_model(const std::string& path);

}  // namespace ecgpcg
