#pragma once

#include <cstdint>

#include "ecgpcg/kv.hpp"

namespace ecgpcg {

enum class ParameterScale {
    WithinSubject,
    CrossSubject,
};

const char* parameter_scale_name(ParameterScale s);
ParameterScale parameter_scale_from_name(const std::string& name);

// Budgeted gradient training shared by the network trainers. Hidden widths
// are fixed per model family and doubled under CrossSubject.
struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 30;
    int batch_size = 256;
    std::uint64_t rng_seed = 1;
    int patience = 5;
    double holdout_fraction = 0.10;
    ParameterScale parameter_scale = ParameterScale::WithinSubject;
    // Sequence models may fold this many consecutive samples into one step.
    int frame = 1;

    void validate() const;
    kv::Map to_kv() const;
    static TrainConfig from_kv(const kv::Map& m);
};

}  // namespace ecgpcg
