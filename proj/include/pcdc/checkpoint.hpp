#pragma once

#include <string>

#include "pcdc/codec.hpp"

namespace pcdc {

/// Everything needed to resume or evaluate a run: codec weights + quantizer
/// state, optional discriminator weights, and training progress. Values are
/// stored as raw 64-bit doubles so save/load round-trips bit-exactly.
struct Checkpoint {
    Codec codec;
    bool has_discriminator = false;
    ParameterStore discriminator;
    std::string task;  // "noise" | "reverb"
    int64_t steps_done = 0;
    int phase = 1;
    uint64_t seed = 0;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace pcdc
