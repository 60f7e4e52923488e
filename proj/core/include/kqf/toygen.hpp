#pragma once

#include <cstdint>
#include <string>

#include "kqf/arch.hpp"
#include "kqf/gguf.hpp"

namespace kqf {

// Small MoE model for end-to-end tests: every weight matrix row length is a
// multiple of 256 so all super-block formats apply without fallback.
ModelArch toy_arch();

// Deterministic synthetic weights: each tensor is seeded from (seed, name) so
// the result does not depend on generation order or thread count. Values are
// approximately unit Gaussian.
ContainerFile toy_container(const ModelArch& arch, uint64_t seed);

}  // namespace kqf
