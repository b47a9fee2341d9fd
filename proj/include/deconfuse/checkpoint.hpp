#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deconfuse/forest.hpp"
#include "deconfuse/model.hpp"
#include "deconfuse/ridge.hpp"

namespace deconfuse {

/// Versioned binary checkpoint container. Layout (all integers and floats
/// little-endian):
///   magic "DCFCHKPT", u32 version, u32 section count,
///   then per section: 4-byte tag, u64 payload size, payload.
/// Section MODL holds the model (C, L, per channel and layer the geometry
/// M, in, P, stride, padding, activation, pooling, plus row-major f64
/// weights, then per channel the I x O fusion transform). Sections RIDG and
/// FRST hold the task heads. A .json sidecar mirrors all dimensions.
struct Checkpoint {
  std::optional<DeconfuseModel> model;
  std::vector<std::pair<std::size_t, RidgeModel>> ridge_heads;  // (target channel, model)
  std::optional<ForestModel> forest;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

/// Convenience wrappers for the common single-section files.
void save_model_checkpoint(const std::string& path, const DeconfuseModel& model);
DeconfuseModel load_model_checkpoint(const std::string& path);

}  // namespace deconfuse
