#pragma once

#include <string>

#include "sgs/trainer.hpp"

namespace sgs {

enum class Phase : uint8_t { kDeterministic = 0, kBayesian = 1 };

// Versioned binary container with a CRC32-protected payload; doubles are
// stored bit-exactly. Byte layout is documented in docs/formats.md.
struct Checkpoint {
  Phase phase = Phase::kDeterministic;
  Scene scene;              // deterministic payload
  VariationalScene vscene;  // Bayesian payload
  TrainConfig config;
  int iteration = 0;
  uint64_t seed = 0;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sgs
