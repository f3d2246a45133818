#pragma once

#include <string>

#include "sgs/trainer.hpp"

namespace sgs {

// Plain "key = value" text format mirroring TrainConfig; '#' starts a
// comment. Unknown keys are rejected with the offending line number.
TrainConfig parse_train_config(const std::string& text, const std::string& origin = "<string>");
TrainConfig load_train_config(const std::string& path);
void save_train_config(const std::string& path, const TrainConfig& config);

}  // namespace sgs
