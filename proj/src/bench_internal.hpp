#pragma once

#include <nlohmann/json.hpp>

#include "msprompt/bench.hpp"

namespace msprompt {

nlohmann::json modalities_json(const std::vector<ModalityKind>& kinds);
std::vector<ModalityKind> parse_modalities_json(const nlohmann::json& j);
nlohmann::json strategy_to_json(const PromptStrategy& s);
PromptStrategy strategy_from_json(const nlohmann::json& j);

std::string fixed3(double v);

}  // namespace msprompt
