#pragma once

#include <string>

#include "cpps/grid.hpp"

namespace cpps::grid {

/// JSON form of a scenario set: seed, anomaly times, and per-snapshot
/// complex vectors as [re, im] pairs. Doubles use shortest round-trip
/// formatting, so save/load reproduces every value bit for bit.
std::string scenarios_to_json(const ScenarioSet& set);
ScenarioSet scenarios_from_json(const std::string& text);

void save_scenarios(const std::string& path, const ScenarioSet& set);
ScenarioSet load_scenarios(const std::string& path);

}  // namespace cpps::grid
