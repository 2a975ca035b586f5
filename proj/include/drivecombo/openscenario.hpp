#pragma once

#include <map>
#include <string>
#include <vector>

#include "drivecombo/scenario_compiler.hpp"

namespace drivecombo {

class ActorSetMismatch : public CompileError {
 public:
  using CompileError::CompileError;
};

struct ScenarioHeader {
  std::string name;
  std::string map_name;
};

// OpenSCENARIO 1.0 XML, world coordinates, numbers with three decimals.
// Deterministic in its inputs. Throws ActorSetMismatch unless the scene,
// assets, poses and trajectories cover the same actors.
std::string emit_openscenario(const SceneDoc& doc, const std::map<std::string, Asset>& assets,
                              const std::vector<ScenePose>& poses, const std::vector<Trajectory>& trajectories,
                              const WeatherParams& weather, const ScenarioHeader& header);

// Structural checks on the emitted subset: header, entities with one object
// definition each, init teleport per entity, one trajectory action per
// entity with strictly increasing vertex times, environment action, stop
// trigger. Empty when valid.
std::vector<std::string> validate_openscenario(const std::string& xml);

}  // namespace drivecombo
