#pragma once

#include <memory>
#include <string>
#include <vector>

#include "modio/runtime.hpp"
#include "modio/scenario.hpp"

namespace modio {

/// Throws ConfigError for an unknown class.
std::unique_ptr<Component> make_component(const ComponentSpec& spec);
/// Create the NIC, its traffic generator and the disk, as the scenario asks.
void install_devices(Runtime& rt, const Scenario& s);
std::vector<std::string> component_classes();

} // namespace modio
