#pragma once

#include <json.hpp>

namespace telesim {

using Json = nlohmann::json;

}  // namespace telesim
