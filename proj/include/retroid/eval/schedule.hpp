#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "retroid/data/manifest.hpp"

namespace retroid::eval {

enum class Direction { forward, backward, both };

std::string to_string(Direction d);
Direction parse_direction(const std::string& s);

/// Which session trains the model and which sessions it is tested on, in order.
struct Schedule {
  data::SessionKey train;
  Direction direction = Direction::forward;
  std::vector<data::SessionKey> test;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static Schedule from_json(const nlohmann::json& j);
};

/// forward: train_day+1 .. num_days; backward: train_day-1 .. 1;
/// both: nearer days first, the earlier day before the later one at equal offset.
/// Test sessions use set 1. Running off either end yields an empty schedule
/// with a warning. Throws ValidationError unless 1 <= train_day <= num_days.
Schedule build_schedule(int train_day, int train_set, int num_days, Direction direction);

}  // namespace retroid::eval
