#include "retroid/eval/schedule.hpp"

#include "retroid/errors.hpp"

namespace retroid::eval {

std::string to_string(Direction d) {
  switch (d) {
    case Direction::forward: return "forward";
    case Direction::backward: return "backward";
    case Direction::both: return "both";
  }
  return "?";
}

Direction parse_direction(const std::string& s) {
  if (s == "forward") return Direction::forward;
  if (s == "backward") return Direction::backward;
  if (s == "both") return Direction::both;
  throw ValidationError("unknown direction '" + s + "' (forward|backward|both)");
}

Schedule build_schedule(int train_day, int train_set, int num_days, Direction direction) {
  if (num_days < 1 || train_day < 1 || train_day > num_days) {
    throw ValidationError("build_schedule: train day " + std::to_string(train_day) + " outside [1, " +
                          std::to_string(num_days) + "]");
  }
  if (train_set < 1) throw ValidationError("build_schedule: train set must be >= 1");

  Schedule s;
  s.train = {train_day, train_set};
  s.direction = direction;
  const bool fwd = direction != Direction::backward;
  const bool bwd = direction != Direction::forward;
  for (int offset = 1; offset < num_days; ++offset) {
    if (bwd && train_day - offset >= 1) s.test.push_back({train_day - offset, 1});
    if (fwd && train_day + offset <= num_days) s.test.push_back({train_day + offset, 1});
  }
  if (s.test.empty()) {
    s.warnings.push_back("empty schedule: no " + to_string(direction) + " test days from day " +
                         std::to_string(train_day) + " of " + std::to_string(num_days));
  }
  return s;
}

nlohmann::json Schedule::to_json() const {
  nlohmann::json t = nlohmann::json::array();
  for (const auto& k : test) t.push_back({{"day", k.day}, {"set", k.set}});
  return {{"train", {{"day", train.day}, {"set", train.set}}}, {"direction", eval::to_string(direction)}, {"test", t}};
}

Schedule Schedule::from_json(const nlohmann::json& j) {
  Schedule s;
  s.train = {j.at("train").at("day").get<int>(), j.at("train").at("set").get<int>()};
  s.direction = parse_direction(j.at("direction").get<std::string>());
  for (const auto& t : j.at("test")) s.test.push_back({t.at("day").get<int>(), t.at("set").get<int>()});
  return s;
}

}  // namespace retroid::eval
