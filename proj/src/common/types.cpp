#include "cleanup/common/types.hpp"

#include "cleanup/common/errors.hpp"

namespace cleanup {

std::string_view to_string(Condition c) {
  return c == Condition::identifiable ? "identifiable" : "anonymous";
}

Condition parse_condition(std::string_view s) {
  if (s == "identifiable") return Condition::identifiable;
  if (s == "anonymous") return Condition::anonymous;
  throw ConfigError("unknown condition '" + std::string(s) + "' (expected identifiable|anonymous)");
}

}  // namespace cleanup
