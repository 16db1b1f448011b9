#ifndef CARLEMAN_ERRORS_HPP
#define CARLEMAN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace carleman {

/// Invalid configuration or violated precondition on user-supplied input.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Solver stall, non-finite state, failed line search.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace carleman

#endif
