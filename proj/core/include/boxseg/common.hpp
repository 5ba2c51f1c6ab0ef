#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace boxseg {

/// Error type thrown by every operation in this library. The message is a
/// single line suitable for machine parsing by the CLI wrapper.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class... Parts>
std::string cat(Parts&&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

}  // namespace detail

template <class... Parts>
void require(bool condition, Parts&&... message) {
  if (!condition) throw Error(detail::cat(std::forward<Parts>(message)...));
}

template <class... Parts>
[[noreturn]] void fail(Parts&&... message) {
  throw Error(detail::cat(std::forward<Parts>(message)...));
}

inline std::string shape_str(const std::vector<int>& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ',';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

}  // namespace boxseg
