#pragma once

#include <stdexcept>
#include <string>

namespace roiloc {

/// Raised for every validation, I/O and numerical failure in the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace roiloc
