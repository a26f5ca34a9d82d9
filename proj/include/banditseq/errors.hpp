#pragma once

#include <stdexcept>
#include <string>

namespace banditseq {

// Caller broke a documented precondition.
class ContractViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

// A NaN or infinity showed up in a forward or backward pass.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ContractViolation(message);
    }
}

} // namespace banditseq
