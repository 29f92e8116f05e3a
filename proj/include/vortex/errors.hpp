#pragma once

#include <stdexcept>
#include <string>

namespace vortex {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent environment / config documents.
class SpecError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Why a shaper backend failed to produce a usable proposal.
enum class ProposalFailure {
  kTransport,    // network / endpoint unreachable after retries
  kParse,        // no parseable reward object in the response
  kIncomplete,   // missing classes (never silently zero-filled)
  kOutOfRange,   // value outside the clamp and clamping not allowed
  kExhausted,    // scripted backend ran out of vectors
  kInvalid,      // non-finite or otherwise unusable values
};

class ProposalError : public Error {
 public:
  ProposalError(ProposalFailure kind, const std::string& what)
      : Error(what), kind_(kind) {}
  ProposalFailure kind() const { return kind_; }

 private:
  ProposalFailure kind_;
};

}  // namespace vortex
