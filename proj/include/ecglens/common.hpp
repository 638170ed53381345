#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ecglens {

// Machine-readable failure category. The CLI prints it verbatim as the
// first token of its error line.
enum class ErrorCode {
  Usage,
  Config,
  Io,
  Format,
  Data,
  Training,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent child seed from a parent seed and a tuple of tags.
/// Used wherever work is split into independently seeded units (trees,
/// augmented samples, per-model runs) so results never depend on execution
/// order.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

/// 64-bit FNV-1a of a string.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace ecglens
