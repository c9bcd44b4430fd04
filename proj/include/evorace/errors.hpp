#pragma once

#include <stdexcept>
#include <string>

namespace evorace {

// Bad layer dimensions, malformed config files, mismatched file headers.
// Always thrown eagerly; nothing is silently truncated or coerced.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse: stepping a finished environment, exporting traces that were
// never recorded, and similar caller-side mistakes.
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

// Procedural generation gave up (e.g. repeated self-intersecting tracks).
class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

// Evolution pipeline invariants broken (e.g. selecting on an unevaluated
// population).
class OrchestrationError : public std::logic_error {
 public:
  explicit OrchestrationError(const std::string& what) : std::logic_error(what) {}
};

// Unreadable or corrupt run artifacts (genomes, checkpoints, logs).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace evorace
