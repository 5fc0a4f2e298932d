#pragma once

#include <stdexcept>
#include <string>

namespace duelopt {

/// Raised when a configuration document or override is invalid. The message
/// carries the dotted field path, e.g. "sampler.kind: missing".
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Network or endpoint failure that may succeed on retry.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Endpoint rejected our credentials; never retried.
class AuthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A judge or mutator response could not be interpreted.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A mutator could not produce a child; the mutation event is skipped.
class MutationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SnapshotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Referenced entity (duel, arm, input) does not exist.
class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation conflicts with current state, e.g. a duplicate judgment.
class ConflictError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class Exception = std::invalid_argument>
inline void ensure(bool cond, const std::string& what)
{
    if (!cond) {
        throw Exception(what);
    }
}

} // namespace detail
} // namespace duelopt
