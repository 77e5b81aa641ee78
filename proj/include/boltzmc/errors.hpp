#pragma once

#include <stdexcept>
#include <string>

namespace boltzmc {

/// Invalid problem setup: bad bounds, malformed kernel table, unknown config key, ...
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// An operation was called outside its stated contract (e.g. start state not in the domain).
class PreconditionError : public std::runtime_error {
public:
    explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

/// Adjoint kernel q is undefined because the adjoint rate S vanishes at the
/// requested conditioning state. Transport never raises this: S = 0 simply
/// means no adjoint scattering there.
class DegenerateKernelError : public std::runtime_error {
public:
    explicit DegenerateKernelError(const std::string& what) : std::runtime_error(what) {}
};

/// Two grids that must share a mesh do not.
class MeshMismatchError : public std::runtime_error {
public:
    explicit MeshMismatchError(const std::string& what) : std::runtime_error(what) {}
};

/// File read/write failure, malformed grid/trajectory file.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace boltzmc
