#ifndef CMREDUCE_ERRORS_HPP
#define CMREDUCE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cmr {

/// Bad or inconsistent user-facing configuration (scheme ids, experiment setup).
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Problem size exceeds what an exact/enumerative routine can handle.
class capacity_error : public std::runtime_error {
public:
    explicit capacity_error(const std::string& what) : std::runtime_error(what) {}
};

/// Persisted file is missing, malformed, or carries an unsupported schema version.
class schema_error : public std::runtime_error {
public:
    explicit schema_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace cmr

#endif
