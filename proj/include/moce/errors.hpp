#pragma once

#include <stdexcept>
#include <string>

namespace moce {

/// Base of every error the library raises. The CLI maps `is_usage_error()`
/// to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual bool is_usage_error() const { return false; }
};

#define MOCE_DEFINE_ERROR(Name, Usage)                                      \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& what) : Error(what) {}             \
        bool is_usage_error() const override { return Usage; }              \
    }

MOCE_DEFINE_ERROR(ShapeError, false);
MOCE_DEFINE_ERROR(IndexError, false);
MOCE_DEFINE_ERROR(ContractError, false);
MOCE_DEFINE_ERROR(NumericError, false);
MOCE_DEFINE_ERROR(TrainingError, false);
MOCE_DEFINE_ERROR(DegenerateFitError, false);
MOCE_DEFINE_ERROR(ChecksumError, false);
MOCE_DEFINE_ERROR(ConfigError, true);
MOCE_DEFINE_ERROR(InputError, true);
MOCE_DEFINE_ERROR(ParseError, true);
MOCE_DEFINE_ERROR(SchemaError, true);
MOCE_DEFINE_ERROR(UsageError, true);

#undef MOCE_DEFINE_ERROR

}  // namespace moce
