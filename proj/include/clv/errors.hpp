#pragma once
#include <stdexcept>

namespace clv {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidValue : Error { using Error::Error; };
struct InvalidDiscount : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct TaskError : Error { using Error::Error; };
struct VersionError : Error { using Error::Error; };
struct NotApplicable : Error { using Error::Error; };

} // namespace clv
