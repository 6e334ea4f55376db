#ifndef WIVJM_ERRORS_HPP
#define WIVJM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace wivjm {

// Error taxonomy mirrors the CLI exit codes: config 2, data 3, numeric 5.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace wivjm

#endif
