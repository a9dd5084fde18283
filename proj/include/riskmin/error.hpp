#pragma once

#include <stdexcept>
#include <string>

namespace riskmin {

// One error type for the whole library; the code distinguishes variants so
// callers (and the CLI exit-code mapping) can react without string matching.
enum class ErrorCode {
    ShapeMismatch,
    Domain,        // argument outside the documented domain (ranges, simplex, ...)
    Precondition,  // violated operation precondition (zero marginal, biased n2, ...)
    Config,        // bad experiment configuration or CLI usage
    Divergence,    // non-finite objective or gradient during training
    Singular,      // linear system not solvable at the requested tolerance
    BadMagic,      // file container magic mismatch
    Truncated,     // file shorter than its header promises
    Overflow,      // declared extents exceed sane limits
    Parse,         // malformed config / record text
    NotFound,      // missing file or record
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

}  // namespace riskmin
