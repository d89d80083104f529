#ifndef SPLITGATE_ERROR_HPP
#define SPLITGATE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace splitgate {

// Domain error carrying a stable machine-readable code ("PatternMismatch",
// "InsufficientImages", ...) plus key/value context for structured reporting.
class Error : public std::runtime_error {
public:
    using Context = std::vector<std::pair<std::string, std::string>>;

    Error(std::string code, const std::string& message, Context context = {})
        : std::runtime_error(message), code_(std::move(code)), context_(std::move(context))
    {
    }

    const std::string& code() const noexcept { return code_; }
    const Context& context() const noexcept { return context_; }

private:
    std::string code_;
    Context context_;
};

} // namespace splitgate

#endif // SPLITGATE_ERROR_HPP
