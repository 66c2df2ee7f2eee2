#ifndef QPURIFY_ERRORS_HPP
#define QPURIFY_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qpurify {

// An argument lies outside the domain of the operation (s outside [0,1],
// |v| > 1, h outside (0,1), ...).
class DomainError : public std::invalid_argument
{
public:
    explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// An explicit finite-difference sweep would violate its stability bound.
class StabilityError : public std::runtime_error
{
public:
    StabilityError(const std::string& what, std::size_t required_steps)
        : std::runtime_error(what), required_steps_(required_steps) {}

    std::size_t required_steps() const noexcept { return required_steps_; }

private:
    std::size_t required_steps_;
};

// Iterative solver hit its iteration cap.
class ConvergenceError : public std::runtime_error
{
public:
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Too many hitting-time trajectories were cut off before crossing.
class CensoringError : public std::runtime_error
{
public:
    explicit CensoringError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool ok, const char* what)
{
    if (!ok)
        throw DomainError(what);
}

inline void require(bool ok, const std::string& what)
{
    if (!ok)
        throw DomainError(what);
}

}  // namespace detail
}  // namespace qpurify

#endif
