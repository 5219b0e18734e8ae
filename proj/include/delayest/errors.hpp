#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace delayest {

/// A factorization input lost full row rank. block_index() names the first
/// offending block of the caller-supplied row partition.
class SingularInputError : public std::runtime_error {
public:
    SingularInputError(const std::string& what, std::ptrdiff_t block_index)
        : std::runtime_error(what), block_index_(block_index) {}

    std::ptrdiff_t block_index() const noexcept { return block_index_; }

private:
    std::ptrdiff_t block_index_;
};

/// The input signal does not excite the system richly enough to identify it.
/// deficient_order() is the approximate excitation order the data does reach.
class ExcitationError : public std::runtime_error {
public:
    ExcitationError(const std::string& what, std::ptrdiff_t deficient_order)
        : std::runtime_error(what), deficient_order_(deficient_order) {}

    std::ptrdiff_t deficient_order() const noexcept { return deficient_order_; }

private:
    std::ptrdiff_t deficient_order_;
};

/// A recursive numeric invariant failed (lost positive definiteness,
/// non-finite arithmetic). Recovery requires rebuilding the state.
class BreakdownError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace delayest
