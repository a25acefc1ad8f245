#pragma once

#include <stdexcept>
#include <string>

namespace ordinalenc {

// Violated precondition on an argument (bad shape, out-of-range index, ...).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An EncodingConfig / TrainConfig that cannot be used as given.
class InvalidConfig : public ContractError {
public:
    using ContractError::ContractError;
};

// NaN or Inf where finite values are required.
class NumericInputError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A probability vector that does not sum to one.
class NormalizationError : public ContractError {
public:
    using ContractError::ContractError;
};

// Malformed or incompatible file on disk.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ordinalenc
