// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_ERROR_HPP
#define ITSVD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace itsvd
{

// Error taxonomy. The CLI maps these onto exit codes:
//   ArgumentError, ConfigError            -> 2 (usage)
//   DataError and its children, IoError   -> 3 (data/format)
//   NumericError, ContractError           -> 4 (numeric/contract)

class ArgumentError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class IoError : public DataError
{
public:
  using DataError::DataError;
};

class ChecksumError : public DataError
{
public:
  using DataError::DataError;
};

class VersionError : public DataError
{
public:
  using DataError::DataError;
};

class PartitionMismatchError : public DataError
{
public:
  using DataError::DataError;
};

class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// ||y|| of the very first snapshot vanished.
class DegenerateStartError : public NumericError
{
public:
  using NumericError::NumericError;
};

// The exact energy accumulator is inconsistent with the singular values.
class EnergyAccountingError : public NumericError
{
public:
  using NumericError::NumericError;
};

// SPMD misuse: diverging collective sequences, shape mismatches, aborted peers.
class ContractError : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

}  // namespace itsvd

#endif  // ITSVD_ERROR_HPP
