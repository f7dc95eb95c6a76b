// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fcdnp {

//! Base class for every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! Argument outside the modeled domain (position, field, temperature).
class RangeError : public Error
{
  public:
    using Error::Error;
};

//! A calibration solve failed to meet its constraints.
class CalibrationError : public Error
{
  public:
    using Error::Error;
};

//! Bad geometry or parameter combination passed to a builder.
class ValidationError : public Error
{
  public:
    using Error::Error;
};

//! Malformed or non-finite input data, bad file headers, version skew.
class DataError : public Error
{
  public:
    using Error::Error;
};

//! Binary or JSON artifact written by an incompatible version.
class VersionError : public DataError
{
  public:
    using DataError::DataError;
};

//! Invalid configuration key or value.
class ConfigError : public Error
{
  public:
    using Error::Error;
};

//! Iterative fit failed to converge.
class FitError : public Error
{
  public:
    FitError(std::string const& what, double final_residual)
        : Error(what + " (final residual " + std::to_string(final_residual)
                + ")")
        , final_residual_(final_residual)
    {
    }
    double final_residual() const { return final_residual_; }

  private:
    double final_residual_;
};

//! Syntax error in a pulse program, with 1-based source location.
class ParseError : public Error
{
  public:
    ParseError(std::size_t line, std::size_t column, std::string message)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": "
                + message)
        , line_(line)
        , column_(column)
        , message_(std::move(message))
    {
    }
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }
    std::string const& message() const { return message_; }

  private:
    std::size_t line_;
    std::size_t column_;
    std::string message_;
};

//! Failure inside an experiment protocol, tagged with the failing stage.
class ProtocolError : public Error
{
  public:
    ProtocolError(std::string stage, std::string const& what)
        : Error("[" + stage + "] " + what), stage_(std::move(stage))
    {
    }
    std::string const& stage() const { return stage_; }

  private:
    std::string stage_;
};

}  // namespace fcdnp
