#pragma once

#include <stdexcept>
#include <string>

namespace telehaptic {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSensorValue : public Error {
 public:
  using Error::Error;
};

class FrameSyncError : public Error {
 public:
  using Error::Error;
};

class InvalidTimestep : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ReplayIncompatible : public Error {
 public:
  using Error::Error;
};

}  // namespace telehaptic
