// Copyright 2026 The PixLift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace pixlift {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Rewriting would not shrink the image; the caller passes the URL through.
class NoReductionError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::string magic)
      : Error(what), magic_(std::move(magic)) {}
  // Hex dump of the leading bytes that failed format detection.
  const std::string& magic() const { return magic_; }

 private:
  std::string magic_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::string node)
      : Error(what), node_(std::move(node)) {}
  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

class WindowError : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  IngestError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  // Entry (HAR) or data row (CSV) index that failed.
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class ShutdownError : public Error {
 public:
  using Error::Error;
};

}  // namespace pixlift
