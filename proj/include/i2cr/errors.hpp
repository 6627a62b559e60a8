// Copyright 2026 The I2CR Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace i2cr {

// Root of every error the engine raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(std::string id)
      : Error("duplicate entity id '" + id + "'"), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Backend failures. Anything a model service (or its mock) can raise
// derives from BackendError.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what, int status = 0)
      : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class BackendTimeout : public BackendError {
 public:
  explicit BackendTimeout(const std::string& what) : BackendError(what) {}
};

// Connection refused / host unreachable.
class BackendUnavailable : public BackendError {
 public:
  explicit BackendUnavailable(const std::string& what) : BackendError(what) {}
};

class Unparseable : public BackendError {
 public:
  explicit Unparseable(std::string raw)
      : BackendError("unparseable selector output: '" + raw + "'"),
        raw_(std::move(raw)) {}
  const std::string& raw_text() const { return raw_; }

 private:
  std::string raw_;
};

class MockMiss : public BackendError {
 public:
  MockMiss(const std::string& role, const std::string& fingerprint)
      : BackendError("mock transcript has no '" + role +
                     "' entry for fingerprint " + fingerprint) {}
};

class DimensionMismatch : public BackendError {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : BackendError("embedding dimension mismatch: expected " +
                     std::to_string(expected) + ", got " +
                     std::to_string(got)) {}
};

class ImageDecodeError : public BackendError {
 public:
  explicit ImageDecodeError(const std::string& what) : BackendError(what) {}
};

class DegenerateEmbedding : public Error {
 public:
  DegenerateEmbedding() : Error("embedding has zero norm") {}
};

// Summarization aborted on one entity; `completed` descriptions were
// already rewritten before the failure.
class SummarizationError : public BackendError {
 public:
  SummarizationError(std::string entity_id, std::size_t completed,
                     const std::string& cause)
      : BackendError("summarization failed for entity '" + entity_id +
                     "' after " + std::to_string(completed) +
                     " completed: " + cause),
        entity_id_(std::move(entity_id)),
        completed_(completed) {}
  const std::string& entity_id() const { return entity_id_; }
  std::size_t completed() const { return completed_; }

 private:
  std::string entity_id_;
  std::size_t completed_;
};

class MissingGold : public Error {
 public:
  explicit MissingGold(std::size_t index)
      : Error("sample " + std::to_string(index) +
              " has neither gold_id nor out_of_kg"),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class EmptyEvalSet : public Error {
 public:
  EmptyEvalSet() : Error("evaluation set is empty") {}
};

}  // namespace i2cr
