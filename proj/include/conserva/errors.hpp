// Copyright 2026 The Conserva Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace conserva {

// Caller passed something that violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine failed in a way that should be impossible for valid
// inputs (singular solve, policy iteration not converging).
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// MDP file could not be parsed or validated.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Artifact persistence failed; anything already written is flagged partial.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace conserva
