// serkit/types.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SERKIT_TYPES_HPP
#define SERKIT_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace serkit {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using ArrayXX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

// Bad caller-supplied values (samples, labels, shapes).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inconsistent or unusable configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed text input (manifests, config files, result tables).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem and binary-format failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mono audio signal. Samples are nominally in [-1, 1].
struct Waveform {
  Vector samples;
  int sample_rate = 0;

  Index size() const { return samples.size(); }
  Scalar duration() const {
    return static_cast<Scalar>(samples.size()) / sample_rate;
  }
};

// Throws InputError unless the waveform is non-empty, has a positive sample
// rate, and all samples are finite.
void validateWaveform(const Waveform& wave, const std::string& context);

}  // namespace serkit

#endif  // SERKIT_TYPES_HPP
