// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "implicity/common/kv_config.hpp"

namespace implicity::cli {

/// 64-bit FNV-1a of a file's bytes.
std::uint64_t fnv1a_file(const std::filesystem::path& path);

/// What a subcommand read, wrote and spent; serialized as JSON next to its outputs.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  void set_config(const KvConfig& cfg) { config_ = cfg; }
  void add_seed(const std::string& name, std::uint64_t seed) { seeds_.emplace_back(name, seed); }
  void add_input(const std::filesystem::path& p) { inputs_.push_back(p); }
  void add_output(const std::filesystem::path& p) { outputs_.push_back(p); }
  const std::vector<std::filesystem::path>& outputs() const { return outputs_; }

  /// Times a stage from construction to destruction.
  class Stage {
   public:
    Stage(RunManifest& m, std::string name)
        : m_(m), name_(std::move(name)), t0_(std::chrono::steady_clock::now()) {}
    ~Stage() {
      m_.timings_.emplace_back(name_, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count());
    }

   private:
    RunManifest& m_;
    std::string name_;
    std::chrono::steady_clock::time_point t0_;
  };

  /// Throws if a declared output is missing or empty, then writes the manifest.
  void write(const std::filesystem::path& path) const;

 private:
  std::string subcommand_;
  KvConfig config_;
  std::vector<std::pair<std::string, std::uint64_t>> seeds_;
  std::vector<std::filesystem::path> inputs_, outputs_;
  std::vector<std::pair<std::string, double>> timings_;
};

}  // namespace implicity::cli
