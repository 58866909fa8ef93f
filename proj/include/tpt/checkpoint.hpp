#pragma once

// Flat binary archive: name -> shape + row-major float64 values.
//
// Layout (all integers and doubles little-endian):
//   magic "TPTARCH\0" | u32 version | u64 metadata length | metadata bytes |
//   u32 entry count | per entry: u32 name length, name, u32 rank,
//   rank x u64 extents, numel x f64 values

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tpt/autodiff.hpp"

namespace tpt::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Entry {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
};

struct Archive {
  std::uint32_t version = kFormatVersion;
  std::string metadata;
  std::vector<Entry> entries;

  const Entry* find(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

void append_parameters(Archive& archive, const ad::ParameterStore& store);
// Loads every parameter of `store` from the archive. Missing names or shape
// differences raise LoadError.
void load_parameters(const Archive& archive, ad::ParameterStore& store);

}  // namespace tpt::ckpt
