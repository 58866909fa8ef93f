#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "support.hpp"
#include "tpt/checkpoint.hpp"
#include "tpt/errors.hpp"

using namespace tpt;
using namespace tpt::ckpt;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

void fill(ad::ParameterStore& store, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  store.add("embed.weight", {3, 4}, tpt::testing::random_values(12, rng), "backbone");
  store.add("embed.bias", {1, 4}, tpt::testing::random_values(4, rng), "backbone");
  store.add("head.scale", {1}, tpt::testing::random_values(1, rng), "head");
}

}  // namespace

TEST(Archive, RoundTripIsBitExact) {
  Archive a;
  a.metadata = "# config_hash=abc\nseed = 7\n";
  a.entries.push_back({"x", {2, 3}, {1.0, -0.0, 1e-300, 3.14159, -2.5e17, 0.1}});
  a.entries.push_back({"empty", {0}, {}});
  a.entries.push_back({"scalar", {1}, {42.0}});
  const auto path = temp_file("tpt_archive_rt.bin");
  write_archive(path, a);
  const auto b = read_archive(path);
  EXPECT_EQ(b.version, kFormatVersion);
  EXPECT_EQ(b.metadata, a.metadata);
  ASSERT_EQ(b.entries.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(b.entries[i].name, a.entries[i].name);
    EXPECT_EQ(b.entries[i].shape, a.entries[i].shape);
    EXPECT_EQ(b.entries[i].values, a.entries[i].values);
  }
  EXPECT_NE(b.find("scalar"), nullptr);
  EXPECT_EQ(b.find("missing"), nullptr);
  std::filesystem::remove(path);
}

TEST(Archive, InconsistentEntryShapeRejectedOnWrite) {
  Archive a;
  a.entries.push_back({"x", {2, 2}, {1.0}});
  EXPECT_THROW(write_archive(temp_file("tpt_archive_bad.bin"), a), DimensionError);
}

TEST(Archive, CorruptFilesRaiseLoadError) {
  const auto path = temp_file("tpt_archive_corrupt.bin");
  {
    std::ofstream os(path, std::ios::binary);
    os << "not an archive at all";
  }
  EXPECT_THROW(read_archive(path), LoadError);

  Archive a;
  a.entries.push_back({"x", {4}, {1, 2, 3, 4}});
  write_archive(path, a);
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 5);
  EXPECT_THROW(read_archive(path), LoadError);

  a.version = kFormatVersion + 1;
  write_archive(path, a);
  EXPECT_THROW(read_archive(path), LoadError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_archive(path), LoadError);
}

TEST(Parameters, StoreRoundTrip) {
  ad::ParameterStore src, dst;
  fill(src, 1);
  fill(dst, 2);
  Archive a;
  append_parameters(a, src);
  const auto path = temp_file("tpt_params_rt.bin");
  write_archive(path, a);
  load_parameters(read_archive(path), dst);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto s = src.all()[i]->values(), d = dst.all()[i]->values();
    EXPECT_TRUE(std::equal(s.begin(), s.end(), d.begin(), d.end()));
  }
  std::filesystem::remove(path);
}

TEST(Parameters, MissingOrMisshapenParameterRaises) {
  ad::ParameterStore src;
  fill(src, 1);
  Archive a;
  append_parameters(a, src);

  ad::ParameterStore extra;
  fill(extra, 3);
  extra.add("more", {2}, {0.0, 0.0}, "head");
  EXPECT_THROW(load_parameters(a, extra), LoadError);

  ad::ParameterStore reshaped;
  reshaped.add("embed.weight", {4, 3}, std::vector<double>(12), "backbone");
  EXPECT_THROW(load_parameters(a, reshaped), LoadError);
}
