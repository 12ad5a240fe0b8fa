#include "formnav/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace formnav;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(Checkpoint, RoundTripPreservesArraysExactly) {
  const std::string path = temp_path("ckpt_roundtrip.ckpt");
  Mat a = Mat::Random(7, 3);
  Mat b = Mat::Random(1, 1);
  a(0, 0) = 1.0 / 3.0;  // exercise non-representable decimals
  CheckpointWriter w;
  w.add("net/weights", a);
  w.add("net/bias", b);
  w.add_scalar("meta/version", 2.0);
  w.write(path);

  CheckpointReader r(path);
  EXPECT_TRUE(r.has("net/weights"));
  EXPECT_FALSE(r.has("net/missing"));
  EXPECT_TRUE(r.get("net/weights").isApprox(a, 0.0));  // bit-exact
  EXPECT_EQ(r.get_scalar("meta/version"), 2.0);
  EXPECT_EQ(r.names().size(), 3u);
}

TEST(Checkpoint, DuplicateNameRejectedAtWrite) {
  CheckpointWriter w;
  w.add("x", Mat::Zero(1, 1));
  EXPECT_THROW(w.add("x", Mat::Zero(2, 2)), std::invalid_argument);
}

TEST(Checkpoint, MissingArrayNamesItself) {
  const std::string path = temp_path("ckpt_missing.ckpt");
  CheckpointWriter w;
  w.add("present", Mat::Zero(2, 2));
  w.write(path);
  CheckpointReader r(path);
  try {
    r.get("absent");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("absent"), std::string::npos);
  }
}

TEST(Checkpoint, TruncatedFileNamesTheFailingArray) {
  const std::string path = temp_path("ckpt_trunc.ckpt");
  CheckpointWriter w;
  w.add("first", Mat::Ones(2, 2));
  w.add("second/large", Mat::Random(64, 64));
  w.write(path);
  // Chop off most of the data block.
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 64 * 64 * 4);
  try {
    CheckpointReader r(path);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("second/large"), std::string::npos);
  }
}

TEST(Checkpoint, GarbageFileIsRejected) {
  const std::string path = temp_path("ckpt_garbage.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "definitely not a checkpoint";
  }
  EXPECT_THROW(CheckpointReader r(path), std::runtime_error);
  EXPECT_THROW(CheckpointReader r2("/nonexistent/x.ckpt"), std::runtime_error);
}

TEST(Checkpoint, ManifestOffsetsAreContiguous) {
  const std::string path = temp_path("ckpt_manifest.ckpt");
  CheckpointWriter w;
  w.add("a", Mat::Zero(2, 3));
  w.add("b", Mat::Zero(4, 1));
  w.write(path);
  CheckpointReader r(path);
  const auto& m = r.manifest();
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].offset, 0u);
  EXPECT_EQ(m[1].offset, 2u * 3u * sizeof(double));
}
