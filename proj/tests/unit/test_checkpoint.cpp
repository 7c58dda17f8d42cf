#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "reposer/checkpoint.hpp"

using namespace reposer;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path d = fs::temp_directory_path() / ("reposer_ckpt_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

Checkpoint sample() {
  Checkpoint c;
  c.manifest["global_step"] = 123456789012ULL;
  c.manifest["note"] = "x";
  c.add("w", {2, 3}, std::vector<float>{1, 2, 3, 4, 5, -6.5f});
  c.add("d", {2}, std::vector<double>{1e-300, -3.25});
  c.add("empty", {0}, std::vector<float>{});
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("checkpoint: round trip keeps tensors and manifest") {
  const fs::path p = temp_dir() / "a.ckpt";
  write_checkpoint(p, sample());
  const Checkpoint r = read_checkpoint(p);
  CHECK(r.manifest["global_step"].get<std::uint64_t>() == 123456789012ULL);
  CHECK(r.manifest["note"] == "x");
  CHECK_FALSE(r.manifest.contains("tensors"));
  CHECK(r.tensor("w").f32 == std::vector<float>{1, 2, 3, 4, 5, -6.5f});
  CHECK(r.tensor("w").shape == std::vector<std::int64_t>{2, 3});
  CHECK(r.tensor("d").f64 == std::vector<double>{1e-300, -3.25});
  CHECK(r.tensor("empty").numel() == 0);
  CHECK_FALSE(fs::exists(fs::path(p).concat(".tmp")));
  CHECK_THROWS_AS(r.tensor("missing"), CheckpointError);
}

TEST_CASE("checkpoint: header layout is little-endian and documented") {
  const fs::path p = temp_dir() / "b.ckpt";
  write_checkpoint(p, sample());
  const std::string s = slurp(p);
  CHECK(s.substr(0, 8) == "RPSCKPT1");
  CHECK(static_cast<unsigned char>(s[8]) == 1);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[16 + i])) << (8 * i);
  const auto manifest = nlohmann::json::parse(s.substr(24, len));
  CHECK(manifest["tensors"][0]["name"] == "w");
  CHECK(manifest["tensors"][0]["dtype"] == "f32");
  CHECK(s.size() == 24 + len + 6 * 4 + 2 * 8);
}

TEST_CASE("checkpoint: every truncation is rejected") {
  const fs::path p = temp_dir() / "c.ckpt";
  write_checkpoint(p, sample());
  const std::string s = slurp(p);
  const fs::path q = temp_dir() / "c_cut.ckpt";
  for (std::size_t n = 0; n < s.size(); n += 3) {
    std::ofstream(q, std::ios::binary | std::ios::trunc).write(s.data(), static_cast<std::streamsize>(n));
    CHECK_THROWS_AS(read_checkpoint(q), CheckpointError);
  }
}

TEST_CASE("checkpoint: bad magic, bad version, missing file") {
  const fs::path p = temp_dir() / "d.ckpt";
  write_checkpoint(p, sample());
  std::string s = slurp(p);
  std::string bad = s;
  bad[0] = 'X';
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bad;
  CHECK_THROWS_AS(read_checkpoint(p), CheckpointError);
  bad = s;
  bad[8] = 2;
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bad;
  CHECK_THROWS_AS(read_checkpoint(p), CheckpointError);
  CHECK_THROWS_AS(read_checkpoint(temp_dir() / "nope.ckpt"), CheckpointError);
}

TEST_CASE("checkpoint: unwritable destination fails cleanly") {
  CHECK_THROWS_AS(write_checkpoint(temp_dir() / "no" / "such" / "dir.ckpt", sample()), CheckpointError);
  CHECK_THROWS_AS(sample().add("bad", {3}, std::vector<float>{1, 2}), std::invalid_argument);
}

TEST_CASE("checkpoint: hashes") {
  CHECK(string_hash("") == "cbf29ce484222325");
  CHECK(string_hash("a") == "af63dc4c8601ec8c");
  const fs::path p = temp_dir() / "e.ckpt";
  std::ofstream(p, std::ios::binary) << "a";
  CHECK(file_hash(p) == string_hash("a"));
}
