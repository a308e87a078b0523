#include <doctest.h>

#include <random>

#include "coffeescan/pkg.hpp"

using namespace coffeescan::pkg;

namespace {

Bytes from_hex(std::string_view hex) {
  Bytes out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoul(std::string(hex.substr(i, 2)), nullptr, 16)));
  }
  return out;
}

PackageErrc error_of(std::span<const std::uint8_t> bytes) {
  try {
    unpack(bytes);
  } catch (const PackageError& e) {
    return e.code();
  }
  FAIL("unpack succeeded");
  return PackageErrc::BadMagic;
}

std::vector<FileEntry> three_files() {
  return {make_entry("app.js", "App({});\n"), make_entry("pages/index/index.js", "Page({});\n"),
          make_entry("project.config.json", "{\"appid\":\"wx0123456789abcdef\"}")};
}

}  // namespace

TEST_CASE("empty container layout") {
  const Bytes bytes = pack({});
  CHECK(bytes == from_hex("be000000000000000400000004ed00000000"));
  CHECK(unpack(bytes).empty());
}

TEST_CASE("single entry offset and bytes") {
  const std::vector<FileEntry> e = {make_entry("app.js", "x")};
  const Bytes bytes = pack(e);
  // frozen from an independent struct.pack encoding of the layout table
  CHECK(bytes == from_hex("be000000000000001600000017ed00000001000000066170702e6a73000000240000000178"));
  CHECK(bytes[bytes.size() - 1] == 'x');
  CHECK(unpack(bytes).entries() == e);
}

TEST_CASE("pack rejects bad paths") {
  auto code = [](std::vector<FileEntry> e) {
    try {
      pack(e);
    } catch (const PackageError& err) {
      return err.code();
    }
    return PackageErrc::TrailingData;
  };
  CHECK(code({make_entry("a.js", "1"), make_entry("a.js", "2")}) == PackageErrc::DuplicatePath);
  CHECK(code({make_entry("/abs.js", "")}) == PackageErrc::InvalidPath);
  CHECK(code({make_entry("a/../b.js", "")}) == PackageErrc::InvalidPath);
  CHECK(code({make_entry("", "")}) == PackageErrc::InvalidPath);
  CHECK(code({make_entry(std::string("a\0b", 3), "")}) == PackageErrc::InvalidPath);
  CHECK(is_valid_path("pages/index/index.js"));
  CHECK(is_valid_path("..a/b"));
}

TEST_CASE("unpack errors") {
  CHECK(error_of(Bytes{}) == PackageErrc::TruncatedInput);
  Bytes bytes = pack(three_files());

  Bytes bad = bytes;
  bad[0] = 0xBF;
  CHECK(error_of(bad) == PackageErrc::BadMagic);
  bad = bytes;
  bad[13] = 0x00;
  CHECK(error_of(bad) == PackageErrc::BadEndMark);
  bad = bytes;
  bad.push_back(0);
  CHECK(error_of(bad) == PackageErrc::TrailingData);

  // first record: count(4) name_len(4) "app.js"(6) offset(4) size(4)
  bad = bytes;
  const std::size_t size_field = 14 + 4 + 4 + 6 + 4;
  bad[size_field] = 0x7f;
  CHECK(error_of(bad) == PackageErrc::IndexOverrun);
}

TEST_CASE("every truncation of a three-file fixture errors") {
  const Bytes bytes = pack(three_files());
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    CAPTURE(n);
    CHECK_THROWS_AS(unpack(std::span<const std::uint8_t>(bytes.data(), n)), PackageError);
  }
}

TEST_CASE("randomized roundtrip") {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<FileEntry> entries;
    const int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      Bytes data(rng() % 64);
      for (auto& b : data) b = static_cast<std::uint8_t>(rng());
      entries.push_back({"dir" + std::to_string(rng() % 3) + "/f" + std::to_string(i) + ".bin", data});
    }
    const Bytes bytes = pack(entries);
    CHECK(unpack(bytes).entries() == entries);
    CHECK(pack(unpack(bytes).entries()) == bytes);
  }
}

TEST_CASE("list_entries") {
  CHECK(list_entries(Package{}).empty());
  const Package p(three_files());
  const auto listed = list_entries(p);
  REQUIRE(listed.size() == 3);
  CHECK(listed[1].first == "pages/index/index.js");
  CHECK(listed[1].second == 10);
  CHECK(listed[0].first == "app.js");
}
