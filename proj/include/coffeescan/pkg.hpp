#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace coffeescan::pkg {

using Bytes = std::vector<std::uint8_t>;

// Container layout (big-endian):
//   0      magic 0xBE
//   1..4   reserved, zero
//   5..8   index_len  (bytes from offset 14 up to the first file byte)
//   9..12  body_len   (index_len + total file bytes)
//   13     end mark 0xED
//   14..   file_count u32, then {name_len u32, name, offset u32, size u32}*
//          then the file data region.
inline constexpr std::uint8_t kMagic = 0xBE;
inline constexpr std::uint8_t kEndMark = 0xED;
inline constexpr std::size_t kHeaderSize = 14;
inline constexpr const char* kExtension = ".mapkg";

enum class PackageErrc {
  DuplicatePath,
  InvalidPath,
  BadMagic,
  TruncatedInput,
  IndexOverrun,
  BadEndMark,
  TrailingData,
};

const char* to_string(PackageErrc code);

class PackageError : public std::runtime_error {
 public:
  PackageError(PackageErrc code, const std::string& detail);
  PackageErrc code() const noexcept { return code_; }

 private:
  PackageErrc code_;
};

struct FileEntry {
  std::string path;
  Bytes data;

  std::string_view text() const {
    return {reinterpret_cast<const char*>(data.data()), data.size()};
  }
  friend bool operator==(const FileEntry&, const FileEntry&) = default;
};

FileEntry make_entry(std::string path, std::string_view contents);

/// Ordered collection of files from one mini-app front-end. Immutable once
/// built; share freely between scan workers.
class Package {
 public:
  Package() = default;
  explicit Package(std::vector<FileEntry> entries);

  const std::vector<FileEntry>& entries() const noexcept { return entries_; }
  const FileEntry* find(std::string_view path) const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  friend bool operator==(const Package&, const Package&) = default;

 private:
  std::vector<FileEntry> entries_;
};

/// Throws PackageError(InvalidPath) unless `path` is a non-empty relative
/// path without NUL, leading '/', or ".." segments.
void validate_path(std::string_view path);
bool is_valid_path(std::string_view path) noexcept;

Bytes pack(std::span<const FileEntry> entries);
Package unpack(std::span<const std::uint8_t> bytes);

std::vector<std::pair<std::string, std::size_t>> list_entries(const Package& pkg);

// Filesystem adapters. A directory is read recursively; entries are sorted by
// path so the result is independent of directory iteration order.
Package read_directory(const std::filesystem::path& root);
Package read_file(const std::filesystem::path& file);
void write_file(const std::filesystem::path& file, const Package& pkg);
void extract_to(const std::filesystem::path& root, const Package& pkg);

}  // namespace coffeescan::pkg
