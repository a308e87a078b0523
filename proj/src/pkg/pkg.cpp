#include "coffeescan/pkg.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>

namespace coffeescan::pkg {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  return (std::uint32_t{in[at]} << 24) | (std::uint32_t{in[at + 1]} << 16) |
         (std::uint32_t{in[at + 2]} << 8) | std::uint32_t{in[at + 3]};
}

std::uint32_t checked_u32(std::size_t v) {
  if (v > 0xFFFFFFFFu) {
    throw PackageError(PackageErrc::IndexOverrun, "value exceeds 32-bit field");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

const char* to_string(PackageErrc code) {
  switch (code) {
    case PackageErrc::DuplicatePath: return "DuplicatePath";
    case PackageErrc::InvalidPath: return "InvalidPath";
    case PackageErrc::BadMagic: return "BadMagic";
    case PackageErrc::TruncatedInput: return "TruncatedInput";
    case PackageErrc::IndexOverrun: return "IndexOverrun";
    case PackageErrc::BadEndMark: return "BadEndMark";
    case PackageErrc::TrailingData: return "TrailingData";
  }
  return "Unknown";
}

PackageError::PackageError(PackageErrc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

FileEntry make_entry(std::string path, std::string_view contents) {
  return FileEntry{std::move(path), Bytes(contents.begin(), contents.end())};
}

bool is_valid_path(std::string_view path) noexcept {
  if (path.empty() || path.front() == '/') return false;
  if (path.find('\0') != std::string_view::npos) return false;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    if (path.substr(start, end - start) == "..") return false;
    start = end + 1;
  }
  return true;
}

void validate_path(std::string_view path) {
  if (!is_valid_path(path)) {
    throw PackageError(PackageErrc::InvalidPath, "'" + std::string(path) + "'");
  }
}

Package::Package(std::vector<FileEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string_view> seen;
  for (const auto& e : entries_) {
    validate_path(e.path);
    if (!seen.insert(e.path).second) {
      throw PackageError(PackageErrc::DuplicatePath, e.path);
    }
  }
}

const FileEntry* Package::find(std::string_view path) const {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const FileEntry& e) { return e.path == path; });
  return it == entries_.end() ? nullptr : &*it;
}

Bytes pack(std::span<const FileEntry> entries) {
  std::set<std::string_view> seen;
  std::size_t index_len = 4;
  std::size_t data_len = 0;
  for (const auto& e : entries) {
    validate_path(e.path);
    if (!seen.insert(e.path).second) throw PackageError(PackageErrc::DuplicatePath, e.path);
    index_len += 12 + e.path.size();
    data_len += e.data.size();
  }

  Bytes out;
  out.reserve(kHeaderSize + index_len + data_len);
  out.push_back(kMagic);
  put_u32(out, 0);
  put_u32(out, checked_u32(index_len));
  put_u32(out, checked_u32(index_len + data_len));
  out.push_back(kEndMark);
  put_u32(out, checked_u32(entries.size()));

  std::size_t offset = kHeaderSize + index_len;
  for (const auto& e : entries) {
    put_u32(out, checked_u32(e.path.size()));
    out.insert(out.end(), e.path.begin(), e.path.end());
    put_u32(out, checked_u32(offset));
    put_u32(out, checked_u32(e.data.size()));
    offset += e.data.size();
  }
  for (const auto& e : entries) out.insert(out.end(), e.data.begin(), e.data.end());
  return out;
}

Package unpack(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw PackageError(PackageErrc::TruncatedInput, "shorter than header");
  }
  if (bytes[0] != kMagic || get_u32(bytes, 1) != 0) {
    throw PackageError(PackageErrc::BadMagic, "header magic mismatch");
  }
  if (bytes[13] != kEndMark) throw PackageError(PackageErrc::BadEndMark, "byte 13");

  const std::uint64_t index_len = get_u32(bytes, 5);
  const std::uint64_t body_len = get_u32(bytes, 9);
  if (bytes.size() < kHeaderSize + body_len) {
    throw PackageError(PackageErrc::TruncatedInput, "body shorter than declared");
  }
  if (bytes.size() > kHeaderSize + body_len) {
    throw PackageError(PackageErrc::TrailingData, "bytes after declared body");
  }
  if (index_len < 4 || index_len > body_len) {
    throw PackageError(PackageErrc::IndexOverrun, "index length outside body");
  }

  const std::size_t index_end = kHeaderSize + index_len;
  const std::size_t count = get_u32(bytes, kHeaderSize);
  std::size_t pos = kHeaderSize + 4;
  std::size_t expected_offset = index_end;
  std::vector<FileEntry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    if (pos + 4 > index_end) throw PackageError(PackageErrc::IndexOverrun, "record header");
    const std::size_t name_len = get_u32(bytes, pos);
    pos += 4;
    if (name_len > index_end - pos || index_end - pos - name_len < 8) {
      throw PackageError(PackageErrc::IndexOverrun, "record name");
    }
    std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
    pos += name_len;
    const std::uint64_t offset = get_u32(bytes, pos);
    const std::uint64_t size = get_u32(bytes, pos + 4);
    pos += 8;
    if (offset < index_end || offset + size > bytes.size()) {
      throw PackageError(PackageErrc::IndexOverrun, "entry '" + name + "' outside buffer");
    }
    if (offset != expected_offset) {
      throw PackageError(PackageErrc::IndexOverrun, "entry '" + name + "' not contiguous");
    }
    expected_offset += size;
    entries.push_back(FileEntry{std::move(name), Bytes(bytes.begin() + offset,
                                                       bytes.begin() + offset + size)});
  }
  if (pos != index_end) throw PackageError(PackageErrc::IndexOverrun, "index length mismatch");
  if (expected_offset != bytes.size()) {
    throw PackageError(PackageErrc::IndexOverrun, "data region length mismatch");
  }
  return Package(std::move(entries));
}

std::vector<std::pair<std::string, std::size_t>> list_entries(const Package& pkg) {
  std::vector<std::pair<std::string, std::size_t>> out;
  out.reserve(pkg.size());
  for (const auto& e : pkg.entries()) out.emplace_back(e.path, e.data.size());
  return out;
}

namespace {

Bytes slurp(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

Package read_directory(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw std::runtime_error("not a directory: " + root.string());
  std::vector<FileEntry> entries;
  for (const auto& item : fs::recursive_directory_iterator(root)) {
    if (!item.is_regular_file()) continue;
    auto rel = fs::relative(item.path(), root).generic_string();
    entries.push_back(FileEntry{std::move(rel), slurp(item.path())});
  }
  std::sort(entries.begin(), entries.end(),
            [](const FileEntry& a, const FileEntry& b) { return a.path < b.path; });
  return Package(std::move(entries));
}

Package read_file(const std::filesystem::path& file) {
  const Bytes raw = slurp(file);
  return unpack(raw);
}

void write_file(const std::filesystem::path& file, const Package& pkg) {
  const Bytes raw = pack(pkg.entries());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

void extract_to(const std::filesystem::path& root, const Package& pkg) {
  for (const auto& e : pkg.entries()) {
    const auto target = root / e.path;
    std::filesystem::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(e.data.size()));
  }
}

}  // namespace coffeescan::pkg
