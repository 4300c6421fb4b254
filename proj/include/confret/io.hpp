#pragma once

// File access shared by the loaders. Paths ending in ".gz" are compressed and
// decompressed transparently; everything else is read and written as-is.

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

namespace confret::io {

bool is_gzip_path(std::string_view path);

class Reader {
 public:
  explicit Reader(const std::string& path);
  ~Reader();
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  // Next line without its terminator ("\r\n" tolerated). False at EOF.
  bool next_line(std::string& line);
  // Reads exactly n bytes; false on short read.
  bool read_exact(void* dst, std::size_t n);
  // Looks at up to n leading bytes without consuming them. Only valid before
  // any other read.
  std::string peek(std::size_t n);

  std::size_t line_number() const noexcept { return line_no_; }
  const std::string& path() const noexcept { return path_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string path_;
  std::size_t line_no_ = 0;
};

class Writer {
 public:
  explicit Writer(const std::string& path);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void write(std::string_view bytes);
  // Flushes and closes; throws IoError if anything failed. Called by the
  // destructor too, which swallows the error.
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string path_;
};

}  // namespace confret::io
