#include "confret/io.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <zlib.h>

#include "confret/error.hpp"

namespace confret::io {

bool is_gzip_path(std::string_view path) {
  return path.size() >= 3 && path.substr(path.size() - 3) == ".gz";
}

// gzopen reads uncompressed files transparently, so one code path serves both.
struct Reader::Impl {
  gzFile file = nullptr;
  std::string pending;  // bytes returned by peek() but not yet consumed
  bool eof = false;

  int read_some(char* dst, unsigned n) {
    std::size_t served = 0;
    if (!pending.empty()) {
      served = std::min<std::size_t>(n, pending.size());
      std::memcpy(dst, pending.data(), served);
      pending.erase(0, served);
      if (served == n) return static_cast<int>(served);
    }
    const int got = gzread(file, dst + served, n - static_cast<unsigned>(served));
    if (got < 0) return got;
    return static_cast<int>(served) + got;
  }
};

Reader::Reader(const std::string& path) : impl_(std::make_unique<Impl>()), path_(path) {
  impl_->file = gzopen(path.c_str(), "rb");
  if (impl_->file == nullptr) {
    throw Error(ErrorCode::IoError, fmt::format("cannot open '{}': {}", path, std::strerror(errno)));
  }
  gzbuffer(impl_->file, 1 << 17);
}

Reader::~Reader() {
  if (impl_ && impl_->file != nullptr) gzclose(impl_->file);
}

bool Reader::next_line(std::string& line) {
  line.clear();
  char ch = 0;
  bool any = false;
  // Buffered by zlib; per-byte reads keep long embedding lines simple.
  while (true) {
    if (!impl_->pending.empty()) {
      ch = impl_->pending.front();
      impl_->pending.erase(0, 1);
    } else {
      const int c = gzgetc(impl_->file);
      if (c == -1) {
        int errnum = 0;
        const char* msg = gzerror(impl_->file, &errnum);
        if (errnum != Z_OK && errnum != Z_STREAM_END) {
          throw Error(ErrorCode::IoError, fmt::format("{}: read failed: {}", path_, msg));
        }
        break;
      }
      ch = static_cast<char>(c);
    }
    any = true;
    if (ch == '\n') break;
    line.push_back(ch);
  }
  if (!any) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++line_no_;
  return true;
}

bool Reader::read_exact(void* dst, std::size_t n) {
  auto* out = static_cast<char*>(dst);
  while (n > 0) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
    const int got = impl_->read_some(out, chunk);
    if (got <= 0) return false;
    out += got;
    n -= static_cast<std::size_t>(got);
  }
  return true;
}

std::string Reader::peek(std::size_t n) {
  std::string buf(n, '\0');
  const int got = gzread(impl_->file, buf.data(), static_cast<unsigned>(n));
  buf.resize(got > 0 ? static_cast<std::size_t>(got) : 0);
  impl_->pending = buf + impl_->pending;
  return buf;
}

struct Writer::Impl {
  gzFile gz = nullptr;
  std::ofstream plain;
  bool closed = false;
};

Writer::Writer(const std::string& path) : impl_(std::make_unique<Impl>()), path_(path) {
  if (is_gzip_path(path)) {
    impl_->gz = gzopen(path.c_str(), "wb");
    if (impl_->gz == nullptr) {
      throw Error(ErrorCode::IoError, fmt::format("cannot create '{}': {}", path, std::strerror(errno)));
    }
  } else {
    impl_->plain.open(path, std::ios::binary | std::ios::trunc);
    if (!impl_->plain) {
      throw Error(ErrorCode::IoError, fmt::format("cannot create '{}': {}", path, std::strerror(errno)));
    }
  }
}

Writer::~Writer() {
  try {
    close();
  } catch (...) {
  }
}

void Writer::write(std::string_view bytes) {
  if (impl_->closed) throw Error(ErrorCode::IoError, fmt::format("{}: write after close", path_));
  if (bytes.empty()) return;
  if (impl_->gz != nullptr) {
    if (gzwrite(impl_->gz, bytes.data(), static_cast<unsigned>(bytes.size())) == 0) {
      throw Error(ErrorCode::IoError, fmt::format("{}: compressed write failed", path_));
    }
  } else {
    impl_->plain.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!impl_->plain) throw Error(ErrorCode::IoError, fmt::format("{}: write failed", path_));
  }
}

void Writer::close() {
  if (impl_->closed) return;
  impl_->closed = true;
  if (impl_->gz != nullptr) {
    if (gzclose(impl_->gz) != Z_OK) throw Error(ErrorCode::IoError, fmt::format("{}: close failed", path_));
    impl_->gz = nullptr;
  } else {
    impl_->plain.close();
    if (impl_->plain.fail()) throw Error(ErrorCode::IoError, fmt::format("{}: close failed", path_));
  }
}

}  // namespace confret::io
