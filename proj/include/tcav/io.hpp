#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcav/error.hpp"
#include "tcav/tensor.hpp"

// On-disk formats. All binary payloads are little-endian 64-bit reals;
// manifests with names/shapes/offsets live in the accompanying JSON files.

namespace tcav::io {

static_assert(std::endian::native == std::endian::little,
              "binary artifact formats are little-endian");

using json = nlohmann::json;

inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), "write_file_atomic: cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), "write_file_atomic: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "read_file: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_json_atomic(const std::filesystem::path& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

inline json read_json(const std::filesystem::path& path) {
  return json::parse(read_file(path));
}

inline void append_doubles(std::string& buf, const double* v, std::size_t n) {
  const std::size_t off = buf.size();
  buf.resize(off + n * sizeof(double));
  std::memcpy(buf.data() + off, v, n * sizeof(double));
}

inline void read_doubles(const std::string& buf, std::size_t byte_offset, double* v,
                         std::size_t n) {
  require(byte_offset + n * sizeof(double) <= buf.size(), "read_doubles: out of range");
  std::memcpy(v, buf.data() + byte_offset, n * sizeof(double));
}

// Named tensor container: concatenated raw doubles in a .bin file plus a
// JSON manifest [{name, shape, offset}] stored by the caller. Shared by
// model checkpoints and CAV archives.
struct TensorWriter {
  std::string bytes;
  json manifest = json::array();

  void add(const std::string& name, const num::Tensor& t) {
    manifest.push_back(
        {{"name", name}, {"shape", t.shape()}, {"offset", bytes.size()}});
    append_doubles(bytes, t.data(), t.size());
  }

  void save(const std::filesystem::path& bin_path) const { write_file_atomic(bin_path, bytes); }
};

struct TensorReader {
  std::string bytes;
  json manifest;

  TensorReader(const std::filesystem::path& bin_path, json manifest_in)
      : bytes(read_file(bin_path)), manifest(std::move(manifest_in)) {}

  num::Tensor get(const std::string& name) const {
    for (const auto& e : manifest) {
      if (e.at("name").get<std::string>() != name) continue;
      num::Shape shape = e.at("shape").get<num::Shape>();
      num::Tensor t(shape);
      read_doubles(bytes, e.at("offset").get<std::size_t>(), t.data(), t.size());
      return t;
    }
    throw Error("TensorReader: no tensor named '" + name + "'");
  }
};

// Shortest round-trip decimal representation; keeps CSV output deterministic.
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ += ",";
      out_ += header[i];
    }
    out_ += "\n";
    n_cols_ = header.size();
  }

  void row(const std::vector<std::string>& cells) {
    require(cells.size() == n_cols_, "CsvWriter: wrong column count");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ",";
      out_ += cells[i];
    }
    out_ += "\n";
  }

  void save(const std::filesystem::path& path) const { write_file_atomic(path, out_); }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
  std::size_t n_cols_ = 0;
};

}  // namespace tcav::io
