// Copyright 2026 The teamfs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "team/embedding_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "team/errors.hpp"

namespace team {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary embedding I/O assumes a little-endian host");

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::io, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

[[noreturn]] void format_error(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::format, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

EmbeddingFormat parse_format(std::string_view name) {
  if (name == "csv") return EmbeddingFormat::csv;
  if (name == "bin" || name == "binary") return EmbeddingFormat::binary;
  throw Error(ErrorKind::parameter, "unknown embedding format '" + std::string(name) + "'");
}

Dataset parse_embeddings_csv(std::string_view text) {
  std::vector<EmbeddingVector> rows;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty()) continue;

    EmbeddingVector row;
    std::vector<double> values;
    std::size_t field = 0;
    while (true) {
      const auto comma = line.find(',');
      const std::string_view tok = trim(line.substr(0, comma));
      if (field == 0) {
        if (tok == "?") {
          row.label = std::nullopt;
        } else {
          std::uint32_t label = 0;
          const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), label);
          if (ec != std::errc() || p != tok.data() + tok.size() || tok.empty() || label == kUnlabeled) {
            format_error(line_no, "invalid label '" + std::string(tok) + "'");
          }
          row.label = label;
        }
      } else {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size() || tok.empty()) {
          format_error(line_no, "invalid value '" + std::string(tok) + "'");
        }
        if (!std::isfinite(v)) format_error(line_no, "non-finite value");
        values.push_back(v);
      }
      ++field;
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (values.empty()) format_error(line_no, "record has no values");
    if (rows.empty()) {
      dim = values.size();
    } else if (values.size() != dim) {
      format_error(line_no, "dimension " + std::to_string(values.size()) + " differs from " +
                                std::to_string(dim));
    }
    row.values = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::format, "no records");
  return Dataset(std::move(rows));
}

std::string format_embeddings_csv(const Dataset& data) {
  std::string out;
  char buf[64];
  for (const auto& r : data.rows()) {
    if (r.label) {
      out += std::to_string(*r.label);
    } else {
      out += '?';
    }
    for (Eigen::Index j = 0; j < r.values.size(); ++j) {
      const int n = std::snprintf(buf, sizeof(buf), ",%.9g", r.values[j]);
      out.append(buf, static_cast<std::size_t>(n));
    }
    out += '\n';
  }
  return out;
}

Dataset parse_embeddings_binary(std::string_view bytes) {
  if (bytes.empty()) throw Error(ErrorKind::format, "no records");
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kEmbeddingMagic, 8) != 0) {
    throw Error(ErrorKind::format, "unknown magic or version (expected TEAMEMB1)");
  }
  const auto n = get<std::uint32_t>(bytes, 8);
  const auto d = get<std::uint32_t>(bytes, 12);
  if (n == 0) throw Error(ErrorKind::format, "no records");
  if (d == 0) throw Error(ErrorKind::format, "dimension must be at least 1");
  const std::size_t record = 4 + static_cast<std::size_t>(d) * 4;
  const std::size_t expected = 16 + static_cast<std::size_t>(n) * record;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::format, "file size " + std::to_string(bytes.size()) + " does not match header (" +
                                       std::to_string(expected) + " bytes)");
  }
  std::vector<EmbeddingVector> rows(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t off = 16 + i * record;
    const auto label = get<std::uint32_t>(bytes, off);
    rows[i].label = label == kUnlabeled ? std::nullopt : std::optional<std::uint32_t>(label);
    rows[i].values.resize(d);
    for (std::uint32_t j = 0; j < d; ++j) {
      const float v = get<float>(bytes, off + 4 + j * 4);
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::format, "record " + std::to_string(i) + ": non-finite value");
      }
      rows[i].values[j] = static_cast<double>(v);
    }
  }
  return Dataset(std::move(rows));
}

std::string format_embeddings_binary(const Dataset& data) {
  std::string out;
  out.reserve(16 + data.size() * (4 + data.dim() * 4));
  out.append(kEmbeddingMagic, 8);
  put(out, static_cast<std::uint32_t>(data.size()));
  put(out, static_cast<std::uint32_t>(data.dim()));
  for (const auto& r : data.rows()) {
    put(out, r.label ? *r.label : kUnlabeled);
    for (Eigen::Index j = 0; j < r.values.size(); ++j) put(out, static_cast<float>(r.values[j]));
  }
  return out;
}

Dataset load_embeddings(const std::filesystem::path& path, EmbeddingFormat format) {
  const std::string bytes = read_file(path);
  try {
    return format == EmbeddingFormat::csv ? parse_embeddings_csv(bytes) : parse_embeddings_binary(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void save_embeddings(const Dataset& data, const std::filesystem::path& path, EmbeddingFormat format) {
  if (data.empty()) throw Error(ErrorKind::parameter, "refusing to save an empty dataset");
  if (data.size() > 0xFFFFFFFEu || data.dim() > 0xFFFFFFFFu) {
    throw Error(ErrorKind::parameter, "dataset too large for the embedding format");
  }
  write_file(path, format == EmbeddingFormat::csv ? format_embeddings_csv(data) : format_embeddings_binary(data));
}

void save_matrix_block(const Matrix& m, const std::filesystem::path& path) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::parameter, "matrix block must be square");
  std::string out;
  put(out, static_cast<std::uint32_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put(out, m(i, j));
  }
  write_file(path, out);
}

Matrix load_matrix_block(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 4) throw Error(ErrorKind::format, path.string() + ": truncated matrix block");
  const auto d = get<std::uint32_t>(bytes, 0);
  if (d == 0 || bytes.size() != 4 + static_cast<std::size_t>(d) * d * 8) {
    throw Error(ErrorKind::format, path.string() + ": matrix block size does not match header");
  }
  Matrix m(d, d);
  for (std::uint32_t i = 0; i < d; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) m(i, j) = get<double>(bytes, 4 + (i * d + j) * 8);
  }
  return m;
}

}  // namespace team
