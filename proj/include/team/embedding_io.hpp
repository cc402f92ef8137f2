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

#ifndef TEAM_EMBEDDING_IO_HPP_
#define TEAM_EMBEDDING_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "team/types.hpp"

namespace team {

enum class EmbeddingFormat { csv, binary };

/// Parses "csv" or "bin"/"binary".
EmbeddingFormat parse_format(std::string_view name);

/// Byte layout of the binary format:
///   [0,8)   ASCII "TEAMEMB1"
///   [8,12)  u32 LE record count
///   [12,16) u32 LE dimension
///   records: u32 LE label (0xFFFFFFFF = unlabeled), then dim f32 LE values.
inline constexpr char kEmbeddingMagic[8] = {'T', 'E', 'A', 'M', 'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

Dataset load_embeddings(const std::filesystem::path& path, EmbeddingFormat format);
void save_embeddings(const Dataset& data, const std::filesystem::path& path, EmbeddingFormat format);

/// In-memory variants used by the file functions.
Dataset parse_embeddings_csv(std::string_view text);
Dataset parse_embeddings_binary(std::string_view bytes);
std::string format_embeddings_csv(const Dataset& data);
std::string format_embeddings_binary(const Dataset& data);

/// Square matrix block: u32 LE d, then d*d f64 LE row-major.
void save_matrix_block(const Matrix& m, const std::filesystem::path& path);
Matrix load_matrix_block(const std::filesystem::path& path);

}  // namespace team

#endif  // TEAM_EMBEDDING_IO_HPP_
