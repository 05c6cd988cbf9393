#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "memaudit/core.hpp"

namespace memaudit {

/// Multi-channel 3D volume, channel-major then slice-major.
class VolumeRecord {
 public:
  VolumeRecord(std::string id, std::size_t channels, std::size_t depth, std::size_t height,
               std::size_t width, std::vector<float> voxels);

  const std::string& id() const noexcept { return id_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t depth() const noexcept { return depth_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::span<const float> voxels() const noexcept { return voxels_; }

  /// The H*W plane of channel `c` at slice `d`.
  std::span<const float> plane(std::size_t c, std::size_t d) const;

  friend bool operator==(const VolumeRecord&, const VolumeRecord&) = default;

 private:
  std::string id_;
  std::size_t channels_, depth_, height_, width_;
  std::vector<float> voxels_;
};

/// N row vectors of a common dimension: feature embeddings or class
/// probabilities produced outside this toolkit.
class EmbeddingSet {
 public:
  EmbeddingSet(std::vector<std::string> ids, std::size_t dim, std::vector<float> rows);

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(rows_).subspan(i * dim_, dim_);
  }
  std::span<const float> data() const noexcept { return rows_; }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  std::vector<std::string> ids_;
  std::size_t dim_;
  std::vector<float> rows_;
};

// ---------------------------------------------------------------------------
// PGM (binary P5, 8-bit)

ImageRecord read_pgm(const std::filesystem::path& path);
ImageRecord parse_pgm(std::span<const std::uint8_t> bytes, std::string id);
/// Writes channel 0 rounded and clamped to [0, 255].
void write_pgm(const ImageRecord& image, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// IVC1 container

enum class Dtype : std::uint8_t { u8 = 0, f32 = 1 };

/// How write_ivc picks each entry's payload type.
enum class DtypePolicy {
  /// u8 when every value is an integer in [0, 255], f32 otherwise.
  automatic,
  f32,
};

using IvcRecord = std::variant<ImageRecord, VolumeRecord>;

const std::string& record_id(const IvcRecord& record);

std::vector<IvcRecord> read_ivc(const std::filesystem::path& path);
std::vector<IvcRecord> parse_ivc(std::span<const std::uint8_t> bytes);
void write_ivc(std::span<const IvcRecord> records, const std::filesystem::path& path,
               DtypePolicy policy = DtypePolicy::automatic);
std::vector<std::uint8_t> encode_ivc(std::span<const IvcRecord> records,
                                     DtypePolicy policy = DtypePolicy::automatic);

/// CRC-32, reflected polynomial 0xEDB88320.
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// EMB1 embedding matrix

EmbeddingSet read_embeddings(const std::filesystem::path& path);
/// Writes the matrix and, when `with_ids` is set, the ".ids" sidecar.
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                      bool with_ids = true);
/// "dir/real.emb" -> "dir/real.ids".
std::filesystem::path ids_sidecar_path(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manifests

enum class FileFormat { pgm, ivc, emb };

std::string_view to_string(FileFormat format) noexcept;
FileFormat parse_file_format(std::string_view text);
FileFormat format_from_extension(const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path path;  // resolved against the manifest directory
  FileFormat format;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Text manifest:
///
///     # comment
///     name: brats20-train
///     role: train
///     format: ivc            (optional; otherwise taken from each extension)
///     slices/part0.ivc
///     slices/part1.ivc
///
/// Header lines come first; the first line that is not a recognised
/// "key: value" pair starts the path list.
struct Manifest {
  std::string name;
  Role role = Role::train;
  std::vector<ManifestEntry> entries;
  std::filesystem::path location;
};

Manifest load_manifest(const std::filesystem::path& path);
/// Paths are written relative to the manifest's own directory when possible.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// All records of a manifest in manifest order, then container order.
std::vector<IvcRecord> load_records(const Manifest& manifest);
/// Image dataset; volumes, duplicate ids and mixed shapes are reported
/// together in one manifest error.
Dataset load_dataset(const Manifest& manifest);
/// Concatenation of every EMB1 entry.
EmbeddingSet load_embedding_set(const Manifest& manifest);

// ---------------------------------------------------------------------------
// File helpers

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace memaudit
