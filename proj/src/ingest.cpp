#include "memaudit/ingest.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "memaudit/error.hpp"

namespace fs = std::filesystem;

namespace memaudit {

VolumeRecord::VolumeRecord(std::string id, std::size_t channels, std::size_t depth,
                           std::size_t height, std::size_t width, std::vector<float> voxels)
    : id_(std::move(id)),
      channels_(channels),
      depth_(depth),
      height_(height),
      width_(width),
      voxels_(std::move(voxels)) {
  if (id_.empty()) fail(ErrorCode::invalid_argument, "volume id must be non-empty");
  if (channels_ == 0 || depth_ == 0 || height_ == 0 || width_ == 0) {
    fail(ErrorCode::invalid_argument, "volume '" + id_ + "' has a zero dimension");
  }
  if (voxels_.size() != channels_ * depth_ * height_ * width_) {
    fail(ErrorCode::invalid_argument, "volume '" + id_ + "' voxel count does not match C*D*H*W");
  }
  for (float v : voxels_) {
    if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "volume '" + id_ + "' is not finite");
  }
}

std::span<const float> VolumeRecord::plane(std::size_t c, std::size_t d) const {
  const std::size_t hw = height_ * width_;
  return std::span<const float>(voxels_).subspan((c * depth_ + d) * hw, hw);
}

EmbeddingSet::EmbeddingSet(std::vector<std::string> ids, std::size_t dim, std::vector<float> rows)
    : ids_(std::move(ids)), dim_(dim), rows_(std::move(rows)) {
  if (dim_ == 0) fail(ErrorCode::invalid_argument, "embedding dimension must be positive");
  if (rows_.size() != ids_.size() * dim_) {
    fail(ErrorCode::invalid_argument, "embedding matrix holds " + std::to_string(rows_.size()) +
                                          " values for " + std::to_string(ids_.size()) +
                                          " ids of dimension " + std::to_string(dim_));
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (!std::isfinite(rows_[i])) {
      fail(ErrorCode::invalid_argument,
           "embedding row " + std::to_string(i / dim_) + " has a non-finite value");
    }
  }
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::io, "read failed for '" + path.string() + "'");
  return bytes;
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      fail(ErrorCode::io, "write failed for '" + path.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::io, "cannot move output into place at '" + path.string() + "'");
  }
}

void write_file_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  std::span<const std::uint8_t> take(std::size_t n, std::string_view field) {
    if (n > remaining()) {
      fail(ErrorCode::format, what_ + ": truncated " + std::string(field) + " at offset " +
                                  std::to_string(pos_) + " (need " + std::to_string(n) +
                                  " bytes, " + std::to_string(remaining()) + " left)");
    }
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T le(std::string_view field) {
    auto b = take(sizeof(T), field);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T(b[i]) << (8 * i));
    return v;
  }

  [[noreturn]] void error(std::string_view message, std::size_t at) const {
    fail(ErrorCode::format,
         what_ + ": " + std::string(message) + " at offset " + std::to_string(at));
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

float load_f32(const std::uint8_t* p) {
  const std::uint32_t bits = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                             std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
  return std::bit_cast<float>(bits);
}

void store_f32(std::vector<std::uint8_t>& out, float v) {
  put_le(out, std::bit_cast<std::uint32_t>(v));
}

std::vector<float> decode_payload(std::span<const std::uint8_t> payload, Dtype dtype) {
  std::vector<float> values;
  if (dtype == Dtype::u8) {
    values.assign(payload.begin(), payload.end());
  } else {
    values.resize(payload.size() / 4);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = load_f32(payload.data() + 4 * i);
  }
  return values;
}

bool fits_u8(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) {
    return v >= 0.0f && v <= 255.0f && v == std::nearbyint(v);
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// PGM

ImageRecord parse_pgm(std::span<const std::uint8_t> bytes, std::string id) {
  const std::string what = "PGM '" + id + "'";
  if (bytes.size() < 2 || bytes[0] != 'P') {
    fail(ErrorCode::format, what + ": bad magic at offset 0");
  }
  if (bytes[1] != '5') {
    fail(ErrorCode::format, what + ": magic 'P" + std::string(1, static_cast<char>(bytes[1])) +
                                "' at offset 0 is not supported (only binary P5)");
  }
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* field) -> std::size_t {
    skip_space();
    const std::size_t start = pos;
    std::size_t value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > (1u << 30)) {
        fail(ErrorCode::format, what + ": " + field + " too large at offset " +
                                    std::to_string(start));
      }
      ++pos;
    }
    if (pos == start) {
      fail(ErrorCode::format,
           what + ": expected " + field + " at offset " + std::to_string(start));
    }
    return value;
  };
  const std::size_t width = read_uint("width");
  const std::size_t height = read_uint("height");
  const std::size_t maxval_at = pos;
  const std::size_t maxval = read_uint("maxval");
  if (width == 0 || height == 0) {
    fail(ErrorCode::format, what + ": zero image dimension in header");
  }
  if (maxval == 0 || maxval > 255) {
    fail(ErrorCode::format, what + ": maxval " + std::to_string(maxval) + " at offset " +
                                std::to_string(maxval_at) + " is outside 1..255");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    fail(ErrorCode::format, what + ": missing separator after header at offset " +
                                std::to_string(pos));
  }
  ++pos;
  const std::size_t need = width * height;
  if (bytes.size() - pos < need) {
    fail(ErrorCode::format, what + ": truncated payload at offset " + std::to_string(pos) +
                                " (need " + std::to_string(need) + " bytes, " +
                                std::to_string(bytes.size() - pos) + " present)");
  }
  std::vector<float> pixels(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                            bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return ImageRecord(std::move(id), Shape{1, height, width}, std::move(pixels));
}

ImageRecord read_pgm(const fs::path& path) {
  const auto bytes = read_file(path);
  ImageRecord img = parse_pgm(bytes, path.stem().string());
  return ImageRecord(img.id(), img.shape(), {img.pixels().begin(), img.pixels().end()},
                     path.string());
}

void write_pgm(const ImageRecord& image, const fs::path& path) {
  std::string header = "P5\n" + std::to_string(image.width()) + " " +
                       std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (float v : image.channel(0)) {
    bytes.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)));
  }
  write_file_atomic(path, bytes);
}

// ---------------------------------------------------------------------------
// IVC1

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = ::crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

const std::string& record_id(const IvcRecord& record) {
  return std::visit([](const auto& r) -> const std::string& { return r.id(); }, record);
}

std::vector<IvcRecord> parse_ivc(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, "IVC container");
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), "IVC", 3) != 0) in.error("bad magic", 0);
  if (magic[3] != '1') {
    fail(ErrorCode::unsupported_version,
         "IVC container: unsupported version 'IVC" +
             std::string(1, static_cast<char>(magic[3])) + "' at offset 0");
  }
  const auto count = in.le<std::uint32_t>("entry count");
  constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 40;

  std::vector<IvcRecord> records;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::size_t entry_at = in.offset();
    const auto id_len = in.le<std::uint16_t>("id length");
    auto id_bytes = in.take(id_len, "id");
    std::string id(id_bytes.begin(), id_bytes.end());
    const std::size_t ndims_at = in.offset();
    const auto ndims = in.le<std::uint8_t>("ndims");
    if (ndims != 3 && ndims != 4) {
      in.error("ndims " + std::to_string(ndims) + " is not 3 or 4", ndims_at);
    }
    std::vector<std::uint64_t> dims(ndims);
    std::uint64_t elements = 1;
    for (auto& d : dims) {
      const std::size_t at = in.offset();
      d = in.le<std::uint32_t>("dimension");
      if (d == 0) in.error("zero dimension", at);
      elements *= d;
      if (elements > kMaxElements) in.error("dimension overflow (element count > 2^40)", at);
    }
    const std::size_t dtype_at = in.offset();
    const auto dtype_code = in.le<std::uint8_t>("dtype");
    if (dtype_code > 1) {
      in.error("unknown dtype code " + std::to_string(dtype_code), dtype_at);
    }
    const auto dtype = static_cast<Dtype>(dtype_code);
    const std::uint64_t payload_bytes = elements * (dtype == Dtype::u8 ? 1 : 4);
    const std::size_t payload_at = in.offset();
    if (payload_bytes > in.remaining()) in.error("truncated payload", payload_at);
    auto payload = in.take(static_cast<std::size_t>(payload_bytes), "payload");
    const std::size_t crc_at = in.offset();
    const auto stored_crc = in.le<std::uint32_t>("checksum");
    if (stored_crc != crc32(payload)) {
      in.error("checksum mismatch for entry '" + id + "'", crc_at);
    }
    try {
      auto values = decode_payload(payload, dtype);
      if (ndims == 3) {
        records.emplace_back(ImageRecord(std::move(id), Shape{dims[0], dims[1], dims[2]},
                                         std::move(values)));
      } else {
        records.emplace_back(
            VolumeRecord(std::move(id), dims[0], dims[1], dims[2], dims[3], std::move(values)));
      }
    } catch (const Error& err) {
      in.error(std::string("invalid entry: ") + err.what(), entry_at);
    }
  }
  if (in.remaining() != 0) in.error("trailing bytes after last entry", in.offset());
  return records;
}

std::vector<IvcRecord> read_ivc(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_ivc(bytes);
  } catch (const Error& err) {
    fail(err.code(), path.string() + ": " + err.what());
  }
}

std::vector<std::uint8_t> encode_ivc(std::span<const IvcRecord> records, DtypePolicy policy) {
  if (records.empty()) fail(ErrorCode::invalid_argument, "write_ivc: no records");
  std::vector<std::uint8_t> out{'I', 'V', 'C', '1'};
  put_le(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& record : records) {
    const std::string& id = record_id(record);
    if (id.size() > 0xFFFF) fail(ErrorCode::invalid_argument, "write_ivc: id too long");
    put_le(out, static_cast<std::uint16_t>(id.size()));
    out.insert(out.end(), id.begin(), id.end());

    std::vector<std::uint64_t> dims;
    std::span<const float> values;
    if (const auto* img = std::get_if<ImageRecord>(&record)) {
      dims = {img->channels(), img->height(), img->width()};
      values = img->pixels();
    } else {
      const auto& vol = std::get<VolumeRecord>(record);
      dims = {vol.channels(), vol.depth(), vol.height(), vol.width()};
      values = vol.voxels();
    }
    put_le(out, static_cast<std::uint8_t>(dims.size()));
    for (auto d : dims) {
      if (d > 0xFFFFFFFFu) fail(ErrorCode::invalid_argument, "write_ivc: dimension too large");
      put_le(out, static_cast<std::uint32_t>(d));
    }
    const Dtype dtype =
        policy == DtypePolicy::automatic && fits_u8(values) ? Dtype::u8 : Dtype::f32;
    put_le(out, static_cast<std::uint8_t>(dtype));
    const std::size_t payload_at = out.size();
    if (dtype == Dtype::u8) {
      for (float v : values) out.push_back(static_cast<std::uint8_t>(v));
    } else {
      for (float v : values) store_f32(out, v);
    }
    put_le(out, crc32(std::span<const std::uint8_t>(out).subspan(payload_at)));
  }
  return out;
}

void write_ivc(std::span<const IvcRecord> records, const fs::path& path, DtypePolicy policy) {
  write_file_atomic(path, encode_ivc(records, policy));
}

// ---------------------------------------------------------------------------
// EMB1

fs::path ids_sidecar_path(const fs::path& path) {
  fs::path p = path;
  p.replace_extension(".ids");
  return p;
}

EmbeddingSet read_embeddings(const fs::path& path) {
  const auto bytes = read_file(path);
  ByteReader in(bytes, "EMB file '" + path.string() + "'");
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), "EMB1", 4) != 0) in.error("bad magic", 0);
  const auto n = in.le<std::uint32_t>("row count");
  const auto dim = in.le<std::uint32_t>("dimension");
  if (n == 0) fail(ErrorCode::empty_set, "EMB file '" + path.string() + "' has no rows");
  if (dim == 0) in.error("zero dimension", 8);
  const std::size_t payload = in.remaining();
  if (payload % (4 * std::size_t{dim}) != 0) {
    in.error("payload of " + std::to_string(payload) + " bytes is not a multiple of 4*dim", 12);
  }
  if (payload / (4 * std::size_t{dim}) != n) {
    in.error("header declares " + std::to_string(n) + " rows but payload holds " +
                 std::to_string(payload / (4 * std::size_t{dim})),
             4);
  }
  auto data = in.take(payload, "rows");
  std::vector<float> rows(payload / 4);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = load_f32(data.data() + 4 * i);

  std::vector<std::string> ids;
  const fs::path sidecar = ids_sidecar_path(path);
  if (fs::exists(sidecar)) {
    std::ifstream ids_in(sidecar);
    std::string line;
    while (std::getline(ids_in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) ids.push_back(line);
    }
    if (ids.size() != n) {
      fail(ErrorCode::format, "sidecar '" + sidecar.string() + "' lists " +
                                  std::to_string(ids.size()) + " ids for " + std::to_string(n) +
                                  " rows");
    }
  } else {
    for (std::uint32_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  }
  try {
    return EmbeddingSet(std::move(ids), dim, std::move(rows));
  } catch (const Error& err) {
    fail(ErrorCode::format, "EMB file '" + path.string() + "': " + err.what());
  }
}

void write_embeddings(const EmbeddingSet& set, const fs::path& path, bool with_ids) {
  if (set.size() == 0) fail(ErrorCode::empty_set, "write_embeddings: no rows");
  std::vector<std::uint8_t> out{'E', 'M', 'B', '1'};
  put_le(out, static_cast<std::uint32_t>(set.size()));
  put_le(out, static_cast<std::uint32_t>(set.dim()));
  for (float v : set.data()) store_f32(out, v);
  write_file_atomic(path, out);
  if (with_ids) {
    std::string text;
    for (const auto& id : set.ids()) text += id + "\n";
    write_file_atomic(ids_sidecar_path(path), text);
  }
}

// ---------------------------------------------------------------------------
// Manifests

std::string_view to_string(FileFormat format) noexcept {
  switch (format) {
    case FileFormat::pgm: return "pgm";
    case FileFormat::ivc: return "ivc";
    case FileFormat::emb: return "emb";
  }
  return "pgm";
}

FileFormat parse_file_format(std::string_view text) {
  if (text == "pgm") return FileFormat::pgm;
  if (text == "ivc") return FileFormat::ivc;
  if (text == "emb") return FileFormat::emb;
  fail(ErrorCode::invalid_argument, "unknown file format '" + std::string(text) + "'");
}

FileFormat format_from_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".pgm") return FileFormat::pgm;
  if (ext == ".ivc") return FileFormat::ivc;
  if (ext == ".emb") return FileFormat::emb;
  fail(ErrorCode::invalid_argument,
       "cannot infer the format of '" + path.string() + "' from its extension");
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string join_problems(const std::string& head, const std::vector<std::string>& problems) {
  std::string msg = head;
  for (const auto& p : problems) msg += "\n  - " + p;
  return msg;
}

}  // namespace

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open manifest '" + path.string() + "'");

  Manifest manifest;
  manifest.location = path;
  manifest.name = path.stem().string();
  const fs::path base = path.parent_path();
  std::optional<FileFormat> forced_format;
  bool role_seen = false;
  bool in_header = true;
  std::vector<std::string> problems;
  std::set<fs::path> seen_paths;
  std::map<std::string, fs::path> pgm_ids;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (in_header) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        const std::string key = trim(std::string_view(line).substr(0, colon));
        const std::string value = trim(std::string_view(line).substr(colon + 1));
        if (key == "name" || key == "role" || key == "format") {
          try {
            if (key == "name") {
              manifest.name = value;
            } else if (key == "role") {
              manifest.role = parse_role(value);
              role_seen = true;
            } else {
              forced_format = parse_file_format(value);
            }
          } catch (const Error& err) {
            problems.push_back("line " + std::to_string(line_no) + ": " + err.what());
          }
          continue;
        }
      }
      in_header = false;
    }
    const fs::path entry_path = fs::path(line).is_absolute() ? fs::path(line) : base / line;
    const std::string where = "line " + std::to_string(line_no) + " '" + line + "'";
    FileFormat format = FileFormat::pgm;
    try {
      format = forced_format ? *forced_format : format_from_extension(entry_path);
    } catch (const Error& err) {
      problems.push_back(where + ": " + err.what());
      continue;
    }
    if (!fs::is_regular_file(entry_path)) {
      problems.push_back(where + ": file not found");
      continue;
    }
    const fs::path canonical = fs::weakly_canonical(entry_path);
    if (!seen_paths.insert(canonical).second) {
      problems.push_back(where + ": file listed more than once");
      continue;
    }
    if (format == FileFormat::pgm) {
      const std::string id = entry_path.stem().string();
      auto [it, inserted] = pgm_ids.emplace(id, entry_path);
      if (!inserted) {
        problems.push_back(where + ": duplicate image id '" + id + "' (also " +
                           it->second.string() + ")");
        continue;
      }
    }
    manifest.entries.push_back({entry_path, format});
  }
  if (!role_seen) problems.push_back("header: missing 'role:' line");
  if (!problems.empty()) {
    fail(ErrorCode::manifest, join_problems("manifest '" + path.string() + "':", problems));
  }
  return manifest;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  std::ostringstream out;
  out << "name: " << manifest.name << "\n";
  out << "role: " << to_string(manifest.role) << "\n";
  const fs::path base = fs::absolute(path).parent_path();
  for (const auto& entry : manifest.entries) {
    fs::path p = fs::absolute(entry.path).lexically_relative(base);
    if (p.empty()) p = fs::absolute(entry.path);
    out << p.generic_string() << "\n";
  }
  write_file_atomic(path, out.str());
}

std::vector<IvcRecord> load_records(const Manifest& manifest) {
  std::vector<IvcRecord> records;
  for (const auto& entry : manifest.entries) {
    switch (entry.format) {
      case FileFormat::pgm:
        records.emplace_back(read_pgm(entry.path));
        break;
      case FileFormat::ivc: {
        auto part = read_ivc(entry.path);
        for (auto& r : part) records.push_back(std::move(r));
        break;
      }
      case FileFormat::emb:
        fail(ErrorCode::manifest, "manifest '" + manifest.location.string() +
                                      "': embedding file '" + entry.path.string() +
                                      "' cannot be loaded as images");
    }
  }
  return records;
}

Dataset load_dataset(const Manifest& manifest) {
  auto records = load_records(manifest);
  std::vector<std::string> problems;
  std::vector<ImageRecord> images;
  std::set<std::string> ids;
  std::optional<Shape> shape;
  for (auto& record : records) {
    if (auto* vol = std::get_if<VolumeRecord>(&record)) {
      problems.push_back("'" + vol->id() + "' is a 3D volume; run preprocess to slice it");
      continue;
    }
    auto& img = std::get<ImageRecord>(record);
    if (!ids.insert(img.id()).second) {
      problems.push_back("duplicate image id '" + img.id() + "'");
      continue;
    }
    if (!shape) shape = img.shape();
    if (img.shape() != *shape) {
      problems.push_back("'" + img.id() + "' is " + to_string(img.shape()) + ", expected " +
                         to_string(*shape));
      continue;
    }
    images.push_back(std::move(img));
  }
  if (!problems.empty()) {
    fail(ErrorCode::manifest,
         join_problems("manifest '" + manifest.location.string() + "':", problems));
  }
  return Dataset(manifest.name, manifest.role, std::move(images));
}

EmbeddingSet load_embedding_set(const Manifest& manifest) {
  std::vector<std::string> ids;
  std::vector<float> rows;
  std::size_t dim = 0;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  for (const auto& entry : manifest.entries) {
    if (entry.format != FileFormat::emb) {
      problems.push_back("'" + entry.path.string() + "' is not an embedding file");
      continue;
    }
    auto part = read_embeddings(entry.path);
    if (dim == 0) dim = part.dim();
    if (part.dim() != dim) {
      problems.push_back("'" + entry.path.string() + "' has dimension " +
                         std::to_string(part.dim()) + ", expected " + std::to_string(dim));
      continue;
    }
    for (std::size_t i = 0; i < part.size(); ++i) {
      if (!seen.insert(part.ids()[i]).second) {
        problems.push_back("duplicate embedding id '" + part.ids()[i] + "'");
        continue;
      }
      ids.push_back(part.ids()[i]);
      auto r = part.row(i);
      rows.insert(rows.end(), r.begin(), r.end());
    }
  }
  if (ids.empty() && problems.empty()) problems.push_back("no embedding rows");
  if (!problems.empty()) {
    fail(ErrorCode::manifest,
         join_problems("manifest '" + manifest.location.string() + "':", problems));
  }
  return EmbeddingSet(std::move(ids), dim, std::move(rows));
}

}  // namespace memaudit
