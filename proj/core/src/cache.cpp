#include "ecgdnn/cache.hpp"

#include <cstring>

#include "ecgdnn/errors.hpp"

namespace ecgdnn {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'G', 'P'};
constexpr std::size_t kTensorLen = static_cast<std::size_t>(kNumLeads) * kSampleLen;

void put_u16(std::FILE* f, std::uint16_t v) {
  const std::uint8_t b[2] = {static_cast<std::uint8_t>(v & 0xFF),
                             static_cast<std::uint8_t>(v >> 8)};
  if (std::fwrite(b, 1, 2, f) != 2) throw IoError("cache write failed");
}

void put_u32(std::FILE* f, std::uint32_t v) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
  if (std::fwrite(b, 1, 4, f) != 4) throw IoError("cache write failed");
}

std::uint16_t get_u16(std::FILE* f) {
  std::uint8_t b[2];
  if (std::fread(b, 1, 2, f) != 2) throw IoError("cache truncated");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::FILE* f) {
  std::uint8_t b[4];
  if (std::fread(b, 1, 4, f) != 4) throw IoError("cache truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

static_assert(sizeof(float) == 4, "float must be 32-bit IEEE-754");

}  // namespace

CacheWriter::CacheWriter(const std::string& path) : path_(path) {
  file_ = std::fopen(path.c_str(), "wb");
  if (!file_) throw IoError("cannot open cache for writing: " + path);
  if (std::fwrite(kMagic, 1, 4, file_) != 4) throw IoError("cache write failed");
  put_u32(file_, kCacheVersion);
  put_u32(file_, 0);  // count, patched on close
}

CacheWriter::~CacheWriter() {
  if (file_) close();
}

void CacheWriter::append(const PreprocessedSample& sample) {
  if (!file_) throw IoError("cache writer already closed");
  if (sample.tensor.size() != kTensorLen) {
    throw LengthMismatch("sample tensor has " + std::to_string(sample.tensor.size()) +
                         " values, expected " + std::to_string(kTensorLen));
  }
  if (sample.record_id.size() > 0xFFFF) throw LengthMismatch("record id too long");
  put_u16(file_, static_cast<std::uint16_t>(sample.record_id.size()));
  if (!sample.record_id.empty() &&
      std::fwrite(sample.record_id.data(), 1, sample.record_id.size(), file_) !=
          sample.record_id.size()) {
    throw IoError("cache write failed");
  }
  // Values are written via memcpy of the native float representation;
  // little-endian IEEE-754 is assumed (checked for the platforms we target).
  if (std::fwrite(sample.tensor.data(), sizeof(float), kTensorLen, file_) != kTensorLen) {
    throw IoError("cache write failed");
  }
  std::uint8_t label_bytes[kNumTargets];
  for (std::size_t t = 0; t < kNumTargets; ++t) {
    label_bytes[t] = sample.labels.get(static_cast<Target>(t)) ? 1 : 0;
  }
  if (std::fwrite(label_bytes, 1, kNumTargets, file_) != kNumTargets) {
    throw IoError("cache write failed");
  }
  ++count_;
}

void CacheWriter::close() {
  if (!file_) return;
  if (std::fseek(file_, 8, SEEK_SET) != 0) throw IoError("cache seek failed");
  put_u32(file_, count_);
  std::fclose(file_);
  file_ = nullptr;
}

CacheReader::CacheReader(const std::string& path) {
  file_ = std::fopen(path.c_str(), "rb");
  if (!file_) throw IoError("cannot open cache: " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, file_) != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    std::fclose(file_);
    file_ = nullptr;
    throw IoError("not an ECGP cache: " + path);
  }
  const std::uint32_t version = get_u32(file_);
  if (version != kCacheVersion) {
    std::fclose(file_);
    file_ = nullptr;
    throw IoError("unsupported cache version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32(file_);
  ids_.reserve(count);
  labels_.reserve(count);
  tensor_offsets_.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t id_len = get_u16(file_);
    std::string id(id_len, '\0');
    if (id_len && std::fread(id.data(), 1, id_len, file_) != id_len) {
      throw IoError("cache truncated");
    }
    tensor_offsets_.push_back(static_cast<std::uint64_t>(std::ftell(file_)));
    if (std::fseek(file_, static_cast<long>(kTensorLen * sizeof(float)), SEEK_CUR) != 0) {
      throw IoError("cache truncated");
    }
    std::uint8_t label_bytes[kNumTargets];
    if (std::fread(label_bytes, 1, kNumTargets, file_) != kNumTargets) {
      throw IoError("cache truncated");
    }
    LabelSet labels;
    for (std::size_t t = 0; t < kNumTargets; ++t) {
      labels.set(static_cast<Target>(t), label_bytes[t] != 0);
    }
    ids_.push_back(std::move(id));
    labels_.push_back(labels);
  }
}

CacheReader::~CacheReader() {
  if (file_) std::fclose(file_);
}

void CacheReader::read_tensor(std::size_t i, float* dst) const {
  if (std::fseek(file_, static_cast<long>(tensor_offsets_[i]), SEEK_SET) != 0) {
    throw IoError("cache seek failed");
  }
  if (std::fread(dst, sizeof(float), kTensorLen, file_) != kTensorLen) {
    throw IoError("cache truncated");
  }
}

PreprocessedSample CacheReader::read(std::size_t i) const {
  PreprocessedSample sample;
  sample.record_id = ids_[i];
  sample.labels = labels_[i];
  sample.tensor.resize(kTensorLen);
  read_tensor(i, sample.tensor.data());
  return sample;
}

void InMemorySamples::fill_tensor(std::size_t i, float* dst) const {
  std::memcpy(dst, samples_[i].tensor.data(), samples_[i].tensor.size() * sizeof(float));
}

void VectorSamples::add(std::string id, std::vector<float> tensor, LabelSet labels) {
  if (tensor.size() != tensor_len()) {
    throw LengthMismatch("tensor size does not match source shape");
  }
  ids_.push_back(std::move(id));
  tensors_.push_back(std::move(tensor));
  labels_.push_back(labels);
}

void VectorSamples::fill_tensor(std::size_t i, float* dst) const {
  std::memcpy(dst, tensors_[i].data(), tensors_[i].size() * sizeof(float));
}

}  // namespace ecgdnn
