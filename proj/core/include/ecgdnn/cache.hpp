#pragma once

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "ecgdnn/preprocess.hpp"

namespace ecgdnn {

// Preprocessed-sample cache, binary, little-endian:
//   magic "ECGP" | version u32 | record count u32
//   per record: id length u16 | id bytes | 12*5000 float32 | 7 label bytes
// Label byte order matches the Target enumeration.

inline constexpr std::uint32_t kCacheVersion = 1;

/// Streaming writer; records are appended one at a time so corpora larger
/// than memory can be produced. The count field is patched on close.
class CacheWriter {
 public:
  explicit CacheWriter(const std::string& path);
  ~CacheWriter();
  CacheWriter(const CacheWriter&) = delete;
  CacheWriter& operator=(const CacheWriter&) = delete;

  void append(const PreprocessedSample& sample);
  void close();
  std::uint32_t count() const { return count_; }

 private:
  std::FILE* file_ = nullptr;
  std::string path_;
  std::uint32_t count_ = 0;
};

/// Random-access reader over a cache file. Keeps ids and labels in memory
/// and reads tensors on demand, so multi-gigabyte caches stay cheap.
class CacheReader {
 public:
  explicit CacheReader(const std::string& path);
  ~CacheReader();
  CacheReader(const CacheReader&) = delete;
  CacheReader& operator=(const CacheReader&) = delete;

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const LabelSet& labels(std::size_t i) const { return labels_[i]; }

  /// Copies record i's 12x5000 tensor into dst.
  void read_tensor(std::size_t i, float* dst) const;

  PreprocessedSample read(std::size_t i) const;

 private:
  std::FILE* file_ = nullptr;
  std::vector<std::string> ids_;
  std::vector<LabelSet> labels_;
  std::vector<std::uint64_t> tensor_offsets_;
};

/// Uniform view over preprocessed samples for training/evaluation; backed
/// either by memory or by a cache file.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual const std::string& id(std::size_t i) const = 0;
  virtual const LabelSet& labels(std::size_t i) const = 0;
  virtual void fill_tensor(std::size_t i, float* dst) const = 0;

  /// (leads, samples) of every tensor in this source.
  virtual std::pair<int, int> tensor_shape() const { return {kNumLeads, kSampleLen}; }
  std::size_t tensor_len() const {
    const auto [leads, len] = tensor_shape();
    return static_cast<std::size_t>(leads) * static_cast<std::size_t>(len);
  }
};

class InMemorySamples : public SampleSource {
 public:
  explicit InMemorySamples(std::vector<PreprocessedSample> samples)
      : samples_(std::move(samples)) {}

  std::size_t size() const override { return samples_.size(); }
  const std::string& id(std::size_t i) const override { return samples_[i].record_id; }
  const LabelSet& labels(std::size_t i) const override { return samples_[i].labels; }
  void fill_tensor(std::size_t i, float* dst) const override;

  std::vector<PreprocessedSample>& samples() { return samples_; }

 private:
  std::vector<PreprocessedSample> samples_;
};

class CacheSamples : public SampleSource {
 public:
  explicit CacheSamples(const std::string& path) : reader_(path) {}

  std::size_t size() const override { return reader_.size(); }
  const std::string& id(std::size_t i) const override { return reader_.id(i); }
  const LabelSet& labels(std::size_t i) const override { return reader_.labels(i); }
  void fill_tensor(std::size_t i, float* dst) const override { reader_.read_tensor(i, dst); }

 private:
  CacheReader reader_;
};

/// A subset view (by index) over another source; used for splits and folds.
class SubsetSamples : public SampleSource {
 public:
  SubsetSamples(const SampleSource& base, std::vector<std::size_t> indices)
      : base_(base), indices_(std::move(indices)) {}

  std::size_t size() const override { return indices_.size(); }
  const std::string& id(std::size_t i) const override { return base_.id(indices_[i]); }
  const LabelSet& labels(std::size_t i) const override { return base_.labels(indices_[i]); }
  void fill_tensor(std::size_t i, float* dst) const override {
    base_.fill_tensor(indices_[i], dst);
  }
  std::pair<int, int> tensor_shape() const override { return base_.tensor_shape(); }

 private:
  const SampleSource& base_;
  std::vector<std::size_t> indices_;
};

/// Arbitrary-shape in-memory source; lets tests train small models without
/// full-size ECG tensors.
class VectorSamples : public SampleSource {
 public:
  VectorSamples(int leads, int len) : leads_(leads), len_(len) {}

  void add(std::string id, std::vector<float> tensor, LabelSet labels);

  std::size_t size() const override { return tensors_.size(); }
  const std::string& id(std::size_t i) const override { return ids_[i]; }
  const LabelSet& labels(std::size_t i) const override { return labels_[i]; }
  void fill_tensor(std::size_t i, float* dst) const override;
  std::pair<int, int> tensor_shape() const override { return {leads_, len_}; }

 private:
  int leads_, len_;
  std::vector<std::string> ids_;
  std::vector<std::vector<float>> tensors_;
  std::vector<LabelSet> labels_;
};

}  // namespace ecgdnn
