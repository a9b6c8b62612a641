#include "ecgdnn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <map>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"

namespace ecgdnn {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'G', 'M'};

void append_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_string(std::string& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw CorruptCheckpoint("string field too long");
  append_u16(out, static_cast<std::uint16_t>(s.size()));
  out += s;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > size_) throw CorruptCheckpoint("checkpoint truncated");
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  std::uint16_t u16() {
    const std::uint8_t* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const std::uint8_t* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const std::uint8_t* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  std::string string() {
    const std::uint16_t n = u16();
    const std::uint8_t* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool at_end() const { return pos_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::map<std::string, std::string> config_fields(const DenseNetConfig& cfg) {
  std::map<std::string, std::string> fields;
  fields["preset"] = cfg.preset;
  fields["init_channels"] = std::to_string(cfg.init_channels);
  fields["growth_rate"] = std::to_string(cfg.growth_rate);
  std::string layers;
  for (std::size_t i = 0; i < cfg.block_layers.size(); ++i) {
    if (i) layers += ",";
    layers += std::to_string(cfg.block_layers[i]);
  }
  fields["block_layers"] = layers;
  fields["bn_size"] = std::to_string(cfg.bn_size);
  fields["compression"] = format_double(cfg.compression);
  fields["input_leads"] = std::to_string(cfg.input_leads);
  fields["input_len"] = std::to_string(cfg.input_len);
  fields["num_outputs"] = std::to_string(cfg.num_outputs);
  fields["linear_init_weight"] = format_double(cfg.linear_init_weight);
  return fields;
}

DenseNetConfig config_from_fields(const std::map<std::string, std::string>& fields) {
  DenseNetConfig cfg;
  const auto get = [&](const char* key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) {
      throw CorruptCheckpoint(std::string("config field missing: ") + key);
    }
    return it->second;
  };
  try {
    cfg.preset = get("preset");
    cfg.init_channels = std::stoi(get("init_channels"));
    cfg.growth_rate = std::stoi(get("growth_rate"));
    const auto layers = csv_split(get("block_layers"));
    if (layers.size() != cfg.block_layers.size()) {
      throw CorruptCheckpoint("block_layers must have 4 entries");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      cfg.block_layers[i] = std::stoi(layers[i]);
    }
    cfg.bn_size = std::stoi(get("bn_size"));
    cfg.compression = std::stod(get("compression"));
    cfg.input_leads = std::stoi(get("input_leads"));
    cfg.input_len = std::stoi(get("input_len"));
    cfg.num_outputs = std::stoi(get("num_outputs"));
    cfg.linear_init_weight = std::stod(get("linear_init_weight"));
  } catch (const CorruptCheckpoint&) {
    throw;
  } catch (...) {
    throw CorruptCheckpoint("malformed config field value");
  }
  return cfg;
}

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  append_u32(out, kCheckpointVersion);

  const auto fields = config_fields(model.config());
  append_u32(out, static_cast<std::uint32_t>(fields.size()));
  for (const auto& [key, value] : fields) {
    append_string(out, key);
    append_string(out, value);
  }
  append_u64(out, model.seed);

  auto tensors = model.named_tensors();
  append_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& entry : tensors) {
    append_string(out, entry.name);
    const bool trainable =
        entry.is_param && model.unit_trainable(entry.unit);
    out.push_back(static_cast<char>(entry.unit));
    out.push_back(static_cast<char>(trainable ? 1 : 0));
    out.push_back(static_cast<char>(0));  // dtype f32
    const auto& shape = entry.tensor->shape();
    out.push_back(static_cast<char>(shape.size()));
    for (auto d : shape) append_u32(out, static_cast<std::uint32_t>(d));
    const std::size_t bytes = entry.tensor->values().size() * sizeof(float);
    const std::size_t offset = out.size();
    out.resize(offset + bytes);
    std::memcpy(out.data() + offset, entry.tensor->data(), bytes);
  }
  write_binary_file(path, out.data(), out.size());
}

Model load_checkpoint(const std::string& path) {
  const auto bytes = read_binary_file(path);
  Reader reader(bytes.data(), bytes.size());

  const std::uint8_t* magic = reader.take(4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw CorruptCheckpoint("bad magic in " + path);
  }
  const std::uint32_t version = reader.u32();
  if (version != kCheckpointVersion) {
    throw CorruptCheckpoint("unsupported checkpoint version " + std::to_string(version));
  }

  std::map<std::string, std::string> fields;
  const std::uint32_t field_count = reader.u32();
  for (std::uint32_t i = 0; i < field_count; ++i) {
    std::string key = reader.string();
    fields[std::move(key)] = reader.string();
  }
  Model model(config_from_fields(fields));
  model.seed = reader.u64();

  auto tensors = model.named_tensors();
  const std::uint32_t count = reader.u32();
  if (count != tensors.size()) {
    throw CorruptCheckpoint("tensor count mismatch: file has " + std::to_string(count) +
                            ", model has " + std::to_string(tensors.size()));
  }
  int frozen_prefix = 0;
  bool prefix_open = true;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& entry = tensors[i];
    const std::string name = reader.string();
    if (name != entry.name) {
      throw CorruptCheckpoint("tensor order mismatch at " + name + " (expected " + entry.name +
                              ")");
    }
    const std::uint8_t unit = *reader.take(1);
    const std::uint8_t trainable = *reader.take(1);
    const std::uint8_t dtype = *reader.take(1);
    const std::uint8_t ndim = *reader.take(1);
    if (unit != static_cast<std::uint8_t>(entry.unit)) {
      throw CorruptCheckpoint("unit mismatch for " + name);
    }
    if (dtype != 0) throw CorruptCheckpoint("unsupported dtype for " + name);
    const auto& shape = entry.tensor->shape();
    if (ndim != shape.size()) throw CorruptCheckpoint("rank mismatch for " + name);
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (reader.u32() != static_cast<std::uint32_t>(shape[d])) {
        throw CorruptCheckpoint("shape mismatch for " + name);
      }
    }
    const std::size_t nbytes = entry.tensor->values().size() * sizeof(float);
    std::memcpy(entry.tensor->data(), reader.take(nbytes), nbytes);
    // Trainable flags are stored per tensor; unit flags are the prefix they
    // encode. Running stats are always stored 0, so only params vote.
    if (entry.is_param) {
      if (trainable) {
        prefix_open = false;
      } else if (prefix_open) {
        frozen_prefix = static_cast<int>(entry.unit) + 1;
      }
    }
  }
  if (!reader.at_end()) throw CorruptCheckpoint("trailing bytes in " + path);
  model.freeze_prefix(frozen_prefix);
  return model;
}

}  // namespace ecgdnn
