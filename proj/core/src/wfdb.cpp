#include "ecgdnn/wfdb.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"

namespace ecgdnn {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

double parse_number(const std::string& tok, const char* what) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw MalformedHeader(std::string("trailing junk in ") + what + ": " + tok);
    return v;
  } catch (const MalformedHeader&) {
    throw;
  } catch (...) {
    throw MalformedHeader(std::string("non-numeric ") + what + ": " + tok);
  }
}

long parse_int(const std::string& tok, const char* what) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw MalformedHeader(std::string("non-integer ") + what + ": " + tok);
  }
  return v;
}

// Parses the "gain(baseline)/units" field. Any of the three parts may be
// absent: "1000", "1000/mV", "1000(12)", "1000(12)/mV" are all valid.
void parse_gain_field(const std::string& tok, WfdbSignalSpec& sig, bool& baseline_given) {
  std::string rest = tok;
  std::string units;
  if (auto slash = rest.find('/'); slash != std::string::npos) {
    units = rest.substr(slash + 1);
    rest = rest.substr(0, slash);
  }
  std::string baseline_str;
  if (auto open = rest.find('('); open != std::string::npos) {
    auto close = rest.find(')', open);
    if (close == std::string::npos) throw MalformedHeader("unterminated baseline in: " + tok);
    baseline_str = rest.substr(open + 1, close - open - 1);
    rest = rest.substr(0, open);
  }
  if (!rest.empty()) {
    sig.gain = parse_number(rest, "gain");
    if (sig.gain == 0.0) throw MalformedHeader("gain must be nonzero");
  }
  if (!baseline_str.empty()) {
    sig.baseline = static_cast<int>(parse_int(baseline_str, "baseline"));
    baseline_given = true;
  }
  if (!units.empty()) sig.units = units;
}

std::string format_double(double v) {
  // Canonical shortest form: integral values render without a decimal point.
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

WfdbHeader parse_wfdb_header(const std::string& text) {
  WfdbHeader header;
  std::vector<std::string> lines;
  for (auto& line : split_lines(text)) {
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw MalformedHeader("empty header");

  const auto record = tokenize(lines[0]);
  if (record.size() < 4) throw MalformedHeader("record line needs name/nsig/fs/nsamp");
  header.record_name = record[0];
  header.num_signals = static_cast<int>(parse_int(record[1], "signal count"));
  header.sampling_rate = parse_number(record[2], "sampling rate");
  header.num_samples = parse_int(record[3], "sample count");
  if (header.num_signals < 1) throw MalformedHeader("signal count must be >= 1");
  if (header.sampling_rate <= 0) throw MalformedHeader("sampling rate must be > 0");
  if (header.num_samples < 0) throw MalformedHeader("sample count must be >= 0");

  if (lines.size() < static_cast<std::size_t>(header.num_signals) + 1) {
    throw MalformedHeader("missing signal lines");
  }
  for (int i = 0; i < header.num_signals; ++i) {
    const auto tokens = tokenize(lines[1 + static_cast<std::size_t>(i)]);
    if (tokens.size() < 2) throw MalformedHeader("signal line needs file and format");
    WfdbSignalSpec sig;
    sig.file_name = tokens[0];
    sig.format = static_cast<int>(parse_int(tokens[1], "format code"));
    if (sig.format != 16) {
      throw UnsupportedFormat("unsupported signal format " + tokens[1] + " (only 16)");
    }
    bool baseline_given = false;
    if (tokens.size() > 2) parse_gain_field(tokens[2], sig, baseline_given);
    if (tokens.size() > 3) sig.adc_resolution = static_cast<int>(parse_int(tokens[3], "adc resolution"));
    if (tokens.size() > 4) sig.adc_zero = static_cast<int>(parse_int(tokens[4], "adc zero"));
    if (!baseline_given) sig.baseline = sig.adc_zero;
    header.signals.push_back(std::move(sig));
  }
  return header;
}

PhysicalRecord read_wfdb_signals(const WfdbHeader& header, const std::vector<std::uint8_t>& dat) {
  const std::size_t nsig = static_cast<std::size_t>(header.num_signals);
  const std::size_t nsamp = static_cast<std::size_t>(header.num_samples);
  const std::size_t expected = nsig * nsamp * 2;
  if (dat.size() < expected) {
    throw TruncatedData("dat stream has " + std::to_string(dat.size()) + " bytes, expected " +
                        std::to_string(expected));
  }
  if (dat.size() > expected) {
    throw LengthMismatch("dat stream has " + std::to_string(dat.size() - expected) +
                         " trailing bytes");
  }

  PhysicalRecord rec;
  rec.record_id = header.record_name;
  rec.sampling_rate = header.sampling_rate;
  rec.signals.assign(nsig, std::vector<double>(nsamp));
  const std::uint8_t* p = dat.data();
  for (std::size_t i = 0; i < nsamp; ++i) {
    for (std::size_t s = 0; s < nsig; ++s) {
      const std::uint16_t raw = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
      const std::int16_t digital = static_cast<std::int16_t>(raw);
      const auto& spec = header.signals[s];
      rec.signals[s][i] = (static_cast<double>(digital) - spec.baseline) / spec.gain;
      p += 2;
    }
  }
  return rec;
}

WfdbFilePair write_wfdb_record(const PhysicalRecord& rec, const std::vector<double>& gain,
                               const std::vector<int>& baseline) {
  const std::size_t nsig = rec.signals.size();
  if (nsig == 0) throw LengthMismatch("record has no signals");
  if (gain.size() != nsig || baseline.size() != nsig) {
    throw LengthMismatch("gain/baseline count does not match signal count");
  }
  const std::size_t nsamp = rec.signals[0].size();
  for (const auto& lead : rec.signals) {
    if (lead.size() != nsamp) throw LengthMismatch("leads differ in length");
  }

  WfdbFilePair out;
  std::ostringstream hea;
  hea << rec.record_id << ' ' << nsig << ' ' << format_double(rec.sampling_rate) << ' '
      << nsamp << '\n';
  for (std::size_t s = 0; s < nsig; ++s) {
    if (gain[s] == 0.0) throw MalformedHeader("gain must be nonzero");
    hea << rec.record_id << ".dat 16 " << format_double(gain[s]) << '(' << baseline[s]
        << ")/mV 16 0\n";
  }
  out.header_text = hea.str();

  out.dat.resize(nsig * nsamp * 2);
  std::uint8_t* p = out.dat.data();
  for (std::size_t i = 0; i < nsamp; ++i) {
    for (std::size_t s = 0; s < nsig; ++s) {
      const double scaled = rec.signals[s][i] * gain[s] + baseline[s];
      const double rounded = std::nearbyint(scaled);  // round half to even
      if (!(rounded >= -32768.0 && rounded <= 32767.0)) {
        throw RangeOverflow("sample " + std::to_string(i) + " lead " + std::to_string(s) +
                            " digital value " + std::to_string(rounded) + " outside int16");
      }
      const std::int16_t digital = static_cast<std::int16_t>(rounded);
      const std::uint16_t raw = static_cast<std::uint16_t>(digital);
      p[0] = static_cast<std::uint8_t>(raw & 0xFF);
      p[1] = static_cast<std::uint8_t>(raw >> 8);
      p += 2;
    }
  }
  return out;
}

PhysicalRecord read_wfdb_record(const std::string& path_without_ext) {
  const auto header = parse_wfdb_header(read_text_file(path_without_ext + ".hea"));
  std::filesystem::path dat_path(path_without_ext + ".dat");
  if (!header.signals.empty() && !header.signals[0].file_name.empty()) {
    dat_path = std::filesystem::path(path_without_ext).parent_path() / header.signals[0].file_name;
  }
  return read_wfdb_signals(header, read_binary_file(dat_path.string()));
}

void write_wfdb_files(const std::string& path_without_ext, const PhysicalRecord& rec,
                      const std::vector<double>& gain, const std::vector<int>& baseline) {
  const auto pair = write_wfdb_record(rec, gain, baseline);
  write_text_file(path_without_ext + ".hea", pair.header_text);
  write_binary_file(path_without_ext + ".dat", pair.dat.data(), pair.dat.size());
}

}  // namespace ecgdnn
