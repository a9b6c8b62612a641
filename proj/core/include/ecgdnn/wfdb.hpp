#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ecgdnn {

// WFDB format-16 subset.
//
// Header (.hea), line oriented ASCII:
//   record line:  <name> <nsig> <fs> <nsamp> [ignored extras]
//   signal lines: <file> <format> [gain[(baseline)][/units]] [adcres] [adczero] [...]
//   '#'-prefixed lines and blank lines are ignored.
// Only format 16 is accepted. Defaults follow the WFDB convention: a missing
// gain field defaults to 200 ADC units/mV; a missing baseline defaults to the
// ADC zero, which itself defaults to 0. An explicit gain of 0 is rejected.
//
// Samples (.dat, format 16): little-endian two's-complement 16-bit,
// interleaved by sample frame (s0[i], s1[i], ..., s_{nsig-1}[i]).
// Physical value (mV): (digital - baseline) / gain.

struct WfdbSignalSpec {
  std::string file_name;
  int format = 16;
  double gain = 200.0;      // ADC units per mV
  int baseline = 0;         // ADC units
  std::string units = "mV";
  int adc_resolution = 16;  // bits
  int adc_zero = 0;
};

struct WfdbHeader {
  std::string record_name;
  int num_signals = 0;
  double sampling_rate = 0.0;  // Hz
  std::int64_t num_samples = 0;
  std::vector<WfdbSignalSpec> signals;
};

/// 12-lead signal in millivolts. `signals[lead][sample]`. Lead count other
/// than 12 can be represented (the parser is general) but is rejected at the
/// manifest/pipeline boundary.
struct PhysicalRecord {
  std::string record_id;
  std::vector<std::vector<double>> signals;
  double sampling_rate = 0.0;

  std::int64_t num_samples() const {
    return signals.empty() ? 0 : static_cast<std::int64_t>(signals[0].size());
  }
  double duration_s() const {
    return sampling_rate > 0 ? static_cast<double>(num_samples()) / sampling_rate : 0.0;
  }
};

/// Parses header text. Throws MalformedHeader or UnsupportedFormat.
WfdbHeader parse_wfdb_header(const std::string& text);

/// Decodes a .dat byte stream against its header. Throws TruncatedData when
/// the stream is shorter than nsig*nsamp*2 bytes, LengthMismatch when longer.
PhysicalRecord read_wfdb_signals(const WfdbHeader& header,
                                 const std::vector<std::uint8_t>& dat);

struct WfdbFilePair {
  std::string header_text;
  std::vector<std::uint8_t> dat;
};

/// Encodes a record with per-lead gain/baseline. Digital values are
/// round-half-to-even of mV*gain + baseline; throws RangeOverflow if any
/// falls outside int16. The emitted header is canonical, so re-writing a
/// just-read pair reproduces it byte for byte.
WfdbFilePair write_wfdb_record(const PhysicalRecord& rec,
                               const std::vector<double>& gain,
                               const std::vector<int>& baseline);

/// Convenience: reads `<path>.hea` + `<path>.dat` from disk.
PhysicalRecord read_wfdb_record(const std::string& path_without_ext);

/// Convenience: writes `<path>.hea` + `<path>.dat`.
void write_wfdb_files(const std::string& path_without_ext, const PhysicalRecord& rec,
                      const std::vector<double>& gain, const std::vector<int>& baseline);

}  // namespace ecgdnn
