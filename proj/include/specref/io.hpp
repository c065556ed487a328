#pragma once

#include <map>
#include <string>

#include "specref/datagen.hpp"
#include "specref/norms.hpp"
#include "specref/stfno.hpp"

namespace specref {

// SFC1: a little binary container for named n-d arrays, fixed little-endian
// layout. Header: "SFC1" | u32 version=1 | u32 array count. Each block:
// u32 name length | name bytes | u8 dtype (1=f64, 2=c128) | u8 ndim |
// ndim x u64 dims | row-major payload.
struct Sfc1Array {
  std::string name;
  bool complex_valued = false;
  std::vector<uint64_t> dims;
  RVec f64;
  CVec c128;

  size_t count() const {
    size_t n = 1;
    for (auto d : dims) n *= static_cast<size_t>(d);
    return n;
  }
};

void write_sfc1(const std::string& path, const std::vector<Sfc1Array>& arrays);
std::vector<Sfc1Array> read_sfc1(const std::string& path);

// Encoding to bytes (used by the round-trip and fixture tests).
std::string encode_sfc1(const std::vector<Sfc1Array>& arrays);
std::vector<Sfc1Array> decode_sfc1(const std::string& bytes);

// CSV with '.' decimals, '\n' endings, 17 significant digits.
void write_csv(const std::string& path, const std::string& header,
               const std::vector<RVec>& rows);
std::string format_g17(double v);

// Plain-text key=value configuration with [section] headers; keys are
// validated against the known schema and unknown keys are rejected.
class RunConfig {
 public:
  static RunConfig load(const std::string& path);
  static RunConfig parse(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  int geti(const std::string& key, int def) const;
  double getd(const std::string& key, double def) const;
  uint64_t getu(const std::string& key, uint64_t def) const;
  bool getb(const std::string& key, bool def) const;
  std::string gets(const std::string& key, const std::string& def) const;

 private:
  std::map<std::string, std::string> kv_;  // "section.key" -> value
};

// Dataset container + sidecar metadata.
void save_dataset(const std::string& dir, const Dataset& ds,
                  const std::map<std::string, std::string>& meta);
Dataset load_dataset(const std::string& dir);
std::map<std::string, std::string> load_meta(const std::string& path);

// Model checkpoints: one c128 array per parameter (in model order) plus the
// scalar config fields; the container's name blocks double as the manifest.
void save_model(const std::string& path, const StfnoModel& m);
StfnoModel load_model(const std::string& path);

void write_estimator_csv(const std::string& path, const RVec& times,
                         const RVec& eta);
void write_spectrum_csv(const std::string& path, const SpectrumCurve& c);

}  // namespace specref
