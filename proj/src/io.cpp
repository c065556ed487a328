#include "specref/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "specref/norms.hpp"

namespace specref {

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string& s;
  size_t pos = 0;
  void need(size_t n) const {
    if (pos + n > s.size())
      throw std::runtime_error("SFC1: truncated payload");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(s[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(s[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  uint8_t u8() {
    need(1);
    return uint8_t(s[pos++]);
  }
  double f64() {
    uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string out = s.substr(pos, n);
    pos += n;
    return out;
  }
};

}  // namespace

std::string encode_sfc1(const std::vector<Sfc1Array>& arrays) {
  std::string out = "SFC1";
  put_u32(out, 1);
  put_u32(out, static_cast<uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    put_u32(out, static_cast<uint32_t>(a.name.size()));
    out += a.name;
    out.push_back(a.complex_valued ? 2 : 1);
    out.push_back(char(a.dims.size()));
    for (auto d : a.dims) put_u64(out, d);
    if (a.complex_valued) {
      if (a.c128.size() != a.count())
        throw std::invalid_argument("SFC1: dims/payload mismatch for " + a.name);
      for (const auto& z : a.c128) {
        put_f64(out, z.real());
        put_f64(out, z.imag());
      }
    } else {
      if (a.f64.size() != a.count())
        throw std::invalid_argument("SFC1: dims/payload mismatch for " + a.name);
      for (double d : a.f64) put_f64(out, d);
    }
  }
  return out;
}

std::vector<Sfc1Array> decode_sfc1(const std::string& bytes) {
  Reader r{bytes};
  if (r.bytes(4) != "SFC1") throw std::runtime_error("SFC1: bad magic");
  uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("SFC1: unsupported version " + std::to_string(version));
  uint32_t count = r.u32();
  std::vector<Sfc1Array> arrays(count);
  for (auto& a : arrays) {
    uint32_t nlen = r.u32();
    a.name = r.bytes(nlen);
    uint8_t dtype = r.u8();
    if (dtype != 1 && dtype != 2)
      throw std::runtime_error("SFC1: unknown dtype " + std::to_string(dtype));
    a.complex_valued = dtype == 2;
    uint8_t ndim = r.u8();
    a.dims.resize(ndim);
    for (auto& d : a.dims) d = r.u64();
    size_t n = a.count();
    if (a.complex_valued) {
      a.c128.resize(n);
      for (auto& z : a.c128) {
        double re = r.f64();
        double im = r.f64();
        z = cplx{re, im};
      }
    } else {
      a.f64.resize(n);
      for (auto& d : a.f64) d = r.f64();
    }
  }
  for (size_t i = 0; i < arrays.size(); ++i)
    for (size_t j = i + 1; j < arrays.size(); ++j)
      if (arrays[i].name == arrays[j].name)
        throw std::runtime_error("SFC1: duplicate array name " + arrays[i].name);
  return arrays;
}

void write_sfc1(const std::string& path, const std::vector<Sfc1Array>& arrays) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  std::string bytes = encode_sfc1(arrays);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<Sfc1Array> read_sfc1(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_sfc1(ss.str());
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<RVec>& rows) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << header << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) f << ",";
      f << format_g17(row[i]);
    }
    f << "\n";
  }
}

namespace {

const std::map<std::string, std::vector<std::string>>& config_schema() {
  static const std::map<std::string, std::vector<std::string>> schema = {
      {"grid", {"n", "L"}},
      {"solver",
       {"scheme", "formulation", "dt", "nu", "drag", "t_end", "record_every"}},
      {"ic", {"kind", "seed", "kappa", "alpha", "tau", "k0", "normalize_energy"}},
      {"dataset",
       {"n_train", "n_test", "n_gen", "n_down", "burn_in", "ell", "n_t",
        "delta_t", "kappa_min", "kappa_max"}},
      {"model",
       {"layers", "d_v", "d_t", "tau_max", "k_max", "t_pad", "helmholtz",
        "formulation", "activation", "seed"}},
      {"train", {"epochs", "lr", "batch", "loss", "one_cycle", "weight_decay"}},
      {"finetune",
       {"iters", "lr", "gamma", "loss", "alpha", "mode", "tol", "iter_max",
        "include_reduction"}},
  };
  return schema;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  const auto& schema = config_schema();
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      if (!schema.count(section))
        throw std::invalid_argument("config: unknown section [" + section +
                                    "] at line " + std::to_string(lineno));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key=value at line " +
                                  std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw std::invalid_argument("config: key outside a section at line " +
                                  std::to_string(lineno));
    const auto& keys = schema.at(section);
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw std::invalid_argument("config: unknown key " + section + "." + key);
    cfg.kv_[section + "." + key] = value;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

int RunConfig::geti(const std::string& key, int def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : std::stoi(it->second);
}

double RunConfig::getd(const std::string& key, double def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : std::stod(it->second);
}

uint64_t RunConfig::getu(const std::string& key, uint64_t def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : std::stoull(it->second);
}

bool RunConfig::getb(const std::string& key, bool def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

std::string RunConfig::gets(const std::string& key, const std::string& def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

void save_dataset(const std::string& dir, const Dataset& ds,
                  const std::map<std::string, std::string>& meta) {
  std::filesystem::create_directories(dir);
  size_t plane = size_t(ds.n) * ds.n;
  size_t nt = ds.samples.size();
  Sfc1Array input, output, tin, tout;
  input.name = "input";
  input.dims = {nt, uint64_t(ds.ell), uint64_t(ds.n), uint64_t(ds.n)};
  output.name = "output";
  output.dims = {nt, uint64_t(ds.n_t), uint64_t(ds.n), uint64_t(ds.n)};
  tin.name = "times_in";
  tin.dims = {nt, uint64_t(ds.ell)};
  tout.name = "times_out";
  tout.dims = {nt, uint64_t(ds.n_t)};
  for (const auto& s : ds.samples) {
    input.f64.insert(input.f64.end(), s.input.begin(), s.input.end());
    output.f64.insert(output.f64.end(), s.output.begin(), s.output.end());
    tin.f64.insert(tin.f64.end(), s.times_in.begin(), s.times_in.end());
    tout.f64.insert(tout.f64.end(), s.times_out.begin(), s.times_out.end());
  }
  write_sfc1(dir + "/data.sfc", {input, output, tin, tout});

  std::ofstream f(dir + "/data.meta", std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write metadata in " + dir);
  std::map<std::string, std::string> all = meta;
  all["n"] = std::to_string(ds.n);
  all["ell"] = std::to_string(ds.ell);
  all["n_t"] = std::to_string(ds.n_t);
  all["L"] = format_g17(ds.L);
  all["delta_t"] = format_g17(ds.delta_t);
  all["nu"] = format_g17(ds.nu);
  std::string seeds;
  for (const auto& s : ds.samples)
    seeds += (seeds.empty() ? "" : ",") + std::to_string(s.seed);
  all["seeds"] = seeds;
  for (const auto& [k, v] : all) f << k << "=" << v << "\n";
  (void)plane;
}

std::map<std::string, std::string> load_meta(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open metadata: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = trim(line.substr(eq + 1));
  }
  return out;
}

Dataset load_dataset(const std::string& dir) {
  auto arrays = read_sfc1(dir + "/data.sfc");
  auto meta = load_meta(dir + "/data.meta");
  auto find = [&](const std::string& name) -> const Sfc1Array& {
    for (const auto& a : arrays)
      if (a.name == name) return a;
    throw std::runtime_error("dataset: missing array " + name);
  };
  const auto& input = find("input");
  const auto& output = find("output");
  const auto& tin = find("times_in");
  const auto& tout = find("times_out");
  Dataset ds;
  ds.n = static_cast<int>(input.dims[2]);
  ds.ell = static_cast<int>(input.dims[1]);
  ds.n_t = static_cast<int>(output.dims[1]);
  ds.L = std::stod(meta.at("L"));
  ds.delta_t = std::stod(meta.at("delta_t"));
  ds.nu = std::stod(meta.at("nu"));
  size_t count = input.dims[0];
  size_t in_block = input.count() / count;
  size_t out_block = output.count() / count;
  ds.samples.resize(count);
  for (size_t s = 0; s < count; ++s) {
    auto& smp = ds.samples[s];
    smp.input.assign(input.f64.begin() + s * in_block,
                     input.f64.begin() + (s + 1) * in_block);
    smp.output.assign(output.f64.begin() + s * out_block,
                      output.f64.begin() + (s + 1) * out_block);
    smp.times_in.assign(tin.f64.begin() + s * ds.ell,
                        tin.f64.begin() + (s + 1) * ds.ell);
    smp.times_out.assign(tout.f64.begin() + s * ds.n_t,
                         tout.f64.begin() + (s + 1) * ds.n_t);
  }
  return ds;
}

void save_model(const std::string& path, const StfnoModel& m) {
  std::vector<Sfc1Array> arrays;
  Sfc1Array cfg;
  cfg.name = "config";
  cfg.dims = {12};
  cfg.f64 = {double(m.cfg.layers), double(m.cfg.d_v), double(m.cfg.d_t),
             double(m.cfg.tau_max), double(m.cfg.k_max), m.cfg.t_pad,
             m.cfg.helmholtz ? 1.0 : 0.0,
             m.cfg.form == Formulation::vp ? 1.0 : 0.0,
             m.cfg.act == Activation::linear ? 1.0 : 0.0,
             double(m.cfg.n_train), m.cfg.L, double(m.cfg.seed)};
  arrays.push_back(std::move(cfg));
  for (const auto& name : m.order) {
    const auto& t = m.params.at(name);
    Sfc1Array a;
    a.name = name;
    a.complex_valued = true;
    for (int d : t.shape) a.dims.push_back(uint64_t(d));
    a.c128 = t.v;
    arrays.push_back(std::move(a));
  }
  write_sfc1(path, arrays);
}

StfnoModel load_model(const std::string& path) {
  auto arrays = read_sfc1(path);
  if (arrays.empty() || arrays[0].name != "config")
    throw std::runtime_error("model checkpoint: missing config block");
  const auto& c = arrays[0].f64;
  StfnoConfig cfg;
  cfg.layers = int(c[0]);
  cfg.d_v = int(c[1]);
  cfg.d_t = int(c[2]);
  cfg.tau_max = int(c[3]);
  cfg.k_max = int(c[4]);
  cfg.t_pad = c[5];
  cfg.helmholtz = c[6] != 0.0;
  cfg.form = c[7] != 0.0 ? Formulation::vp : Formulation::vs;
  cfg.act = c[8] != 0.0 ? Activation::linear : Activation::gelu;
  cfg.n_train = int(c[9]);
  cfg.L = c[10];
  cfg.seed = uint64_t(c[11]);
  StfnoModel m = make_model(cfg);
  for (size_t i = 1; i < arrays.size(); ++i) {
    const auto& a = arrays[i];
    auto it = m.params.find(a.name);
    if (it == m.params.end())
      throw std::runtime_error("model checkpoint: unknown parameter " + a.name);
    if (a.c128.size() != it->second.size())
      throw std::runtime_error("model checkpoint: shape mismatch for " + a.name);
    it->second.v = a.c128;
  }
  return m;
}

void write_estimator_csv(const std::string& path, const RVec& times,
                         const RVec& eta) {
  std::vector<RVec> rows;
  double acc = 0.0;
  for (size_t i = 0; i < eta.size(); ++i) {
    rows.push_back({times.size() == eta.size() ? times[i] : double(i), eta[i]});
    acc += eta[i] * eta[i];
  }
  rows.push_back({-1.0, std::sqrt(acc)});  // summary line: eta_total
  write_csv(path, "t_m,eta_m", rows);
}

void write_spectrum_csv(const std::string& path, const SpectrumCurve& c) {
  std::vector<RVec> rows;
  for (size_t i = 0; i < c.k_bins.size(); ++i)
    rows.push_back({c.k_bins[i], c.values[i]});
  write_csv(path, "k,value", rows);
}

}  // namespace specref
