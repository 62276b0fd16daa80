#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <vector>

#include "jse/config.hpp"
#include "seed.hpp"

namespace jse {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw InvalidInput("config: " + key + " expects a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw InvalidInput("config: " + key + " expects a nonnegative integer, got '" + v + "'");
  }
  return out;
}

/// "[a, b]", "a, b" or "none".
std::optional<std::pair<double, double>> to_range(const std::string& key, std::string v) {
  if (v == "none") return std::nullopt;
  if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  const auto comma = v.find(',');
  if (comma == std::string::npos) throw InvalidInput("config: " + key + " expects [min, max]");
  const double lo = to_double(key, trim(v.substr(0, comma))), hi = to_double(key, trim(v.substr(comma + 1)));
  if (lo > hi) throw InvalidInput("config: " + key + " has min > max");
  return std::pair{lo, hi};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_range(const std::optional<std::pair<double, double>>& r) {
  return r ? "[" + fmt(r->first) + ", " + fmt(r->second) + "]" : "none";
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define JSE_NUM(key, member)                                                                              \
  {key,                                                                                                   \
   {[](RunConfig& c, const std::string& v) { c.member = to_double(key, v); },                             \
    [](const RunConfig& c) { return fmt(static_cast<double>(c.member)); }}}
#define JSE_UINT(key, member, type)                                                                       \
  {key,                                                                                                   \
   {[](RunConfig& c, const std::string& v) { c.member = static_cast<type>(to_uint(key, v)); },            \
    [](const RunConfig& c) { return std::to_string(c.member); }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      JSE_NUM("scene.ser_db", scene.ser_db),
      JSE_NUM("scene.snr_db", scene.snr_db),
      JSE_NUM("scene.clip_level", scene.clip_level),
      JSE_NUM("scene.t_e", scene.t_e),
      JSE_NUM("scene.period_len", scene.period_len),
      JSE_NUM("scene.sample_rate", scene.sample_rate),
      JSE_UINT("scene.echo_rir_length", scene.echo_rir_length, std::size_t),
      {"scene.ser_range",
       {[](RunConfig& c, const std::string& v) { c.ser_range = to_range("scene.ser_range", v); },
        [](const RunConfig& c) { return fmt_range(c.ser_range); }}},
      {"scene.snr_range",
       {[](RunConfig& c, const std::string& v) { c.snr_range = to_range("scene.snr_range", v); },
        [](const RunConfig& c) { return fmt_range(c.snr_range); }}},
      JSE_NUM("room.rt60", scene.room.rt60),
      JSE_UINT("room.rir_length", scene.room.rir_length, std::size_t),
      JSE_UINT("room.num_mics", scene.room.num_mics, std::size_t),
      JSE_UINT("room.direct_delay", scene.room.direct_delay, std::size_t),
      JSE_NUM("room.tail_gain", scene.room.tail_gain),
      JSE_UINT("pipeline.echo_taps", pipeline.echo_taps, std::size_t),
      JSE_UINT("pipeline.dereverb_taps", pipeline.dereverb_taps, std::size_t),
      JSE_UINT("pipeline.delay", pipeline.delay, std::size_t),
      JSE_UINT("pipeline.iterations", pipeline.iterations, int),
      JSE_UINT("pipeline.wpe_iterations", pipeline.wpe_iterations, int),
      JSE_UINT("pipeline.window_length", pipeline.window.length, std::size_t),
      JSE_UINT("pipeline.window_hop", pipeline.window.hop, std::size_t),
      JSE_NUM("pipeline.eps", pipeline.eps),
      {"pipeline.topology",
       {[](RunConfig& c, const std::string& v) { c.pipeline.topology = topology_from_string(v); },
        [](const RunConfig& c) { return to_string(c.pipeline.topology); }}},
      {"pipeline.psd_provider",
       {[](RunConfig& c, const std::string& v) { c.pipeline.provider = ProviderSpec::parse(v); },
        [](const RunConfig& c) { return c.pipeline.provider.to_string(); }}},
      JSE_NUM("aec.step", pipeline.aec.step_base),
      JSE_UINT("aec.passes", pipeline.aec.passes, int),
      JSE_UINT("aec.taps", pipeline.aec.taps, std::size_t),
      JSE_NUM("aec.coherence_smoothing", pipeline.aec.coherence_smoothing),
      JSE_UINT("run.seed", seed, std::uint64_t),
      JSE_UINT("run.count", count, std::size_t),
      JSE_UINT("run.workers", workers, std::size_t),
      {"run.out",
       {[](RunConfig& c, const std::string& v) { c.out = v; }, [](const RunConfig& c) { return c.out; }}},
  };
  return table;
}

#undef JSE_NUM
#undef JSE_UINT

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw InvalidInput("config: unknown key '" + key + "'");
  it->second.set(*this, unquote(trim(value)));
}

std::map<std::string, std::string> RunConfig::entries() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out[key] = field.get(*this);
  return out;
}

void RunConfig::validate() const {
  scene.validate();
  pipeline.validate();
  if (count < 1) throw InvalidInput("config: run.count must be >= 1");
  for (const auto* r : {&ser_range, &snr_range}) {
    if (*r && (*r)->first > (*r)->second) throw InvalidInput("config: range with min > max");
  }
  if (out.empty()) throw InvalidInput("config: run.out must not be empty");
}

SceneConfig RunConfig::scene_config(std::size_t index) const {
  SceneConfig sc = scene;
  sc.seed = mix_seed(seed, index);
  sc.room.seed = sc.seed;
  std::mt19937_64 rng(mix_seed(sc.seed, 0x5e7));
  if (ser_range) sc.ser_db = std::uniform_real_distribution<double>(ser_range->first, ser_range->second)(rng);
  if (snr_range) sc.snr_db = std::uniform_real_distribution<double>(snr_range->first, snr_range->second)(rng);
  return sc;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InvalidInput("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    try {
      cfg.set(full, line.substr(eq + 1));
    } catch (const InvalidInput& e) {
      throw InvalidInput("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

}  // namespace jse
