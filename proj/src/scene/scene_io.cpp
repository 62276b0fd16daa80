#include <cmath>
#include <fstream>

#include "json.hpp"

#include "jse/scene.hpp"

namespace jse {

using nlohmann::json;

namespace {

double to_ms(std::size_t samples, double fs) { return 1000.0 * static_cast<double>(samples) / fs; }
std::size_t from_ms(double ms, double fs) { return static_cast<std::size_t>(std::llround(ms * fs / 1000.0)); }

}  // namespace

void write_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const double fs = scene.config.sample_rate;
  write_wav(dir / "d.wav", scene.d, fs);
  write_wav(dir / "x.wav", scene.x, fs);
  write_wav(dir / "u.wav", scene.u, fs);
  write_wav(dir / "s_e.wav", scene.s_e, fs);
  write_wav(dir / "s_l.wav", scene.s_l, fs);
  write_wav(dir / "y.wav", scene.y, fs);
  write_wav(dir / "b.wav", scene.b, fs);

  const auto& c = scene.config;
  json manifest = {
      {"sample_rate", fs},
      {"M", scene.d.channels()},
      {"ser_db", c.ser_db},
      {"snr_db", c.snr_db},
      {"t_e_ms", c.t_e * 1000.0},
      {"seed", c.seed},
      {"clip_level", c.clip_level},
      {"period_len_s", c.period_len},
      {"room", {{"rt60", c.room.rt60},
                {"rir_length", c.room.rir_length},
                {"direct_delay", c.room.direct_delay},
                {"tail_gain", c.room.tail_gain},
                {"seed", c.room.seed},
                {"echo_rir_length", c.echo_rir_length}}},
  };
  json periods = json::array();
  for (const auto& p : scene.periods) {
    periods.push_back({{"start_ms", to_ms(p.start, fs)}, {"end_ms", to_ms(p.end, fs)}, {"label", to_string(p.label)}});
  }
  manifest["periods"] = periods;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
}

Scene read_scene(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("missing manifest.json in " + dir.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw InvalidInput("malformed manifest.json: " + std::string(e.what()));
  }

  Scene scene;
  try {
    auto& c = scene.config;
    c.sample_rate = manifest.at("sample_rate").get<double>();
    c.ser_db = manifest.at("ser_db").get<double>();
    c.snr_db = manifest.at("snr_db").get<double>();
    c.t_e = manifest.at("t_e_ms").get<double>() / 1000.0;
    c.seed = manifest.at("seed").get<std::uint64_t>();
    c.clip_level = manifest.value("clip_level", c.clip_level);
    c.period_len = manifest.value("period_len_s", c.period_len);
    c.room.num_mics = manifest.at("M").get<std::size_t>();
    if (manifest.contains("room")) {
      const auto& r = manifest["room"];
      c.room.rt60 = r.value("rt60", c.room.rt60);
      c.room.rir_length = r.value("rir_length", c.room.rir_length);
      c.room.direct_delay = r.value("direct_delay", c.room.direct_delay);
      c.room.tail_gain = r.value("tail_gain", c.room.tail_gain);
      c.room.seed = r.value("seed", c.room.seed);
      c.echo_rir_length = r.value("echo_rir_length", c.echo_rir_length);
    }
    for (const auto& p : manifest.at("periods")) {
      scene.periods.push_back({from_ms(p.at("start_ms").get<double>(), c.sample_rate),
                               from_ms(p.at("end_ms").get<double>(), c.sample_rate),
                               period_label_from_string(p.at("label").get<std::string>())});
    }
  } catch (const json::exception& e) {
    throw InvalidInput("manifest.json in " + dir.string() + ": " + e.what());
  }

  const double fs = scene.config.sample_rate;
  auto load = [&](const char* name) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) throw IoError("missing " + path.string());
    return read_wav(path, fs);
  };
  scene.d = load("d.wav");
  scene.x = load("x.wav");
  scene.s_e = load("s_e.wav");
  scene.s_l = load("s_l.wav");
  scene.y = load("y.wav");
  scene.b = load("b.wav");
  if (std::filesystem::exists(dir / "u.wav")) scene.u = load("u.wav");

  const std::size_t T = scene.d.samples();
  for (const Signal* s : {&scene.x, &scene.s_e, &scene.s_l, &scene.y, &scene.b}) {
    if (s->samples() != T) throw InvalidInput("scene signals in " + dir.string() + " have mismatched lengths");
  }
  if (scene.x.channels() != 1) throw InvalidInput("x.wav must be mono");
  return scene;
}

}  // namespace jse
