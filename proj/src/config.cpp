#include "astgin/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "astgin/error.hpp"

namespace astgin::config {

using nlohmann::json;

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename V>
void read(const json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + (where.empty() ? std::string(key) : where + "." + key) + "' has the wrong type");
  }
}

int horizon_minutes(std::size_t steps) { return static_cast<int>(steps) * ingest::TimeGrid::kStepMinutes; }

}  // namespace

std::size_t horizon_steps(int minutes) {
  if (minutes != 30 && minutes != 60 && minutes != 90 && minutes != 120)
    throw ValidationError("horizon must be 30, 60, 90 or 120 minutes, got " + std::to_string(minutes));
  return static_cast<std::size_t>(minutes / ingest::TimeGrid::kStepMinutes);
}

void validate(const RunConfig& c) {
  if (c.model.horizon < 1 || c.model.horizon > 4) throw ValidationError("horizon must map to 1..4 steps");
  if (!c.model.gcn.hidden_dims.empty() && c.model.gcn.hidden_dims.back() != c.model.informer.d_model)
    throw ValidationError("gcn.hidden_dims must end in informer.d_model (" + std::to_string(c.model.informer.d_model) +
                          ")");
  model::finalize(c.model);
  trainer::validate(c.train);
  synth::validate(c.synth);
  const auto& r = c.split;
  if (r.train < 0 || r.val < 0 || r.test < 0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
    throw ValidationError("split ratios must be >= 0 and sum to 1");
}

RunConfig parse(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  only_keys(j, "", {"data_dir", "distance_csv", "window", "horizon_minutes", "ablation", "split", "graph", "gcn",
                    "informer", "train", "synth"});
  RunConfig c;
  read(j, "data_dir", c.data_dir, "");
  read(j, "distance_csv", c.distance_csv, "");
  read(j, "window", c.model.window, "");
  if (j.contains("horizon_minutes")) {
    int minutes = 30;
    read(j, "horizon_minutes", minutes, "");
    c.model.horizon = horizon_steps(minutes);
  }
  if (j.contains("ablation")) {
    std::string a;
    read(j, "ablation", a, "");
    c.model.ablation = model::parse_ablation(a);
  }
  if (j.contains("split")) {
    const json& s = j["split"];
    only_keys(s, "split", {"train", "val", "test", "mode"});
    read(s, "train", c.split.train, "split");
    read(s, "val", c.split.val, "split");
    read(s, "test", c.split.test, "split");
    if (s.contains("mode")) {
      std::string mode;
      read(s, "mode", mode, "split");
      if (mode == "random") c.split_mode = ingest::SplitMode::random;
      else if (mode == "chronological") c.split_mode = ingest::SplitMode::chronological;
      else throw ValidationError("config: split.mode must be 'random' or 'chronological'");
    }
  }
  if (j.contains("graph")) {
    const json& g = j["graph"];
    only_keys(g, "graph", {"sigma", "kappa"});
    read(g, "sigma", c.graph.sigma, "graph");
    read(g, "kappa", c.graph.kappa, "graph");
  }
  if (j.contains("informer")) {
    const json& i = j["informer"];
    only_keys(i, "informer", {"d_model", "n_heads", "encoder_layers", "decoder_layers", "d_ff", "sampling_factor",
                              "label_len", "distilling", "dropout", "ln_eps", "sample_seed"});
    auto& f = c.model.informer;
    read(i, "d_model", f.d_model, "informer");
    read(i, "n_heads", f.n_heads, "informer");
    read(i, "encoder_layers", f.encoder_layers, "informer");
    read(i, "decoder_layers", f.decoder_layers, "informer");
    read(i, "d_ff", f.d_ff, "informer");
    read(i, "sampling_factor", f.sampling_factor, "informer");
    read(i, "label_len", f.label_len, "informer");
    read(i, "distilling", f.distilling, "informer");
    read(i, "dropout", f.dropout, "informer");
    read(i, "ln_eps", f.ln_eps, "informer");
    read(i, "sample_seed", f.sample_seed, "informer");
  }
  auto& g = c.model.gcn;
  g.hidden_dims = {64, 64, c.model.informer.d_model};
  if (j.contains("gcn")) {
    const json& gj = j["gcn"];
    only_keys(gj, "gcn", {"hidden_dims", "activations", "bias"});
    read(gj, "hidden_dims", g.hidden_dims, "gcn");
    if (gj.contains("activations")) {
      std::vector<std::string> names;
      read(gj, "activations", names, "gcn");
      g.activations.clear();
      for (const auto& n : names) g.activations.push_back(gcn::parse_activation(n));
    }
    read(gj, "bias", g.bias, "gcn");
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    only_keys(t, "train", {"batch_size", "epochs", "lr0", "lr_decay", "lr_decay_every", "lambda", "patience", "seed",
                           "checked", "threads"});
    auto& tc = c.train;
    read(t, "batch_size", tc.batch_size, "train");
    read(t, "epochs", tc.epochs, "train");
    read(t, "lr0", tc.lr0, "train");
    read(t, "lr_decay", tc.lr_decay, "train");
    read(t, "lr_decay_every", tc.lr_decay_every, "train");
    read(t, "lambda", tc.lambda, "train");
    read(t, "patience", tc.patience, "train");
    read(t, "seed", tc.seed, "train");
    read(t, "checked", tc.checked, "train");
    read(t, "threads", tc.threads, "train");
  }
  if (j.contains("synth")) {
    const json& s = j["synth"];
    only_keys(s, "synth", {"n_stations", "days", "seed", "base_level", "daily_amplitude", "weather_effect",
                           "poi_phase_shift", "spatial_smoothing", "noise_std", "radius_km"});
    auto& sc = c.synth;
    read(s, "n_stations", sc.n_stations, "synth");
    read(s, "days", sc.days, "synth");
    read(s, "seed", sc.seed, "synth");
    read(s, "base_level", sc.base_level, "synth");
    read(s, "daily_amplitude", sc.daily_amplitude, "synth");
    read(s, "weather_effect", sc.weather_effect, "synth");
    read(s, "poi_phase_shift", sc.poi_phase_shift, "synth");
    read(s, "spatial_smoothing", sc.spatial_smoothing, "synth");
    read(s, "noise_std", sc.noise_std, "synth");
    read(s, "radius_km", sc.radius_km, "synth");
  }
  validate(c);
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string to_json(const RunConfig& c) {
  const auto& f = c.model.informer;
  const auto& g = c.model.gcn;
  const auto& t = c.train;
  const auto& s = c.synth;
  std::vector<std::string> acts;
  for (auto a : g.activations) acts.push_back(gcn::to_string(a));
  json j{
      {"data_dir", c.data_dir},
      {"distance_csv", c.distance_csv},
      {"window", c.model.window},
      {"horizon_minutes", horizon_minutes(c.model.horizon)},
      {"ablation", model::to_string(c.model.ablation)},
      {"split",
       {{"train", c.split.train},
        {"val", c.split.val},
        {"test", c.split.test},
        {"mode", c.split_mode == ingest::SplitMode::random ? "random" : "chronological"}}},
      {"graph", {{"sigma", c.graph.sigma}, {"kappa", c.graph.kappa}}},
      {"gcn", {{"hidden_dims", g.hidden_dims}, {"activations", acts}, {"bias", g.bias}}},
      {"informer",
       {{"d_model", f.d_model},
        {"n_heads", f.n_heads},
        {"encoder_layers", f.encoder_layers},
        {"decoder_layers", f.decoder_layers},
        {"d_ff", f.d_ff},
        {"sampling_factor", f.sampling_factor},
        {"label_len", f.label_len},
        {"distilling", f.distilling},
        {"dropout", f.dropout},
        {"ln_eps", f.ln_eps},
        {"sample_seed", f.sample_seed}}},
      {"train",
       {{"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"lr0", t.lr0},
        {"lr_decay", t.lr_decay},
        {"lr_decay_every", t.lr_decay_every},
        {"lambda", t.lambda},
        {"patience", t.patience},
        {"seed", t.seed},
        {"checked", t.checked},
        {"threads", t.threads}}},
      {"synth",
       {{"n_stations", s.n_stations},
        {"days", s.days},
        {"seed", s.seed},
        {"base_level", s.base_level},
        {"daily_amplitude", s.daily_amplitude},
        {"weather_effect", s.weather_effect},
        {"poi_phase_shift", s.poi_phase_shift},
        {"spatial_smoothing", s.spatial_smoothing},
        {"noise_std", s.noise_std},
        {"radius_km", s.radius_km}}}};
  return j.dump(2);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(config))));
  return buf;
}

}  // namespace astgin::config
