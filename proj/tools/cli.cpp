#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "astgin/a2unit.hpp"
#include "astgin/config.hpp"
#include "astgin/csv.hpp"
#include "astgin/dataset.hpp"
#include "astgin/error.hpp"
#include "astgin/gradcheck_suite.hpp"
#include "astgin/graph.hpp"
#include "astgin/model.hpp"
#include "astgin/nn/params.hpp"
#include "astgin/synth.hpp"
#include "astgin/trainer.hpp"

namespace astgin::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::string data;
  std::string out;
  std::string ablation;
  int horizon = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> threads;
};

struct Options {
  Overrides run;
  // ingest
  std::string sessions, weather, poi, connectors;
  // graph
  double sigma = 0.0, kappa = 0.0;
  std::string distance;
  // evaluate / forecast / perturb
  std::string checkpoint;
  bool dump_attention = false;
  std::optional<std::size_t> dump_sample;
  bool clamp = false;
  std::vector<double> sigmas{0.0, 0.01, 0.05, 0.1};
  std::uint64_t perturb_seed = 0;
  // synth
  std::optional<std::size_t> stations, days;
  std::optional<double> weather_effect, noise_std;
  bool raw = false;
  // gradcheck
  std::size_t gc_seeds = 20;
  std::string gc_filter;
};

class Manifest {
 public:
  Manifest(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {}

  void write(const std::string& name, const std::string& content) {
    csv::write_text_file(dir_ / name, content);
    add(name);
  }
  void add(const std::string& name) {
    if (std::find(artifacts_.begin(), artifacts_.end(), name) == artifacts_.end()) artifacts_.push_back(name);
  }
  void finish(const std::string& config_hash) const {
    json j{{"command", command_}, {"artifacts", artifacts_}, {"config_hash", config_hash}};
    csv::write_text_file(dir_ / "manifest.json", j.dump(2) + "\n");
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::string command_;
  std::vector<std::string> artifacts_;
};

fs::path require_out(const Overrides& o) {
  if (o.out.empty()) throw ValidationError("--out is required");
  return o.out;
}

config::RunConfig resolve_config(const Overrides& o) {
  config::RunConfig c = o.config.empty() ? config::parse("{}") : config::load(o.config);
  if (!o.data.empty()) c.data_dir = o.data;
  if (!o.ablation.empty()) c.model.ablation = model::parse_ablation(o.ablation);
  if (o.horizon != 0) c.model.horizon = config::horizon_steps(o.horizon);
  if (o.seed) c.train.seed = *o.seed;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.threads) c.train.threads = *o.threads;
  config::validate(c);
  return c;
}

dataset::Dataset load_data(const config::RunConfig& c) {
  if (c.data_dir.empty()) throw ValidationError("no dataset directory: set data_dir in the config or pass --data");
  return dataset::load(c.data_dir);
}

graph::StationGraph graph_for(const config::RunConfig& c, const dataset::Dataset& d) {
  std::optional<fs::path> dist;
  if (!c.distance_csv.empty()) dist = c.distance_csv;
  return dataset::build_graph(d, c.graph, dist);
}

dataset::Splits splits_for(const config::RunConfig& c, const dataset::Dataset& d) {
  return dataset::prepare(d, c.model.window, c.model.horizon, model::attribute_mode(c.model.ablation), c.split,
                          c.train.seed, c.split_mode);
}

model::AstGin<float> load_model(const config::RunConfig& c, const Matrix& a_hat, const std::string& checkpoint) {
  if (checkpoint.empty()) throw ValidationError("--checkpoint is required");
  return model::AstGin<float>(c.model, a_hat, nn::load_checkpoint<float>(checkpoint));
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(6) << v;
  return ss.str();
}

void print_metrics(std::ostream& out, const std::string& label, const metrics::MetricsReport& r) {
  out << label << ": rmse=" << fmt(r.rmse) << " mae=" << fmt(r.mae) << " accuracy=" << fmt(r.accuracy)
      << " r2=" << fmt(r.r2) << " var=" << fmt(r.var_score) << " n=" << r.n_points << "\n";
}

json metrics_json(const metrics::MetricsReport& r) { return json::parse(trainer::to_json(r)); }

int cmd_ingest(const Options& o, std::ostream& out) {
  const fs::path dir = require_out(o.run);
  dataset::IngestReport report;
  const dataset::Dataset d = dataset::ingest_files({o.sessions, o.weather, o.poi, o.connectors}, report);
  dataset::save(d, dir);
  Manifest m(dir, "ingest");
  for (const char* f : {"stations.csv", "availability.csv", "weather.csv", "static.csv"}) m.add(f);
  m.write("ingest_report.json", dataset::to_json(report) + "\n");
  std::string inputs;
  for (const auto& p : {o.sessions, o.weather, o.poi, o.connectors}) inputs += p + "\n";
  m.finish(config::config_hash(config::parse("{}")) + ":" + std::to_string(config::fnv1a(inputs)));
  out << "stations: " << report.stations << "\nsessions: " << report.sessions << " (slow " << report.slow << ", fast "
      << report.fast << ", rapid " << report.rapid << ")\nskipped rows: " << report.skipped.size()
      << "\nclamped windows: " << report.clamps << "\nsteps: " << report.steps << "\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  return 0;
}

int cmd_graph(const Options& o, std::ostream& out) {
  config::RunConfig c = resolve_config(o.run);
  if (o.sigma > 0) c.graph.sigma = o.sigma;
  if (o.kappa > 0) c.graph.kappa = o.kappa;
  if (!o.distance.empty()) c.distance_csv = o.distance;
  const fs::path dir = require_out(o.run);
  const auto d = load_data(c);
  const auto g = graph_for(c, d);
  graph::export_graph(g, dir);
  Manifest m(dir, "graph");
  for (const char* f : {"distance.csv", "adjacency.csv", "adjacency_normalized.csv"}) m.add(f);
  m.finish(config::config_hash(c));
  out << "stations: " << g.size() << "\nsigma: " << g.sigma << "\nkappa: " << g.kappa << "\n";
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  const config::RunConfig c = resolve_config(o.run);
  const fs::path dir = require_out(o.run);
  const auto d = load_data(c);
  const auto g = graph_for(c, d);
  const auto s = splits_for(c, d);
  model::AstGin<float> net(c.model, g.normalized, c.train.seed);
  trainer::TrainReport report = trainer::train(net, s.train, s.val, c.train, [&](const trainer::EpochRecord& e) {
    out << "epoch " << e.epoch << " lr=" << e.lr << " train_mse=" << fmt(e.train_loss) << " val_mse=" << fmt(e.val_loss)
        << "\n";
  });
  if (!s.test.empty()) {
    report.test_metrics = trainer::evaluate(net, s.test, c.train.threads);
    report.has_test = true;
  }
  Manifest m(dir, "train");
  nn::save_checkpoint(net.params(), dir / "checkpoint.bin");
  m.add("checkpoint.bin");
  m.write("train_report.json", trainer::to_json(report) + "\n");
  m.write("config.json", config::to_json(c) + "\n");
  if (!s.test.empty()) {
    json b;
    for (const auto& [name, r] : trainer::baselines(s.train, s.test, d.availability.grid)) b[name] = metrics_json(r);
    m.write("baselines.json", b.dump(2) + "\n");
  }
  m.finish(config::config_hash(c));
  out << "ablation: " << report.ablation << "\nbest epoch: " << report.best_epoch << "\n";
  if (report.has_test) print_metrics(out, "test", report.test_metrics);
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const config::RunConfig c = resolve_config(o.run);
  const fs::path dir = require_out(o.run);
  const auto d = load_data(c);
  const auto g = graph_for(c, d);
  const auto s = splits_for(c, d);
  auto net = load_model(c, g.normalized, o.checkpoint);
  const trainer::Predictions p = trainer::predict_all(net, s.test, c.train.threads);
  const metrics::MetricsReport r = trainer::score(p);
  json j = metrics_json(r);
  json steps = json::array();
  for (const auto& step : metrics::per_step(p.y, p.y_hat, p.steps, p.stations)) steps.push_back(metrics_json(step));
  j["per_step"] = steps;
  Manifest m(dir, "evaluate");
  m.write("metrics.json", j.dump(2) + "\n");

  const auto& ids = d.availability.station_ids;
  const std::size_t block = p.steps * p.stations;
  std::string csv_text = "timestamp,station_id,step,truth,prediction\n";
  for (std::size_t i = 0; i < p.starts.size(); ++i)
    for (std::size_t k = 0; k < p.steps; ++k)
      for (std::size_t n = 0; n < p.stations; ++n) {
        const std::size_t at = i * block + k * p.stations + n;
        csv_text += csv::join({format_timestamp(d.availability.grid.at(p.starts[i] + c.model.window + 1 + k)), ids[n],
                               std::to_string(k + 1), csv::format_number(p.y[at]), csv::format_number(p.y_hat[at])}) +
                    "\n";
      }
  m.write("predictions.csv", csv_text);

  if (o.dump_attention) {
    std::vector<informer::AttentionMap> trace;
    net.predict(s.test.front(), &trace);
    std::string a = "layer,head,query,key,weight\n";
    for (const auto& map : trace)
      for (std::size_t h = 0; h < map.heads; ++h)
        for (std::size_t q = 0; q < map.queries; ++q)
          for (std::size_t k = 0; k < map.keys; ++k)
            a += csv::join({map.name, std::to_string(h), std::to_string(q), std::to_string(k),
                            csv::format_number(map.weights[(h * map.queries + q) * map.keys + k])}) +
                 "\n";
    m.write("attention.csv", a);
  }
  if (o.dump_sample) {
    if (*o.dump_sample >= s.test.size())
      throw ValidationError("--dump-sample " + std::to_string(*o.dump_sample) + " is outside the test split (" +
                            std::to_string(s.test.size()) + " samples)");
    m.write("sample.csv", a2unit::format_sample_csv(s.test[*o.dump_sample], ids));
  }
  m.finish(config::config_hash(c));
  print_metrics(out, "test", r);
  return 0;
}

int cmd_forecast(const Options& o, std::ostream& out) {
  const config::RunConfig c = resolve_config(o.run);
  const fs::path dir = require_out(o.run);
  const auto d = load_data(c);
  const auto g = graph_for(c, d);
  auto net = load_model(c, g.normalized, o.checkpoint);
  const std::size_t len = c.model.window + 1, n = d.stations(), total = d.availability.steps();
  if (total < len) throw ValidationError("series has " + std::to_string(total) + " steps, need " + std::to_string(len));
  const std::size_t first = total - len;
  ingest::WindowPrecursor p;
  p.start = first;
  p.x = Matrix(len, n);
  p.beta = Tensor3(len, n, d.dynamics.factors());
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t i = 0; i < n; ++i) {
      p.x(t, i) = d.availability.values(i, first + t);
      for (std::size_t f = 0; f < d.dynamics.factors(); ++f) p.beta(t, i, f) = d.dynamics.beta(i, f, first + t);
    }
  p.alpha = d.statics.alpha;
  p.y = Matrix(c.model.horizon, n);
  const auto sample = a2unit::augment_dataset({p}, model::attribute_mode(c.model.ablation)).front();
  const Matrix y = net.predict(sample);
  std::string text = "station_id,step,timestamp,prediction\n";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c.model.horizon; ++k) {
      double v = y(k, i);
      if (o.clamp) v = std::clamp(v, 0.0, 1.0);
      text += csv::join({d.availability.station_ids[i], std::to_string(k + 1),
                         format_timestamp(d.availability.grid.at(total + k)), csv::format_number(v)}) +
              "\n";
    }
  Manifest m(dir, "forecast");
  m.write("forecast.csv", text);
  m.finish(config::config_hash(c));
  out << "forecast written for " << n << " stations, " << c.model.horizon << " steps\n";
  return 0;
}

int cmd_perturb(const Options& o, std::ostream& out) {
  const config::RunConfig c = resolve_config(o.run);
  const fs::path dir = require_out(o.run);
  const auto d = load_data(c);
  const auto g = graph_for(c, d);
  const auto s = splits_for(c, d);
  auto net = load_model(c, g.normalized, o.checkpoint);
  json arr = json::array();
  for (const auto& r : trainer::perturb_eval(net, s.test, o.sigmas, o.perturb_seed, c.train.threads)) {
    json j = metrics_json(r.report);
    j["sigma"] = r.sigma;
    arr.push_back(j);
    print_metrics(out, "sigma " + fmt(r.sigma), r.report);
  }
  Manifest m(dir, "perturb");
  m.write("perturb.json", json{{"seed", o.perturb_seed}, {"results", arr}}.dump(2) + "\n");
  m.finish(config::config_hash(c));
  return 0;
}

int cmd_synth(const Options& o, std::ostream& out) {
  config::RunConfig c = resolve_config(o.run);
  if (o.stations) c.synth.n_stations = *o.stations;
  if (o.days) c.synth.days = *o.days;
  if (o.run.seed) c.synth.seed = *o.run.seed;
  if (o.weather_effect) c.synth.weather_effect = *o.weather_effect;
  if (o.noise_std) c.synth.noise_std = *o.noise_std;
  synth::validate(c.synth);
  const fs::path dir = require_out(o.run);
  const synth::SynthData data = synth::generate(c.synth);
  dataset::save(data.data, dir);
  Manifest m(dir, "synth");
  for (const char* f : {"stations.csv", "availability.csv", "weather.csv", "static.csv"}) m.add(f);
  if (o.raw) {
    synth::write_raw(data, dir / "raw");
    for (const char* f : {"raw/sessions.csv", "raw/weather.csv", "raw/poi.csv", "raw/connectors.csv"}) m.add(f);
  }
  m.write("config.json", config::to_json(c) + "\n");
  m.finish(config::config_hash(c));
  out << "synthetic dataset: " << c.synth.n_stations << " stations, " << data.data.availability.steps() << " steps\n";
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const auto outcomes = gradsuite::run(o.gc_seeds, gradsuite::kTolerance, o.gc_filter);
  if (outcomes.empty()) throw ValidationError("no registered check matches '" + o.gc_filter + "'");
  bool ok = true;
  out << std::left << std::setw(26) << "check" << std::setw(8) << "seeds" << std::setw(14) << "max_rel_err"
      << "result\n";
  json rows = json::array();
  for (const auto& r : outcomes) {
    ok = ok && r.passed;
    std::ostringstream err;
    err << std::scientific << std::setprecision(2) << r.max_rel_error;
    out << std::left << std::setw(26) << r.name << std::setw(8) << r.seeds << std::setw(14) << err.str()
        << (r.passed ? "pass" : "FAIL") << "\n";
    rows.push_back({{"name", r.name}, {"seeds", r.seeds}, {"max_rel_error", r.max_rel_error}, {"passed", r.passed}});
  }
  if (!o.run.out.empty()) {
    Manifest m(o.run.out, "gradcheck");
    m.write("gradcheck.json", rows.dump(2) + "\n");
    m.finish(config::config_hash(config::parse("{}")));
  }
  if (!ok) throw NumericalError("gradient check failed (tolerance " + std::to_string(gradsuite::kTolerance) + ")");
  return 0;
}

void add_run_options(CLI::App* sub, Overrides& o, bool needs_config) {
  auto* opt = sub->add_option("--config", o.config, "JSON run configuration");
  if (needs_config) opt->required();
  sub->add_option("--data", o.data, "dataset directory (overrides data_dir)");
  sub->add_option("--ablation", o.ablation, "full, no_attributes, no_gcn, poi_only or weather_only");
  sub->add_option("--horizon", o.horizon, "forecast horizon in minutes (30, 60, 90, 120)");
  sub->add_option("--seed", o.seed, "seed override");
  sub->add_option("--epochs", o.epochs, "epoch count override");
  sub->add_option("--threads", o.threads, "evaluation worker count");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attribute-augmented spatio-temporal availability forecasting"};
  app.require_subcommand(1);
  Options o;

  auto* ingest = app.add_subcommand("ingest", "parse raw files into a dataset directory");
  ingest->add_option("--sessions", o.sessions, "charging sessions CSV")->required();
  ingest->add_option("--weather", o.weather, "hourly weather CSV")->required();
  ingest->add_option("--poi", o.poi, "station POI categories CSV")->required();
  ingest->add_option("--connectors", o.connectors, "connector counts CSV")->required();
  ingest->add_option("--out", o.run.out, "output directory")->required();

  auto* graph_cmd = app.add_subcommand("graph", "build and export the station graph");
  add_run_options(graph_cmd, o.run, false);
  graph_cmd->add_option("--sigma", o.sigma, "kernel bandwidth in meters (default: distance std)");
  graph_cmd->add_option("--kappa", o.kappa, "distance cutoff in meters (default: 95th percentile)");
  graph_cmd->add_option("--distance", o.distance, "precomputed distance matrix CSV");
  graph_cmd->add_option("--out", o.run.out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model and write checkpoint and report");
  add_run_options(train, o.run, true);
  train->add_option("--out", o.run.out, "output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  add_run_options(evaluate, o.run, true);
  evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  evaluate->add_flag("--dump-attention", o.dump_attention, "write attention weights of the first test sample");
  evaluate->add_option("--dump-sample", o.dump_sample, "write the augmented matrix of test sample i");
  evaluate->add_option("--out", o.run.out, "output directory")->required();

  auto* forecast = app.add_subcommand("forecast", "forecast the steps after the end of the series");
  add_run_options(forecast, o.run, true);
  forecast->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  forecast->add_flag("--clamp", o.clamp, "clamp predictions into [0, 1]");
  forecast->add_option("--out", o.run.out, "output directory")->required();

  auto* perturb = app.add_subcommand("perturb", "metrics under Gaussian input noise");
  add_run_options(perturb, o.run, true);
  perturb->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  perturb->add_option("--sigmas", o.sigmas, "noise standard deviations")->delimiter(',');
  perturb->add_option("--noise-seed", o.perturb_seed, "noise seed");
  perturb->add_option("--out", o.run.out, "output directory")->required();

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset directory");
  add_run_options(synth_cmd, o.run, false);
  synth_cmd->add_option("--stations", o.stations, "number of stations");
  synth_cmd->add_option("--days", o.days, "number of days");
  synth_cmd->add_option("--weather-effect", o.weather_effect, "weather coupling");
  synth_cmd->add_option("--noise", o.noise_std, "noise standard deviation");
  synth_cmd->add_flag("--raw", o.raw, "also write raw ingest files under raw/");
  synth_cmd->add_option("--out", o.run.out, "output directory")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every registered op");
  gradcheck->add_option("--seeds", o.gc_seeds, "seeds per check");
  gradcheck->add_option("--filter", o.gc_filter, "only checks whose name contains this text");
  gradcheck->add_option("--out", o.run.out, "optional output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) return cmd_ingest(o, out);
    if (*graph_cmd) return cmd_graph(o, out);
    if (*train) return cmd_train(o, out);
    if (*evaluate) return cmd_evaluate(o, out);
    if (*forecast) return cmd_forecast(o, out);
    if (*perturb) return cmd_perturb(o, out);
    if (*synth_cmd) return cmd_synth(o, out);
    if (*gradcheck) return cmd_gradcheck(o, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace astgin::cli
