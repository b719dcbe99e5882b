#include "accudrive/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "accudrive/checkpoint.hpp"
#include "accudrive/data.hpp"
#include "accudrive/errors.hpp"
#include "accudrive/model.hpp"
#include "accudrive/personalization.hpp"
#include "accudrive/training.hpp"

namespace accudrive::cli {
namespace {

namespace fs = std::filesystem;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_output(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw SchemaError("cannot open '" + path + "' for writing");
  return out;
}

void print_model_config(std::ostream& err, const model::ModelConfig& c) {
  err << "  channels=" << c.channels << " expansion=" << c.expansion
      << " compression=" << c.compression << " perception_layers=" << c.perception_layers
      << " embedding_width=" << c.embedding_width << " motor_hidden=" << c.hidden() << '\n'
      << "  dt=" << c.dt << " threshold=" << c.threshold << " sharpness=" << c.sharpness
      << " epsilon=" << c.epsilon << " initial_leak=" << c.initial_leak
      << " initial_log_rate=" << c.initial_log_rate << '\n';
}

// Scaled trips of a directory, using the checkpoint's scalers.
std::vector<data::Trip> scaled_trips(const model::Checkpoint& ckpt, const std::string& dir) {
  const data::Dataset dataset = data::load_dataset(dir);
  return data::apply(ckpt.scalers, dataset.trips);
}

struct Options {
  // synth
  std::string out;
  std::size_t drivers = 25;
  std::size_t trips_per_driver = 9;
  std::uint64_t seed = 0;
  // train
  std::string data;
  std::string holdout;
  std::string log;
  model::ModelConfig model;
  training::TrainConfig train;
  // eval / predict / inspect / embed
  std::string ckpt;
  std::string trip;
  std::size_t dims = 1;
};

int do_synth(const Options& o, std::ostream& err) {
  err << "synth: out=" << o.out << " drivers=" << o.drivers
      << " trips_per_driver=" << o.trips_per_driver << " seed=" << o.seed << '\n';
  data::SynthSpec spec;
  spec.drivers = o.drivers;
  spec.trips_per_driver = o.trips_per_driver;
  const data::SynthDataset synth = data::synth_generate(spec, o.seed);
  data::write_dataset(o.out, synth.dataset);
  return kOk;
}

int do_train(Options o, std::ostream& out, std::ostream& err) {
  o.train.holdout = o.holdout;
  o.train.seed = o.seed;
  const std::string log_path = o.log.empty() ? o.out + ".loss.csv" : o.log;
  err << "train: data=" << o.data << " holdout=" << o.holdout << " out=" << o.out
      << " log=" << log_path << '\n'
      << "  epochs=" << o.train.epochs << " lr=" << o.train.learning_rate
      << " beta1=" << o.train.beta1 << " beta2=" << o.train.beta2
      << " adam_epsilon=" << o.train.epsilon << " seed=" << o.train.seed
      << " max_grad_norm=" << o.train.max_grad_norm << " truncation=" << o.train.truncation
      << '\n';
  const data::Dataset dataset = data::load_dataset(o.data);
  o.model.channels = data::kInputColumns.size();
  print_model_config(err, o.model);
  o.model.validate();

  try {
    const training::TrainResult result = training::train(dataset, o.model, o.train);
    model::save_checkpoint(fs::path(o.out), result.best);
    std::ofstream log = open_output(log_path);
    training::write_loss_log(log, result.log);
    out << "best_epoch," << result.best_epoch << '\n'
        << "best_val_loss," << g17(result.log[result.best_epoch - 1].val_loss) << '\n';
  } catch (const training::TrainingDiverged& e) {
    model::save_checkpoint(fs::path(o.out), e.last_finite());
    std::ofstream log = open_output(log_path);
    training::write_loss_log(log, e.log());
    err << "error: " << e.what() << "; last finite parameters (epoch " << e.last_finite().epoch
        << ") written to " << o.out << '\n';
    return kNumericError;
  }
  return kOk;
}

int do_eval(const Options& o, std::ostream& out, std::ostream& err) {
  err << "eval: ckpt=" << o.ckpt << " data=" << o.data << '\n';
  const model::Checkpoint ckpt = model::load_checkpoint(fs::path(o.ckpt));
  print_model_config(err, ckpt.model.config);
  const std::vector<data::Trip> trips = scaled_trips(ckpt, o.data);
  std::vector<Tensor> predictions, observations;
  std::vector<std::vector<double>> masks;
  for (const data::Trip& trip : trips) {
    predictions.push_back(model::simulate_trip(ckpt.model, trip.inputs, trip.driver_id).predictions);
    observations.push_back(trip.outputs);
    masks.emplace_back(trip.length(), 1.0);
  }
  const auto mae = training::control_mae(predictions, observations, masks);
  out << "control,mae\n";
  for (std::size_t c = 0; c < motor::kControls; ++c) {
    out << motor::kControlNames[c] << ',' << g17(mae[c]) << '\n';
  }
  return kOk;
}

int do_predict(const Options& o, std::ostream& err) {
  err << "predict: ckpt=" << o.ckpt << " data=" << o.data << " out=" << o.out << '\n';
  const model::Checkpoint ckpt = model::load_checkpoint(fs::path(o.ckpt));
  print_model_config(err, ckpt.model.config);
  const std::vector<data::Trip> trips = scaled_trips(ckpt, o.data);
  std::ofstream file = open_output(o.out);
  file << "trip_id,t,brake_pred,throttle_pred,steer_pred,brake_obs,throttle_obs,steer_obs\n";
  for (const data::Trip& trip : trips) {
    const Tensor pred = model::simulate_trip(ckpt.model, trip.inputs, trip.driver_id).predictions;
    for (std::size_t t = 0; t < trip.length(); ++t) {
      file << trip.trip_id << ',' << g17(trip.time[t]);
      for (std::size_t c = 0; c < motor::kControls; ++c) file << ',' << g17(pred(t, c));
      for (std::size_t c = 0; c < motor::kControls; ++c) file << ',' << g17(trip.outputs(t, c));
      file << '\n';
    }
  }
  return kOk;
}

int do_inspect(const Options& o, std::ostream& err) {
  err << "inspect: ckpt=" << o.ckpt << " data=" << o.data << " trip=" << o.trip
      << " out=" << o.out << '\n';
  const model::Checkpoint ckpt = model::load_checkpoint(fs::path(o.ckpt));
  print_model_config(err, ckpt.model.config);
  const data::Dataset dataset = data::load_dataset(o.data);
  const data::Trip* raw = dataset.find_trip(o.trip);
  if (raw == nullptr) throw ArgumentError("trip '" + o.trip + "' not found in " + o.data);
  const data::Trip trip = data::apply(ckpt.scalers, *raw);
  const model::Trace trace = model::simulate_trip(ckpt.model, trip.inputs, trip.driver_id).trace;
  std::ofstream file = open_output(o.out);
  file << "t,neuron,potential,spike\n";
  for (std::size_t t = 0; t < trip.length(); ++t) {
    for (std::size_t i = 0; i < trace.potentials.cols(); ++i) {
      file << g17(trip.time[t]) << ',' << i << ',' << g17(trace.potentials(t, i)) << ','
           << (trace.spikes(t, i) >= 0.5 ? 1 : 0) << '\n';
    }
  }
  return kOk;
}

int do_embed(const Options& o, std::ostream& err) {
  err << "embed: ckpt=" << o.ckpt << " out=" << o.out << " dims=" << o.dims << '\n';
  const model::Checkpoint ckpt = model::load_checkpoint(fs::path(o.ckpt));
  const personalization::EmbeddingTable table = ckpt.model.embedding_table();
  const Tensor projected = personalization::pca_project(table, o.dims);
  std::ofstream file = open_output(o.out);
  file << "driver_id";
  for (std::size_t d = 0; d < o.dims; ++d) file << ",pc" << d + 1;
  file << '\n';
  for (std::size_t r = 0; r < projected.rows(); ++r) {
    file << table.drivers[r];
    for (std::size_t d = 0; d < o.dims; ++d) file << ',' << g17(projected(r, d));
    file << '\n';
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evidence-accumulation driver model"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--out", o.out, "output directory")->required();
  synth->add_option("--drivers", o.drivers)->check(CLI::PositiveNumber);
  synth->add_option("--trips-per-driver", o.trips_per_driver)->check(CLI::PositiveNumber);
  synth->add_option("--seed", o.seed);

  auto* train = app.add_subcommand("train", "train with one driver held out");
  train->add_option("--data", o.data, "dataset directory")->required();
  train->add_option("--holdout-driver", o.holdout)->required();
  train->add_option("--out", o.out, "checkpoint path")->required();
  train->add_option("--log", o.log, "loss log path (default: <out>.loss.csv)");
  train->add_option("--epochs", o.train.epochs);
  train->add_option("--lr", o.train.learning_rate);
  train->add_option("--seed", o.seed);
  train->add_option("--max-grad-norm", o.train.max_grad_norm);
  train->add_option("--truncation", o.train.truncation, "BPTT window in steps, 0 = full");
  train->add_option("--expansion", o.model.expansion);
  train->add_option("--compression", o.model.compression);
  train->add_option("--perception-layers", o.model.perception_layers);
  train->add_option("--embedding-width", o.model.embedding_width);
  train->add_option("--motor-hidden", o.model.motor_hidden);
  train->add_option("--dt", o.model.dt);
  train->add_option("--threshold", o.model.threshold);
  train->add_option("--sharpness", o.model.sharpness);
  train->add_option("--initial-leak", o.model.initial_leak);
  train->add_option("--initial-log-rate", o.model.initial_log_rate);

  auto* eval = app.add_subcommand("eval", "per-control MAE in scaled units");
  eval->add_option("--ckpt", o.ckpt)->required();
  eval->add_option("--data", o.data)->required();

  auto* predict = app.add_subcommand("predict", "write predictions next to observations");
  predict->add_option("--ckpt", o.ckpt)->required();
  predict->add_option("--data", o.data)->required();
  predict->add_option("--out", o.out)->required();

  auto* inspect = app.add_subcommand("inspect", "export accumulator potentials and spikes");
  inspect->add_option("--ckpt", o.ckpt)->required();
  inspect->add_option("--data", o.data)->required();
  inspect->add_option("--trip", o.trip)->required();
  inspect->add_option("--out", o.out)->required();

  auto* embed = app.add_subcommand("embed", "export PCA projections of driver embeddings");
  embed->add_option("--ckpt", o.ckpt)->required();
  embed->add_option("--out", o.out)->required();
  embed->add_option("--dims", o.dims)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (synth->parsed()) return do_synth(o, err);
    if (train->parsed()) return do_train(o, out, err);
    if (eval->parsed()) return do_eval(o, out, err);
    if (predict->parsed()) return do_predict(o, err);
    if (inspect->parsed()) return do_inspect(o, err);
    if (embed->parsed()) return do_embed(o, err);
  } catch (const ArgumentError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace accudrive::cli
