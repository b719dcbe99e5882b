#include "accudrive/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "accudrive/errors.hpp"

namespace accudrive::model {

namespace {

constexpr const char* kCheckpointMagic = "accudrive-checkpoint";
constexpr const char* kStateMagic = "accudrive-state";

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::string word(const char* what) {
    std::string w;
    if (!(in_ >> w)) fail(std::string("unexpected end of document, expected ") + what);
    return w;
  }

  void expect(const std::string& keyword) {
    const std::string w = word(keyword.c_str());
    if (w != keyword) fail("expected '" + keyword + "', got '" + w + "'");
  }

  double number(const char* what) {
    const std::string w = word(what);
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size()) fail(std::string("bad number for ") + what + ": '" + w + "'");
    if (!std::isfinite(v)) fail(std::string("non-finite value for ") + what);
    return v;
  }

  std::size_t count(const char* what) {
    const std::string w = word(what);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(w.c_str(), &end, 10);
    if (w.empty() || end != w.c_str() + w.size() || w[0] == '-') {
      fail(std::string("bad count for ") + what + ": '" + w + "'");
    }
    return static_cast<std::size_t>(v);
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw SchemaError(source_ + ": " + message);
  }

 private:
  std::istream& in_;
  std::string source_;
};

void write_values(std::ostream& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << (i == 0 ? "" : " ") << format_exact(values[i]);
  }
}

std::vector<double> read_values(Reader& r, std::size_t n, const char* what) {
  std::vector<double> v(n);
  for (double& x : v) x = r.number(what);
  return v;
}

}  // namespace

std::string format_exact(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", value);
  return buf;
}

void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  const Model& m = checkpoint.model;
  const ModelConfig& c = m.config;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "config channels " << c.channels << '\n';
  out << "config expansion " << c.expansion << '\n';
  out << "config compression " << c.compression << '\n';
  out << "config perception_layers " << c.perception_layers << '\n';
  out << "config embedding_width " << c.embedding_width << '\n';
  out << "config motor_hidden " << c.motor_hidden << '\n';
  out << "config dt " << format_exact(c.dt) << '\n';
  out << "config threshold " << format_exact(c.threshold) << '\n';
  out << "config sharpness " << format_exact(c.sharpness) << '\n';
  out << "config epsilon " << format_exact(c.epsilon) << '\n';
  out << "config initial_leak " << format_exact(c.initial_leak) << '\n';
  out << "config initial_log_rate " << format_exact(c.initial_log_rate) << '\n';
  out << "config seed " << c.seed << '\n';
  out << "epoch " << checkpoint.epoch << '\n';
  const data::Scalers& s = checkpoint.scalers;
  for (auto [name, values] : {std::pair{"input_mean", &s.input_mean},
                              std::pair{"input_std", &s.input_std},
                              std::pair{"output_min", &s.output_min},
                              std::pair{"output_max", &s.output_max}}) {
    out << "scalers " << name << ' ' << values->size();
    if (!values->empty()) out << ' ';
    write_values(out, *values);
    out << '\n';
  }
  out << "drivers " << m.drivers.size();
  for (const std::string& d : m.drivers) {
    if (d.empty() || d.find_first_of(" \t\r\n") != std::string::npos) {
      throw ArgumentError("driver id '" + d + "' cannot be stored in a checkpoint");
    }
    out << ' ' << d;
  }
  out << '\n';
  for_each_param(
      [&](const std::string& name, const Tensor& t) {
        out << "param " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
        for (std::size_t r = 0; r < t.rows(); ++r) {
          write_values(out, t.row(r));
          out << '\n';
        }
      },
      m.params);
  out << "end\n";
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write checkpoint " + path.string());
  save_checkpoint(out, checkpoint);
  if (!out) throw SchemaError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(std::istream& in, const std::string& source) {
  Reader r(in, source);
  r.expect(kCheckpointMagic);
  const std::size_t version = r.count("version");
  if (version != static_cast<std::size_t>(kCheckpointVersion)) {
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ModelConfig& c = ck.model.config;
  std::map<std::string, Tensor> tensors;
  bool have_drivers = false;
  while (true) {
    const std::string key = r.word("section keyword");
    if (key == "end") break;
    if (key == "config") {
      const std::string field = r.word("config field");
      if (field == "channels") c.channels = r.count("channels");
      else if (field == "expansion") c.expansion = r.count("expansion");
      else if (field == "compression") c.compression = r.count("compression");
      else if (field == "perception_layers") c.perception_layers = r.count("perception_layers");
      else if (field == "embedding_width") c.embedding_width = r.count("embedding_width");
      else if (field == "motor_hidden") c.motor_hidden = r.count("motor_hidden");
      else if (field == "dt") c.dt = r.number("dt");
      else if (field == "threshold") c.threshold = r.number("threshold");
      else if (field == "sharpness") c.sharpness = r.number("sharpness");
      else if (field == "epsilon") c.epsilon = r.number("epsilon");
      else if (field == "initial_leak") c.initial_leak = r.number("initial_leak");
      else if (field == "initial_log_rate") c.initial_log_rate = r.number("initial_log_rate");
      else if (field == "seed") c.seed = r.count("seed");
      else r.fail("unknown config field '" + field + "'");
    } else if (key == "epoch") {
      ck.epoch = r.count("epoch");
    } else if (key == "scalers") {
      const std::string name = r.word("scaler name");
      const std::size_t n = r.count("scaler length");
      std::vector<double> values = read_values(r, n, "scaler value");
      if (name == "input_mean") ck.scalers.input_mean = std::move(values);
      else if (name == "input_std") ck.scalers.input_std = std::move(values);
      else if (name == "output_min") ck.scalers.output_min = std::move(values);
      else if (name == "output_max") ck.scalers.output_max = std::move(values);
      else r.fail("unknown scaler '" + name + "'");
    } else if (key == "drivers") {
      const std::size_t n = r.count("driver count");
      ck.model.drivers.clear();
      for (std::size_t i = 0; i < n; ++i) ck.model.drivers.push_back(r.word("driver id"));
      have_drivers = true;
    } else if (key == "param") {
      const std::string name = r.word("parameter name");
      const std::size_t rows = r.count("rows");
      const std::size_t cols = r.count("cols");
      tensors[name] = Tensor(rows, cols, read_values(r, rows * cols, name.c_str()));
    } else {
      r.fail("unknown section '" + key + "'");
    }
  }
  if (!have_drivers) r.fail("missing drivers section");
  try {
    Model skeleton = init_model(c, ck.model.drivers);
    ck.model.params = std::move(skeleton.params);
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  std::size_t matched = 0;
  for_each_param(
      [&](const std::string& name, Tensor& t) {
        auto it = tensors.find(name);
        if (it == tensors.end()) r.fail("missing parameter '" + name + "'");
        if (!it->second.same_shape(t)) {
          r.fail("parameter '" + name + "' has shape " + it->second.shape() + ", expected " + t.shape());
        }
        t = std::move(it->second);
        ++matched;
      },
      ck.model.params);
  if (matched != tensors.size()) r.fail("checkpoint contains unknown parameters");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open checkpoint " + path.string());
  return load_checkpoint(in, path.string());
}

void save_state(std::ostream& out, const SimState& state) {
  out << kStateMagic << ' ' << kCheckpointVersion << '\n';
  out << "step " << state.step << '\n';
  out << "potential " << state.accumulator.potential.size() << ' ';
  write_values(out, state.accumulator.potential);
  out << '\n';
  for (std::size_t c = 0; c < state.motor.size(); ++c) {
    const motor::MotorState& m = state.motor[c];
    out << "motor " << c << ' ' << format_exact(m.settled_offset()) << ' ' << m.active().size() << '\n';
    for (const motor::MotorPrimitive& p : m.active()) {
      write_values(out, std::array{p.magnitude, p.sign, p.amplitude, p.rate, p.t0, p.y0});
      out << '\n';
    }
  }
  out << "end\n";
}

SimState load_state(std::istream& in) {
  Reader r(in, "simulation state");
  r.expect(kStateMagic);
  if (r.count("version") != static_cast<std::size_t>(kCheckpointVersion)) {
    r.fail("unsupported state version");
  }
  SimState state;
  r.expect("step");
  state.step = r.count("step");
  r.expect("potential");
  state.accumulator.potential = read_values(r, r.count("potential count"), "potential");
  for (std::size_t c = 0; c < state.motor.size(); ++c) {
    r.expect("motor");
    if (r.count("control index") != c) r.fail("motor sections out of order");
    const double settled = r.number("settled offset");
    const std::size_t n = r.count("primitive count");
    std::vector<motor::MotorPrimitive> active(n);
    for (motor::MotorPrimitive& p : active) {
      p.magnitude = r.number("magnitude");
      p.sign = r.number("sign");
      p.amplitude = r.number("amplitude");
      p.rate = r.number("rate");
      p.t0 = r.number("t0");
      p.y0 = r.number("y0");
    }
    state.motor[c] = motor::MotorState(std::move(active), settled);
  }
  r.expect("end");
  return state;
}

}  // namespace accudrive::model
