#include "accudrive/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "accudrive/errors.hpp"

namespace accudrive::data {

namespace {

constexpr std::size_t kFixedColumns = 3;  // driver_id, trip_id, t

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

double parse_number(std::string_view text, const std::string& source, std::size_t line,
                    std::string_view column) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw SchemaError(where(source, line) + ": column '" + std::string(column) +
                      "' is not a number: '" + std::string(text) + "'");
  }
  if (!std::isfinite(value)) {
    throw SchemaError(where(source, line) + ": column '" + std::string(column) +
                      "' is not finite");
  }
  return value;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> Dataset::drivers() const {
  std::set<std::string> ids;
  for (const Trip& trip : trips) ids.insert(trip.driver_id);
  return {ids.begin(), ids.end()};
}

const Trip* Dataset::find_trip(std::string_view trip_id) const {
  for (const Trip& trip : trips) {
    if (trip.trip_id == trip_id) return &trip;
  }
  return nullptr;
}

Trip read_trip(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string_view> header = split(line, ',');

  auto column_of = [&](std::string_view name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw SchemaError(source + ": missing column '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t driver_col = column_of("driver_id");
  const std::size_t trip_col = column_of("trip_id");
  const std::size_t time_col = column_of("t");
  std::array<std::size_t, kInputColumns.size()> input_cols{};
  for (std::size_t c = 0; c < kInputColumns.size(); ++c) input_cols[c] = column_of(kInputColumns[c]);
  std::array<std::size_t, kOutputColumns.size()> output_cols{};
  for (std::size_t c = 0; c < kOutputColumns.size(); ++c) output_cols[c] = column_of(kOutputColumns[c]);

  Trip trip;
  std::vector<double> inputs;
  std::vector<double> outputs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string_view> fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw SchemaError(where(source, line_no) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    const std::string_view driver = fields[driver_col];
    const std::string_view trip_id = fields[trip_col];
    if (trip.time.empty()) {
      trip.driver_id = driver;
      trip.trip_id = trip_id;
      if (trip.driver_id.empty() || trip.trip_id.empty()) {
        throw SchemaError(where(source, line_no) + ": empty driver_id or trip_id");
      }
    } else if (driver != trip.driver_id || trip_id != trip.trip_id) {
      throw SchemaError(where(source, line_no) + ": driver_id/trip_id change within one trip file");
    }
    const double t = parse_number(fields[time_col], source, line_no, "t");
    if (!trip.time.empty() && !(t > trip.time.back())) {
      throw SchemaError(where(source, line_no) + ": time is not strictly increasing (" +
                        format_number(t) + " after " + format_number(trip.time.back()) + ")");
    }
    trip.time.push_back(t);
    for (std::size_t c = 0; c < input_cols.size(); ++c) {
      inputs.push_back(parse_number(fields[input_cols[c]], source, line_no, kInputColumns[c]));
    }
    for (std::size_t c = 0; c < output_cols.size(); ++c) {
      outputs.push_back(parse_number(fields[output_cols[c]], source, line_no, kOutputColumns[c]));
    }
  }
  if (trip.time.empty()) throw SchemaError(source + ": no data rows");
  const std::size_t steps = trip.time.size();
  trip.inputs = Tensor(steps, kInputColumns.size(), std::move(inputs));
  trip.outputs = Tensor(steps, kOutputColumns.size(), std::move(outputs));
  return trip;
}

Trip read_trip_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  return read_trip(in, path.string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw SchemaError("dataset directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw SchemaError("no .csv trips in " + dir.string());
  Dataset dataset;
  std::set<std::string> seen;
  for (const auto& file : files) {
    Trip trip = read_trip_file(file);
    if (!seen.insert(trip.trip_id).second) {
      throw SchemaError(file.string() + ": duplicate trip_id '" + trip.trip_id + "'");
    }
    dataset.trips.push_back(std::move(trip));
  }
  return dataset;
}

void write_trip(std::ostream& out, const Trip& trip) {
  out << "driver_id,trip_id,t";
  for (auto name : kInputColumns) out << ',' << name;
  for (auto name : kOutputColumns) out << ',' << name;
  out << '\n';
  for (std::size_t t = 0; t < trip.length(); ++t) {
    out << trip.driver_id << ',' << trip.trip_id << ',' << format_number(trip.time[t]);
    for (double v : trip.inputs.row(t)) out << ',' << format_number(v);
    for (double v : trip.outputs.row(t)) out << ',' << format_number(v);
    out << '\n';
  }
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  for (const Trip& trip : dataset.trips) {
    const auto path = dir / (trip.trip_id + ".csv");
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path.string());
    write_trip(out, trip);
  }
}

Scalers fit_scalers(std::span<const Trip> trips) {
  const std::size_t channels = kInputColumns.size();
  const std::size_t controls = kOutputColumns.size();
  std::size_t count = 0;
  for (const Trip& trip : trips) count += trip.length();
  if (count == 0) throw DegenerateError("cannot fit scalers on an empty training set");

  Scalers s;
  s.input_mean.assign(channels, 0.0);
  s.input_std.assign(channels, 0.0);
  s.output_min.assign(controls, INFINITY);
  s.output_max.assign(controls, -INFINITY);
  for (const Trip& trip : trips) {
    for (std::size_t t = 0; t < trip.length(); ++t) {
      for (std::size_t c = 0; c < channels; ++c) s.input_mean[c] += trip.inputs(t, c);
      for (std::size_t c = 0; c < controls; ++c) {
        s.output_min[c] = std::min(s.output_min[c], trip.outputs(t, c));
        s.output_max[c] = std::max(s.output_max[c], trip.outputs(t, c));
      }
    }
  }
  const double n = static_cast<double>(count);
  for (double& m : s.input_mean) m /= n;
  for (const Trip& trip : trips) {
    for (std::size_t t = 0; t < trip.length(); ++t) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double d = trip.inputs(t, c) - s.input_mean[c];
        s.input_std[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < channels; ++c) {
    s.input_std[c] = std::sqrt(s.input_std[c] / n);
    if (!(s.input_std[c] > 0.0)) {
      throw DegenerateError("input channel '" + std::string(kInputColumns[c]) +
                            "' has zero variance in the training data");
    }
  }
  for (std::size_t c = 0; c < controls; ++c) {
    if (!(s.output_max[c] > s.output_min[c])) {
      throw DegenerateError("output '" + std::string(kOutputColumns[c]) +
                            "' is constant in the training data");
    }
  }
  return s;
}

Tensor scale_outputs(const Scalers& s, const Tensor& raw) {
  Tensor out(raw.rows(), raw.cols());
  for (std::size_t t = 0; t < raw.rows(); ++t) {
    for (std::size_t c = 0; c < raw.cols(); ++c) {
      const double lo = Scalers::kOutputLow[c];
      const double hi = Scalers::kOutputHigh[c];
      out(t, c) = lo + (raw(t, c) - s.output_min[c]) * (hi - lo) / (s.output_max[c] - s.output_min[c]);
    }
  }
  return out;
}

Tensor invert_outputs(const Scalers& s, const Tensor& scaled) {
  Tensor out(scaled.rows(), scaled.cols());
  for (std::size_t t = 0; t < scaled.rows(); ++t) {
    for (std::size_t c = 0; c < scaled.cols(); ++c) {
      const double lo = Scalers::kOutputLow[c];
      const double hi = Scalers::kOutputHigh[c];
      out(t, c) = s.output_min[c] + (scaled(t, c) - lo) * (s.output_max[c] - s.output_min[c]) / (hi - lo);
    }
  }
  return out;
}

Trip apply(const Scalers& s, const Trip& trip) {
  Trip out = trip;
  for (std::size_t t = 0; t < trip.length(); ++t) {
    for (std::size_t c = 0; c < trip.inputs.cols(); ++c) {
      out.inputs(t, c) = (trip.inputs(t, c) - s.input_mean[c]) / s.input_std[c];
    }
  }
  out.outputs = scale_outputs(s, trip.outputs);
  return out;
}

std::vector<Trip> apply(const Scalers& s, std::span<const Trip> trips) {
  std::vector<Trip> out;
  out.reserve(trips.size());
  for (const Trip& trip : trips) out.push_back(apply(s, trip));
  return out;
}

Batch pad_and_mask(std::span<const Trip> trips) {
  Batch batch;
  for (const Trip& trip : trips) batch.steps = std::max(batch.steps, trip.length());
  for (const Trip& trip : trips) {
    const std::size_t n = trip.length();
    Tensor inputs(batch.steps, trip.inputs.cols());
    Tensor outputs(batch.steps, trip.outputs.cols());
    std::copy(trip.inputs.values().begin(), trip.inputs.values().end(), inputs.values().begin());
    std::copy(trip.outputs.values().begin(), trip.outputs.values().end(), outputs.values().begin());
    std::vector<double> mask(batch.steps, 0.0);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(n), 1.0);
    batch.drivers.push_back(trip.driver_id);
    batch.trip_ids.push_back(trip.trip_id);
    batch.inputs.push_back(std::move(inputs));
    batch.outputs.push_back(std::move(outputs));
    batch.masks.push_back(std::move(mask));
  }
  return batch;
}

}  // namespace accudrive::data
