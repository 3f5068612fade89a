#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kcg/errors.hpp"
#include "kcg/harness/datasets.hpp"
#include "kcg/harness/records.hpp"
#include "kcg/random.hpp"
#include "kcg/structured_mvm.hpp"

namespace kcg {

void Dataset::validate() const {
  if (x.rows() != y.size()) throw InvalidArgument("Dataset: training inputs and targets differ in length");
  if (x_test.rows() != y_test.size()) throw InvalidArgument("Dataset: test inputs and targets differ in length");
  if (x_test.rows() > 0 && x_test.cols() != x.cols()) throw InvalidArgument("Dataset: train and test widths differ");
  if (!x.allFinite() || !y.allFinite() || !x_test.allFinite() || !y_test.allFinite())
    throw InvalidArgument("Dataset: non-finite entries");
}

}  // namespace kcg

namespace kcg::harness {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header row");
  t.header = split_line(line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw std::runtime_error(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                               " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

double cell_value(const Table& t, std::size_t r, std::size_t c, const std::string& path) {
  const std::string& s = t.rows[r][c];
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw std::runtime_error(path + ": row " + std::to_string(r + 2) + ", column '" + t.header[c] +
                             "': not a finite number: '" + s + "'");
  return v;
}

std::size_t column_index(const Table& t, const std::string& name, const std::string& path) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) {
    std::string avail;
    for (const auto& h : t.header) avail += (avail.empty() ? "" : ", ") + h;
    throw InvalidArgument(path + ": no column '" + name + "'; available: " + avail);
  }
  return static_cast<std::size_t>(it - t.header.begin());
}

// Toy input density: half mixture, half uniform on [0, 1].
Points toy_inputs(Index n, Rng& rng) {
  static constexpr double kMeans[3] = {0.0, 1.0, -0.5};
  static constexpr double kVars[3] = {1.0, 0.1, 0.05};
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Points x(n, 1);
  const Index mixture = n / 2;
  for (Index i = 0; i < mixture; ++i) {
    const auto c = uniform_index(rng, 3);
    x(i, 0) = kMeans[c] + std::sqrt(kVars[c]) * normal(rng);
  }
  for (Index i = mixture; i < n; ++i) x(i, 0) = unif(rng);
  return x;
}

}  // namespace

Kernel toy_kernel() { return Kernel::isotropic(KernelFamily::SquaredExponential, 1, 0.25, 2.0); }

double population_variance(const Vector& v) {
  if (v.size() == 0) return 0.0;
  return (v.array() - v.mean()).square().mean();
}

Dataset gen_toy(std::uint64_t seed, const ToyOptions& options) {
  if (options.train < 1 || options.test < 0) throw InvalidArgument("gen_toy: bad set sizes");
  if (!(options.noise >= 0.0)) throw InvalidArgument("gen_toy: noise variance must be nonnegative");
  Rng input_rng(derive_seed(seed, {1}));
  Dataset ds;
  ds.name = "toy";
  ds.seed = seed;
  ds.x = toy_inputs(options.train, input_rng);
  ds.x_test = toy_inputs(options.test, input_rng);

  Points all(options.train + options.test, 1);
  all << ds.x, ds.x_test;
  const Kernel k = toy_kernel();
  const CholeskyFactor l = cholesky(gram(k, all), JitterPolicy::with_scale(k.amplitude()));
  Rng draw_rng(derive_seed(seed, {2}));
  const Vector f = l.lower() * standard_normal(all.rows(), 1, draw_rng).col(0);
  Rng noise_rng(derive_seed(seed, {3}));
  const Vector eps = std::sqrt(options.noise) * standard_normal(all.rows(), 1, noise_rng).col(0);
  ds.y = f.head(options.train) + eps.head(options.train);
  ds.y_test = f.tail(options.test) + eps.tail(options.test);
  ds.metadata["generator"] = "toy";
  ds.metadata["noise"] = format_double(options.noise);
  ds.metadata["draw_jitter"] = format_double(l.jitter());
  return ds;
}

Dataset load_csv(const std::string& path, const std::string& target_column, double test_fraction,
                 std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw InvalidArgument("load_csv: test fraction must lie in [0, 1)");
  const Table t = read_table(path);
  const std::size_t target = column_index(t, target_column, path);
  const Index n = static_cast<Index>(t.rows.size());
  const Index d = static_cast<Index>(t.header.size()) - 1;
  if (n < 2 || d < 1) throw InvalidArgument(path + ": need at least two rows and one input column");
  Matrix values(n, d);
  Vector targets(n);
  for (Index r = 0; r < n; ++r) {
    Index col = 0;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      const double v = cell_value(t, static_cast<std::size_t>(r), c, path);
      if (c == target) targets[r] = v;
      else values(r, col++) = v;
    }
  }
  Rng rng(seed);
  const auto perm = random_permutation(n, rng);
  const Index n_test = static_cast<Index>(std::llround(test_fraction * static_cast<double>(n)));
  const Index n_train = n - n_test;
  Dataset ds;
  ds.name = path;
  ds.seed = seed;
  ds.x.resize(n_train, d);
  ds.y.resize(n_train);
  ds.x_test.resize(n_test, d);
  ds.y_test.resize(n_test);
  for (Index i = 0; i < n; ++i) {
    const Index src = perm[static_cast<std::size_t>(i)];
    if (i < n_train) {
      ds.x.row(i) = values.row(src);
      ds.y[i] = targets[src];
    } else {
      ds.x_test.row(i - n_train) = values.row(src);
      ds.y_test[i - n_train] = targets[src];
    }
  }
  ds.metadata["source"] = path;
  ds.metadata["target"] = target_column;
  return ds;
}

Dataset load_sound_csv(const std::string& path, const Kernel& kernel) {
  const Table t = read_table(path);
  const std::size_t tc = column_index(t, "time", path);
  const std::size_t vc = column_index(t, "value", path);
  const std::size_t mc = column_index(t, "mask", path);
  const Index n = static_cast<Index>(t.rows.size());
  if (n < 2) throw InvalidArgument(path + ": need at least two samples");
  std::vector<double> time(static_cast<std::size_t>(n)), value(static_cast<std::size_t>(n));
  std::vector<Index> observed, held_out;
  for (Index r = 0; r < n; ++r) {
    const auto ur = static_cast<std::size_t>(r);
    time[ur] = cell_value(t, ur, tc, path);
    value[ur] = cell_value(t, ur, vc, path);
    const double m = cell_value(t, ur, mc, path);
    if (m == 1.0) observed.push_back(r);
    else if (m == 0.0) held_out.push_back(r);
    else throw std::runtime_error(path + ": row " + std::to_string(r + 2) + ", column 'mask': expected 0 or 1");
  }
  const double spacing = time[1] - time[0];
  if (!(spacing > 0.0)) throw InvalidArgument(path + ": time must increase");
  for (Index r = 1; r < n; ++r) {
    const double step = time[static_cast<std::size_t>(r)] - time[static_cast<std::size_t>(r) - 1];
    if (std::abs(step - spacing) > 1e-9 * std::max(1.0, std::abs(spacing)))
      throw InvalidArgument(path + ": row " + std::to_string(r + 2) + ": time is not equispaced");
  }
  if (observed.empty()) throw InvalidArgument(path + ": no observed samples");

  Dataset ds;
  ds.name = path;
  ds.x.resize(static_cast<Index>(observed.size()), 1);
  ds.y.resize(static_cast<Index>(observed.size()));
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ds.x(static_cast<Index>(i), 0) = time[static_cast<std::size_t>(observed[i])];
    ds.y[static_cast<Index>(i)] = value[static_cast<std::size_t>(observed[i])];
  }
  ds.x_test.resize(static_cast<Index>(held_out.size()), 1);
  ds.y_test.resize(static_cast<Index>(held_out.size()));
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    ds.x_test(static_cast<Index>(i), 0) = time[static_cast<std::size_t>(held_out[i])];
    ds.y_test[static_cast<Index>(i)] = value[static_cast<std::size_t>(held_out[i])];
  }
  ds.series = std::make_shared<const MaskedToeplitzSpec>(MaskedToeplitzSpec::from_kernel(kernel, n, spacing, observed));
  ds.metadata["source"] = path;
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "split";
  for (Index d = 0; d < ds.dim(); ++d) out << ",x" << d;
  out << ",y\n";
  auto rows = [&](const char* split, const Points& x, const Vector& y) {
    for (Index i = 0; i < x.rows(); ++i) {
      out << split;
      for (Index d = 0; d < x.cols(); ++d) out << ',' << format_double(x(i, d));
      out << ',' << format_double(y[i]) << '\n';
    }
  };
  rows("train", ds.x, ds.y);
  rows("test", ds.x_test, ds.y_test);
  if (!out) throw std::runtime_error("failed writing " + path);
}

Dataset read_dataset(const std::string& path) {
  const Table t = read_table(path);
  if (t.header.size() < 3 || t.header.front() != "split" || t.header.back() != "y")
    throw InvalidArgument(path + ": expected header split,x0,...,y");
  const Index d = static_cast<Index>(t.header.size()) - 2;
  std::vector<std::size_t> train, test;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r][0] == "train") train.push_back(r);
    else if (t.rows[r][0] == "test") test.push_back(r);
    else throw std::runtime_error(path + ": row " + std::to_string(r + 2) + ", column 'split': expected train or test");
  }
  Dataset ds;
  ds.name = path;
  auto fill = [&](const std::vector<std::size_t>& idx, Points& x, Vector& y) {
    x.resize(static_cast<Index>(idx.size()), d);
    y.resize(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (Index c = 0; c < d; ++c) x(static_cast<Index>(i), c) = cell_value(t, idx[i], static_cast<std::size_t>(c) + 1, path);
      y[static_cast<Index>(i)] = cell_value(t, idx[i], t.header.size() - 1, path);
    }
  };
  fill(train, ds.x, ds.y);
  fill(test, ds.x_test, ds.y_test);
  ds.metadata["source"] = path;
  return ds;
}

}  // namespace kcg::harness
