#include "kcg/harness/config.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kcg/errors.hpp"
#include "kcg/harness/records.hpp"

namespace kcg::harness {

namespace {

constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::Exact, "exact"}, {Method::CgTextbook, "cg-textbook"}, {Method::CgReorth, "cg-reorth"},
    {Method::Kmcg, "kmcg"},   {Method::Sor, "sor"},                {Method::Dtc, "dtc"},
    {Method::Fitc, "fitc"},   {Method::Vfe, "vfe"},                {Method::Pbr, "pbr"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

long long to_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const std::string t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw InvalidArgument("config: " + key + ": expected an integer, got '" + text + "'");
  return v;
}

double to_real(const std::string& key, const std::string& text) {
  try {
    return parse_double(trim(text));
  } catch (const std::runtime_error&) {
    throw InvalidArgument("config: " + key + ": expected a number, got '" + text + "'");
  }
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& [method, name] : kMethodNames)
    if (method == m) return name;
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (const auto& [method, n] : kMethodNames)
    if (name == n) return method;
  throw InvalidArgument("unknown method '" + name + "'");
}

std::vector<Index> parse_steps(const std::string& text) {
  std::vector<Index> out;
  for (const std::string& item : split_list(text)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(static_cast<Index>(to_integer("schedule.steps", item)));
      continue;
    }
    const std::string rest = item.substr(dots + 2);
    const auto colon = rest.find(':');
    const long long first = to_integer("schedule.steps", item.substr(0, dots));
    const long long last = to_integer("schedule.steps", rest.substr(0, colon));
    const long long stride = colon == std::string::npos ? 1 : to_integer("schedule.steps", rest.substr(colon + 1));
    if (stride < 1 || last < first) throw InvalidArgument("config: schedule.steps: bad range '" + item + "'");
    for (long long p = first; p <= last; p += stride) out.push_back(static_cast<Index>(p));
  }
  return out;
}

int resolve_threads(int configured) {
  if (const char* env = std::getenv("KCG_THREADS")) {
    int v = 0;
    const std::string s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && v > 0) return v;
  }
  return configured < 1 ? 1 : configured;
}

Kernel ExperimentConfig::kernel(Index dim) const {
  if (metric.size() == 1) return Kernel::isotropic(family, dim, metric[0], amplitude);
  if (metric.size() != dim) throw DimensionMismatch("config: kernel metric has the wrong number of entries");
  return Kernel(family, metric, amplitude);
}

void ExperimentConfig::validate() const {
  if (!(noise > 0.0)) throw InvalidArgument("config: kernel.noise must be positive");
  if (repetitions < 1) throw InvalidArgument("config: schedule.repetitions must be at least 1");
  if (steps.empty()) throw InvalidArgument("config: schedule.steps must not be empty");
  for (Index p : steps)
    if (p < 1) throw InvalidArgument("config: schedule.steps entries must be positive");
  if (methods.empty()) throw InvalidArgument("config: methods.list must not be empty");
  if (inducing_cap < 1) throw InvalidArgument("config: schedule.inducing_cap must be positive");
  if (budget == BudgetRule::Fixed && fixed_m < 1) throw InvalidArgument("config: schedule.fixed_m must be positive");
  if (!(tolerance >= 0.0)) throw InvalidArgument("config: methods.tolerance must be nonnegative");
  if (!(dataset.test_fraction >= 0.0 && dataset.test_fraction < 1.0))
    throw InvalidArgument("config: dataset.test_fraction must lie in [0, 1)");
}

ExperimentConfig load_config(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidArgument("config: " + std::string(e.what()));
  }
  ExperimentConfig c;
  auto get = [&](const std::string& key) { return tree.get_optional<std::string>(key); };

  if (auto v = get("dataset.source")) c.dataset.kind = trim(*v);
  if (auto v = get("dataset.path")) c.dataset.path = trim(*v);
  if (auto v = get("dataset.target")) c.dataset.target = trim(*v);
  if (auto v = get("dataset.test_fraction")) c.dataset.test_fraction = to_real("dataset.test_fraction", *v);
  if (auto v = get("dataset.seed")) c.dataset.seed = static_cast<std::uint64_t>(to_integer("dataset.seed", *v));
  if (auto v = get("dataset.toy_noise")) c.dataset.toy_noise = to_real("dataset.toy_noise", *v);
  if (auto v = get("dataset.grid_g")) c.dataset.grid_g = static_cast<Index>(to_integer("dataset.grid_g", *v));
  if (auto v = get("dataset.grid_d")) c.dataset.grid_d = static_cast<Index>(to_integer("dataset.grid_d", *v));

  if (auto v = get("kernel.family")) c.family = parse_kernel_family(trim(*v));
  if (auto v = get("kernel.metric")) {
    const auto parts = split_list(*v);
    if (parts.empty()) throw InvalidArgument("config: kernel.metric must not be empty");
    c.metric.resize(static_cast<Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) c.metric[static_cast<Index>(i)] = to_real("kernel.metric", parts[i]);
  }
  if (auto v = get("kernel.amplitude")) c.amplitude = to_real("kernel.amplitude", *v);
  if (auto v = get("kernel.noise")) c.noise = to_real("kernel.noise", *v);

  if (auto v = get("methods.list")) {
    c.methods.clear();
    for (const auto& name : split_list(*v)) c.methods.push_back(parse_method(name));
  }
  if (auto v = get("methods.kmcg_inducing")) c.kmcg_inducing = static_cast<Index>(to_integer("methods.kmcg_inducing", *v));
  if (auto v = get("methods.tolerance")) c.tolerance = to_real("methods.tolerance", *v);
  if (auto v = get("methods.exact_limit")) c.exact_limit = static_cast<Index>(to_integer("methods.exact_limit", *v));

  if (auto v = get("schedule.steps")) c.steps = parse_steps(*v);
  if (auto v = get("schedule.budget")) {
    const std::string b = trim(*v);
    if (b == "sqrt-np") c.budget = BudgetRule::SqrtNP;
    else if (b == "fixed") c.budget = BudgetRule::Fixed;
    else throw InvalidArgument("config: schedule.budget must be sqrt-np or fixed");
  }
  if (auto v = get("schedule.fixed_m")) c.fixed_m = static_cast<Index>(to_integer("schedule.fixed_m", *v));
  if (auto v = get("schedule.repetitions")) c.repetitions = static_cast<Index>(to_integer("schedule.repetitions", *v));
  if (auto v = get("schedule.seed")) c.seed = static_cast<std::uint64_t>(to_integer("schedule.seed", *v));
  if (auto v = get("schedule.inducing_cap")) c.inducing_cap = static_cast<Index>(to_integer("schedule.inducing_cap", *v));

  if (auto v = get("output.path")) c.output = trim(*v);
  if (auto v = get("output.threads")) c.threads = static_cast<int>(to_integer("output.threads", *v));
  c.validate();
  return c;
}

}  // namespace kcg::harness
