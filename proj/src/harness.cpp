#include "ifvb/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "ifvb/errors.hpp"
#include "ifvb/version.hpp"

namespace ifvb {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt(v[i]);
  }
  return out;
}

Eigen::VectorXd parse_vector(const std::string& s, const std::string& key) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      vals.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError(key + ": cannot parse '" + cell + "' as a number");
    }
  }
  if (vals.empty()) throw ConfigError(key + ": empty value");
  return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": cannot parse '" + s + "' as a number");
  }
}

long parse_long(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": cannot parse '" + s + "' as an integer");
  }
}

constexpr const char* kTraceHeader =
    "iter,elapsed_ms,elbo,param_error,grad_norm,min_denominator,fallback_count";

// Defaults that differ per experiment: model, starting point, schedule,
// regularization, iteration budget.
void apply_experiment_defaults(ExperimentSpec& spec) {
  if (spec.experiment == "example1") {
    spec.model_id = "bernoulli_beta";
    spec.lambda0 = Eigen::Vector2d(5.0, 45.0);
    spec.config.c_alpha = 10.0;
    spec.config.c_alpha_prime = 1.0;
    spec.config.alpha = 0.6;
    spec.config.fisher.c_beta = 0.0;
    spec.config.max_iters = 5000;
    // Exact natural-gradient and Euclidean ascent run on the reference 1/(1+k) schedule.
    spec.schedule_overrides["ngvb"] = ScheduleOverride{1.0, 1.0, 1.0};
    spec.schedule_overrides["sga"] = ScheduleOverride{1.0, 1.0, 1.0};
  } else if (spec.experiment == "example2") {
    spec.model_id = "poisson_loglinear";
    GaussianFullFamily family(3);
    spec.lambda0 =
        family.pack(Eigen::VectorXd::Zero(3), 1e-2 * Eigen::MatrixXd::Identity(3, 3));
    spec.config.c_alpha = 1.0;
    spec.config.c_alpha_prime = 1000.0;
    spec.config.alpha = 0.75;
    spec.config.fisher.c_beta = 1.0;
    spec.config.fisher.beta = 0.2;  // must stay below alpha - 1/2
    spec.config.max_iters = 3000;
    spec.config.tol = 0.0;  // fixed iteration budget
  } else if (spec.experiment == "example5") {
    spec.model_id = "normal_invgamma";
    const Dataset d = NormalInvGammaModel::builtin_data();
    spec.lambda0 = Eigen::Vector4d(d.response.mean(), 0.5, 1.0, 1.0);
    spec.config.c_alpha = 1.0;
    spec.config.c_alpha_prime = 10.0;
    spec.config.alpha = 0.7;
    spec.config.fisher.c_beta = 1.0;
    spec.config.fisher.beta = 0.15;
    spec.config.max_iters = 20000;
  } else if (spec.experiment != "custom") {
    throw ConfigError("experiment: unknown value '" + spec.experiment + "'");
  }
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.optimizers.empty()) throw ConfigError("optimizer: at least one required");
  if (spec.experiment == "custom") {
    if (spec.model_id.empty()) throw ConfigError("model: required for custom experiments");
    if (spec.lambda0.size() == 0) throw ConfigError("lambda0: required for custom experiments");
  }
  if (spec.model_id != "bernoulli_beta" && spec.model_id != "poisson_loglinear" &&
      spec.model_id != "normal_invgamma")
    throw ConfigError("model: unknown value '" + spec.model_id + "'");
  if (spec.data_source != "builtin" && spec.data_source != "simulate" &&
      spec.data_source.size() < 4)
    throw ConfigError("data: expected builtin, simulate, or a .csv path");
  for (const auto& [name, ov] : spec.schedule_overrides) {
    (void)ov;
    optimizer_from_string(name);  // throws on junk
  }
  for (OptimizerKind kind : spec.optimizers) {
    const OptimizerConfig cfg = spec.config_for(kind);
    cfg.validate();
    if (kind == OptimizerKind::ifvb || kind == OptimizerKind::aifvb)
      cfg.fisher.validate_against_alpha(cfg.alpha);
    if (kind == OptimizerKind::ngvb) {
      // Needs an analytic Fisher or the Gaussian/Poisson two-line update.
      if (spec.model_id == "poisson_loglinear") continue;
      const auto family = family_for_model(spec.model_id, 0);
      if (!family->exact_fisher(family->project_to_domain(spec.lambda0)))
        throw ConfigError("optimizer: ngvb is not supported for model " + spec.model_id);
    }
  }
}

}  // namespace

OptimizerConfig ExperimentSpec::config_for(OptimizerKind kind) const {
  OptimizerConfig cfg = config;
  const auto it = schedule_overrides.find(to_string(kind));
  if (it != schedule_overrides.end()) {
    if (it->second.c_alpha) cfg.c_alpha = *it->second.c_alpha;
    if (it->second.c_alpha_prime) cfg.c_alpha_prime = *it->second.c_alpha_prime;
    if (it->second.alpha) cfg.alpha = *it->second.alpha;
  }
  return cfg;
}

bool operator==(const ExperimentSpec& a, const ExperimentSpec& b) {
  return render_spec(a) == render_spec(b);
}

ExperimentSpec parse_spec(const std::string& text) {
  // Strip comments, then read whitespace-separated key=value tokens.
  std::string cleaned;
  std::stringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    cleaned += line + '\n';
  }
  std::vector<std::pair<std::string, std::string>> entries;
  std::stringstream tokens(cleaned);
  std::string token;
  while (tokens >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("spec: expected key=value, got '" + token + "'");
    entries.emplace_back(token.substr(0, eq), token.substr(eq + 1));
  }

  auto find = [&entries](const std::string& key) -> std::optional<std::string> {
    std::optional<std::string> out;
    for (const auto& [k, v] : entries)
      if (k == key) out = v;  // last occurrence wins
    return out;
  };

  ExperimentSpec spec;
  const auto experiment = find("experiment");
  if (!experiment) throw ConfigError("experiment: key is required");
  spec.experiment = *experiment;
  apply_experiment_defaults(spec);

  const std::vector<std::string> schedule_keys = {"c_alpha", "c_alpha_prime", "alpha"};
  for (const auto& [key, value] : entries) {
    if (key == "experiment") {
      continue;
    } else if (key == "model") {
      if (spec.experiment != "custom" && value != spec.model_id)
        throw ConfigError("model: fixed to " + spec.model_id + " for " + spec.experiment);
      spec.model_id = value;
    } else if (key == "optimizer") {
      spec.optimizers.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) spec.optimizers.push_back(optimizer_from_string(item));
    } else if (key == "seed") {
      spec.config.seed = static_cast<std::uint64_t>(parse_long(value, key));
    } else if (key == "lambda0") {
      spec.lambda0 = parse_vector(value, key);
    } else if (key == "data") {
      spec.data_source = value;
    } else if (key == "n") {
      spec.simulate_n = parse_long(value, key);
    } else if (key == "sigma0_sq") {
      spec.sigma0_sq = parse_double(value, key);
    } else if (key == "out") {
      spec.out_dir = value;
    } else if (key == "c_alpha") {
      spec.config.c_alpha = parse_double(value, key);
    } else if (key == "c_alpha_prime") {
      spec.config.c_alpha_prime = parse_double(value, key);
    } else if (key == "alpha") {
      spec.config.alpha = parse_double(value, key);
    } else if (key == "epsilon") {
      spec.config.fisher.epsilon = parse_double(value, key);
    } else if (key == "c_beta") {
      spec.config.fisher.c_beta = parse_double(value, key);
    } else if (key == "beta") {
      spec.config.fisher.beta = parse_double(value, key);
    } else if (key == "capacity") {
      spec.config.fisher.capacity = parse_long(value, key);
    } else if (key == "fisher_mode") {
      if (value == "dense")
        spec.config.fisher_mode = FisherMode::dense;
      else if (value == "compact")
        spec.config.fisher_mode = FisherMode::compact;
      else
        throw ConfigError("fisher_mode: expected dense or compact");
    } else if (key == "fisher_samples") {
      spec.config.fisher_samples = parse_long(value, key);
    } else if (key == "B") {
      spec.config.gradient_samples = parse_long(value, key);
    } else if (key == "w") {
      spec.config.averaging_exponent = parse_double(value, key);
    } else if (key == "clip") {
      spec.config.clip_threshold = value == "none" ? 0.0 : parse_double(value, key);
    } else if (key == "tol") {
      spec.config.tol = parse_double(value, key);
    } else if (key == "max_iters") {
      spec.config.max_iters = parse_long(value, key);
    } else if (key == "eval_b") {
      spec.eval_samples = parse_long(value, key);
    } else {
      // Per-optimizer schedule overrides: <optimizer>.<schedule key>.
      const auto dot = key.find('.');
      bool handled = false;
      if (dot != std::string::npos) {
        const std::string opt = key.substr(0, dot);
        const std::string field = key.substr(dot + 1);
        if (std::find(schedule_keys.begin(), schedule_keys.end(), field) !=
            schedule_keys.end()) {
          optimizer_from_string(opt);
          auto& ov = spec.schedule_overrides[opt];
          const double v = parse_double(value, key);
          if (field == "c_alpha") ov.c_alpha = v;
          if (field == "c_alpha_prime") ov.c_alpha_prime = v;
          if (field == "alpha") ov.alpha = v;
          handled = true;
        }
      }
      if (!handled) throw ConfigError("spec: unknown key '" + key + "'");
    }
  }

  if (spec.optimizers.empty()) spec.optimizers = {OptimizerKind::ifvb};
  validate_spec(spec);
  return spec;
}

ExperimentSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

std::string render_spec(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "experiment=" << spec.experiment << '\n';
  out << "model=" << spec.model_id << '\n';
  out << "optimizer=";
  for (size_t i = 0; i < spec.optimizers.size(); ++i)
    out << (i ? "," : "") << to_string(spec.optimizers[i]);
  out << '\n';
  out << "seed=" << spec.config.seed << '\n';
  out << "lambda0=" << join_vector(spec.lambda0) << '\n';
  out << "data=" << spec.data_source << '\n';
  out << "n=" << spec.simulate_n << '\n';
  if (spec.model_id == "poisson_loglinear") out << "sigma0_sq=" << fmt(spec.sigma0_sq) << '\n';
  if (!spec.out_dir.empty()) out << "out=" << spec.out_dir << '\n';
  out << "c_alpha=" << fmt(spec.config.c_alpha) << '\n';
  out << "c_alpha_prime=" << fmt(spec.config.c_alpha_prime) << '\n';
  out << "alpha=" << fmt(spec.config.alpha) << '\n';
  out << "epsilon=" << fmt(spec.config.fisher.epsilon) << '\n';
  out << "c_beta=" << fmt(spec.config.fisher.c_beta) << '\n';
  out << "beta=" << fmt(spec.config.fisher.beta) << '\n';
  out << "capacity=" << spec.config.fisher.capacity << '\n';
  out << "fisher_mode=" << (spec.config.fisher_mode == FisherMode::dense ? "dense" : "compact")
      << '\n';
  out << "fisher_samples=" << spec.config.fisher_samples << '\n';
  out << "B=" << spec.config.gradient_samples << '\n';
  out << "w=" << fmt(spec.config.averaging_exponent) << '\n';
  out << "clip=" << (spec.config.clip_threshold <= 0.0 ? "none" : fmt(spec.config.clip_threshold))
      << '\n';
  out << "tol=" << fmt(spec.config.tol) << '\n';
  out << "max_iters=" << spec.config.max_iters << '\n';
  out << "eval_b=" << spec.eval_samples << '\n';
  for (const auto& [name, ov] : spec.schedule_overrides) {
    if (ov.c_alpha) out << name << ".c_alpha=" << fmt(*ov.c_alpha) << '\n';
    if (ov.c_alpha_prime) out << name << ".c_alpha_prime=" << fmt(*ov.c_alpha_prime) << '\n';
    if (ov.alpha) out << name << ".alpha=" << fmt(*ov.alpha) << '\n';
  }
  return out.str();
}

Dataset make_dataset(const ExperimentSpec& spec) {
  if (spec.data_source.size() > 4 &&
      spec.data_source.substr(spec.data_source.size() - 4) == ".csv") {
    std::ifstream probe(spec.data_source);
    if (!probe) throw ConfigError("data: cannot open " + spec.data_source);
    std::string first;
    std::getline(probe, first);
    const int cols = 1 + static_cast<int>(std::count(first.begin(), first.end(), ','));
    return Dataset::load_csv(spec.data_source, cols - 1);
  }
  const bool simulate = spec.data_source == "simulate";
  Rng rng = Rng::stream(spec.config.seed, Stream::data);
  if (spec.model_id == "bernoulli_beta") {
    if (simulate) return BernoulliBetaModel::simulate(spec.simulate_n, 0.3, rng);
    return BernoulliBetaModel::fixed_count_data(200, 57);
  }
  if (spec.model_id == "poisson_loglinear") {
    // Builtin data for this model is itself simulated, deterministically from
    // the seed's data stream.
    return PoissonLoglinearModel::simulate(spec.simulate_n, 3, rng);
  }
  if (simulate) throw ConfigError("data: " + spec.model_id + " has a fixed builtin dataset");
  return NormalInvGammaModel::builtin_data();
}

std::shared_ptr<const Model> make_model(const ExperimentSpec& spec, Dataset data) {
  if (spec.model_id == "bernoulli_beta")
    return std::make_shared<BernoulliBetaModel>(std::move(data));
  if (spec.model_id == "poisson_loglinear")
    return std::make_shared<PoissonLoglinearModel>(std::move(data), spec.sigma0_sq);
  return std::make_shared<NormalInvGammaModel>(std::move(data));
}

std::shared_ptr<const Family> family_for_model(const std::string& model_id, int covariate_dim) {
  if (model_id == "bernoulli_beta") return std::make_shared<BetaFamily>();
  if (model_id == "poisson_loglinear")
    return std::make_shared<GaussianFullFamily>(covariate_dim > 0 ? covariate_dim : 3);
  if (model_id == "normal_invgamma") return std::make_shared<GaussianInvGammaFamily>();
  throw ConfigError("model: unknown value '" + model_id + "'");
}

void emit_trace(const std::vector<TraceRecord>& records, const std::string& path,
                const std::vector<std::string>& metadata, const std::string& status) {
  if (records.empty()) throw ConfigError("emit_trace: no records");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  for (const auto& line : metadata) out << "# " << line << '\n';
  out << kTraceHeader << '\n';
  auto field = [](double v) { return std::isfinite(v) ? fmt(v) : std::string(); };
  for (const auto& r : records) {
    out << r.iter << ',' << fmt(r.elapsed_ms) << ',' << field(r.elbo) << ','
        << field(r.param_error) << ',' << field(r.grad_norm) << ','
        << field(r.min_denominator) << ',' << r.fallback_count << '\n';
  }
  if (!status.empty()) out << "# status: " << status << '\n';
  if (!out) throw ConfigError("write failed for " + path);
}

ParsedTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  ParsedTrace parsed;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      parsed.metadata.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
      continue;
    }
    if (!header_seen) {
      if (line != kTraceHeader) throw ConfigError(path + ": unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 7) cells.push_back("");
    auto num = [](const std::string& c) {
      return c.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(c);
    };
    TraceRecord r;
    r.iter = std::stol(cells[0]);
    r.elapsed_ms = num(cells[1]);
    r.elbo = num(cells[2]);
    r.param_error = num(cells[3]);
    r.grad_norm = num(cells[4]);
    r.min_denominator = num(cells[5]);
    r.fallback_count = cells[6].empty() ? 0 : std::stol(cells[6]);
    parsed.records.push_back(r);
  }
  return parsed;
}

namespace {

OptimizerOutcome run_one(const ExperimentSpec& spec, OptimizerKind kind, const Model& model,
                         const Family& family, const std::string& out_dir) {
  const OptimizerConfig cfg = spec.config_for(kind);
  DiagnosticsConfig diag;
  diag.elbo_eval_samples = spec.eval_samples;
  diag.reference = model.optimum();

  const RunResult result = run(kind, model, family, spec.lambda0, cfg, diag);

  std::vector<std::string> metadata;
  metadata.push_back(std::string("ifvb ") + kVersion);
  metadata.push_back("trace_optimizer = " + to_string(kind));
  std::stringstream rendered(render_spec(spec));
  std::string line;
  while (std::getline(rendered, line)) metadata.push_back(line);

  const std::string path = out_dir + "/" + spec.experiment + "_" + to_string(kind) + ".csv";
  std::string status = to_string(result.status);
  if (!result.message.empty()) status += " (" + result.message + ")";
  if (!result.trace.empty()) {
    emit_trace(result.trace, path, metadata, status);
  } else {
    std::ofstream out(path);
    for (const auto& m : metadata) out << "# " << m << '\n';
    out << kTraceHeader << '\n';
    out << "# status: " << status << '\n';
  }
  return OptimizerOutcome{kind, path, result.status, result.message, result.reported(kind)};
}

}  // namespace

std::vector<OptimizerOutcome> run_experiment(const ExperimentSpec& spec, bool parallel) {
  std::string out_dir = spec.out_dir;
  if (out_dir.empty()) {
    const char* env = std::getenv(kOutDirEnv);
    out_dir = env != nullptr && *env != '\0' ? env : ".";
  }

  const Dataset data = make_dataset(spec);
  const auto model = make_model(spec, data);
  const auto family =
      family_for_model(spec.model_id, static_cast<int>(data.covariates.cols()));
  family->check_domain(spec.lambda0);

  std::vector<OptimizerOutcome> outcomes(spec.optimizers.size(),
                                         OptimizerOutcome{OptimizerKind::sga, "", RunStatus::numeric_error, "", {}});
  if (parallel && spec.optimizers.size() > 1) {
    std::vector<std::future<OptimizerOutcome>> futures;
    for (OptimizerKind kind : spec.optimizers) {
      futures.push_back(std::async(std::launch::async, [&, kind] {
        return run_one(spec, kind, *model, *family, out_dir);
      }));
    }
    for (size_t i = 0; i < futures.size(); ++i) outcomes[i] = futures[i].get();
  } else {
    for (size_t i = 0; i < spec.optimizers.size(); ++i)
      outcomes[i] = run_one(spec, spec.optimizers[i], *model, *family, out_dir);
  }
  return outcomes;
}

FisherDiagnosticReport fisher_diagnostic(const Family& family, const Eigen::VectorXd& lambda,
                                         long s_max, const FisherConfig& config,
                                         std::uint64_t seed) {
  const auto fisher = family.exact_fisher(lambda);
  if (!fisher)
    throw ConfigError("fisher_diagnostic: family " + family.name() +
                      " has no analytic Fisher matrix");
  const double fisher_norm = fisher->norm();
  const int dim = family.dim();

  FisherConfig plain_cfg = config;
  plain_cfg.c_beta = 0.0;
  FisherConfig reg_cfg = config;
  if (!(reg_cfg.c_beta > 0.0)) reg_cfg.c_beta = 1.0;

  FisherInverseState plain(dim, plain_cfg, FisherMode::dense);
  FisherInverseState reg(dim, reg_cfg, FisherMode::dense);

  Rng score_rng = Rng::stream(seed, Stream::fisher_score);
  Rng reg_rng = Rng::stream(seed, Stream::regularizer);

  std::vector<long> checkpoints;
  for (long s = 1; s < s_max; s = s < 10 ? s + 1 : s + std::max<long>(1, s / 4))
    checkpoints.push_back(s);
  checkpoints.push_back(s_max);

  auto rel_error = [&](const FisherInverseState& state, long s) {
    const Eigen::MatrixXd inv = state.dense_matrix();
    const Eigen::MatrixXd accumulated = inv.inverse();  // small D, exactness checked elsewhere
    return (accumulated / static_cast<double>(s) - *fisher).norm() / fisher_norm;
  };

  FisherDiagnosticReport report;
  const double err0 =
      (Eigen::MatrixXd::Identity(dim, dim) - *fisher).norm() / fisher_norm;
  report.rows.push_back({0, err0, err0});

  long next = 0;
  for (long s = 1; s <= s_max; ++s) {
    const Eigen::VectorXd theta = family.sample(lambda, score_rng);
    const Eigen::VectorXd phi = family.score(lambda, theta);
    plain.absorb_score(phi);
    reg.absorb_score(phi);
    reg.absorb_regularizer(reg_rng.normal_vector(dim));
    if (next < static_cast<long>(checkpoints.size()) && s == checkpoints[next]) {
      report.rows.push_back({s, rel_error(plain, s), rel_error(reg, s)});
      ++next;
    }
  }
  report.final_err_plain = report.rows.back().err_plain;
  report.final_err_reg = report.rows.back().err_reg;
  return report;
}

void save_fisher_diagnostic(const FisherDiagnosticReport& report, const std::string& path,
                            const std::vector<std::string>& metadata) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  for (const auto& line : metadata) out << "# " << line << '\n';
  out << "s,rel_frobenius_error,rel_frobenius_error_regularized\n";
  for (const auto& row : report.rows)
    out << row.s << ',' << fmt(row.err_plain) << ',' << fmt(row.err_reg) << '\n';
}

}  // namespace ifvb
