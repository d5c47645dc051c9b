#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "hetfit/augment.hpp"
#include "hetfit/dataset.hpp"
#include "hetfit/error.hpp"
#include "hetfit/model_io.hpp"
#include "hetfit/physfit.hpp"
#include "hetfit/scaling.hpp"
#include "hetfit/select.hpp"
#include "hetfit/stats.hpp"
#include "hetfit/text.hpp"
#include "hetfit/tune.hpp"

namespace fs = std::filesystem;

namespace hetfit::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kDefaultInputs = {"power_w", "ud_v", "d_mm",
                                                 "h_mm",    "l_mm", "mdot_mg_s"};

constexpr const char* kDatasetFile = "dataset.csv";
constexpr const char* kScaledFile = "dataset_scaled.csv";
constexpr const char* kScalerFile = "scaler.txt";
constexpr const char* kIngestFile = "ingest.txt";
constexpr const char* kSyntheticFile = "synthetic.csv";
constexpr const char* kAugmentFile = "augment_stats.txt";
constexpr const char* kScalingFile = "scaling.csv";
constexpr const char* kPhysfitFile = "physfit.csv";
constexpr const char* kHistoryFile = "tune_history.csv";
constexpr const char* kBestFile = "best_arch.txt";
constexpr const char* kBorutaFile = "boruta.txt";
constexpr const char* kModelFile = "model.hfm";
constexpr const char* kMetricsFile = "train_metrics.txt";
constexpr const char* kReportFile = "report.txt";
constexpr const char* kManifestFile = "manifest.txt";

using KeyValues = std::map<std::string, std::string>;

std::string format_kv(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

KeyValues parse_kv(const std::string& content) {
  KeyValues kv;
  for (const auto& line : text::lines(content)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[std::string(text::trim(line.substr(0, eq)))] =
        std::string(text::trim(line.substr(eq + 1)));
  }
  return kv;
}

std::string num(double v) { return text::format_double(v); }

// ---------------------------------------------------------------------------
// Workspace and manifest. Each artifact is recorded with the hash of its
// content, the hash of the configuration that produced it and the content
// hashes of the artifacts it was derived from. `report` uses this to flag
// artifacts whose inputs changed after they were written.

struct ManifestEntry {
  std::string content;
  std::string config;
  std::vector<std::pair<std::string, std::string>> deps;
};

class Workspace {
 public:
  explicit Workspace(fs::path dir) : dir_(std::move(dir)) {}

  fs::path path(const std::string& name) const { return dir_ / name; }
  bool has(const std::string& name) const { return fs::exists(path(name)); }
  const fs::path& dir() const { return dir_; }

  std::string read(const std::string& name) const {
    return text::read_file(path(name).string());
  }

  void require(const std::string& name, const std::string& producer) const {
    if (!has(name)) {
      throw PreconditionError("missing " + path(name).string() + "; run `hetfit " +
                              producer + "` first");
    }
  }

  void write(const std::string& name, const std::string& content,
             const std::string& config, const std::vector<std::string>& deps) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    text::write_file(path(name).string(), content);
    auto manifest = load_manifest();
    ManifestEntry e;
    e.content = text::hex64(text::fnv1a(content));
    e.config = text::hex64(text::fnv1a(config));
    for (const auto& d : deps) {
      if (has(d)) e.deps.emplace_back(d, text::hex64(text::fnv1a(read(d))));
    }
    manifest[name] = std::move(e);
    save_manifest(manifest);
  }

  std::map<std::string, ManifestEntry> load_manifest() const {
    std::map<std::string, ManifestEntry> m;
    if (!has(kManifestFile)) return m;
    for (const auto& line : text::lines(read(kManifestFile))) {
      const auto f = text::split(line, ' ');
      if (f.size() != 5 || f[0] != "artifact") continue;
      ManifestEntry e{f[2], f[3], {}};
      if (f[4] != "-") {
        for (const auto& d : text::split(f[4], ';')) {
          const auto c = d.rfind(':');
          if (c != std::string::npos) e.deps.emplace_back(d.substr(0, c), d.substr(c + 1));
        }
      }
      m[f[1]] = std::move(e);
    }
    return m;
  }

 private:
  void save_manifest(const std::map<std::string, ManifestEntry>& m) const {
    std::string out;
    for (const auto& [name, e] : m) {
      std::string deps;
      for (const auto& [d, h] : e.deps) deps += (deps.empty() ? "" : ";") + d + ":" + h;
      out += "artifact " + name + " " + e.content + " " + e.config + " " +
             (deps.empty() ? "-" : deps) + "\n";
    }
    text::write_file(path(kManifestFile).string(), out);
  }

  fs::path dir_;
};

// ---------------------------------------------------------------------------

std::string valid_columns() {
  std::vector<std::string> names;
  for (auto n : feature_names()) names.emplace_back(n);
  return text::join(names, ", ");
}

std::size_t column_or_usage(const std::string& name) {
  const auto idx = feature_index(name);
  if (!idx) {
    throw UsageError("unknown column '" + name + "'; valid columns: " + valid_columns());
  }
  return *idx;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& p : text::split(s, ',')) {
    const auto t = std::string(text::trim(p));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

Dataset load_dataset(const Workspace& ws) {
  ws.require(kDatasetFile, "ingest <csv>");
  return parse_dataset(ws.read(kDatasetFile));
}

// Real records plus the kept synthetic rows (when augment has been run).
// Synthetic rows that fail record validation are left out.
Dataset load_pool(const Workspace& ws) {
  const auto real = load_dataset(ws);
  if (!ws.has(kSyntheticFile)) return real;
  auto records = real.records();
  const auto rows = text::lines(ws.read(kSyntheticFile));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = text::split(rows[i], ',');
    if (f.size() != 1 + kRecordFieldCount + 2 || f.back() != "1") continue;
    Eigen::VectorXd v(static_cast<Eigen::Index>(kRecordFieldCount));
    bool ok = true;
    for (std::size_t j = 0; j < kRecordFieldCount; ++j) {
      const auto d = text::parse_double(f[1 + j]);
      ok = ok && d.has_value();
      if (d) v(static_cast<Eigen::Index>(j)) = *d;
    }
    if (!ok) continue;
    auto rec = record_from_features(f[0], v);
    try {
      validate_record(rec);
    } catch (const ValidationError&) {
      continue;
    }
    records.push_back(std::move(rec));
  }
  return Dataset(std::move(records));
}

Eigen::MatrixXd columns(const Eigen::MatrixXd& m, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  }
  return out;
}

struct Problem {
  std::vector<std::string> inputs;
  std::string target;
  ScalerParams x_scaler;
  ScalerParams y_scaler;
  tune::Split split;
  std::size_t pool_rows = 0;
};

Problem make_problem(const Workspace& ws, const std::vector<std::string>& inputs,
                     const std::string& target, double val_fraction,
                     std::uint64_t seed) {
  std::vector<std::size_t> in_cols;
  for (const auto& n : inputs) {
    if (n == target) throw UsageError("target '" + target + "' is also an input");
    in_cols.push_back(column_or_usage(n));
  }
  if (in_cols.empty()) throw UsageError("no input columns given");
  const auto t_col = column_or_usage(target);
  const auto pool = load_pool(ws);
  const auto m = pool.feature_matrix();
  const Eigen::MatrixXd x = columns(m, in_cols);
  const Eigen::MatrixXd y = columns(m, {t_col});
  Problem p;
  p.inputs = inputs;
  p.target = target;
  p.x_scaler = fit_scaler(x, inputs);
  p.y_scaler = fit_scaler(y, {target});
  p.split = tune::make_split(p.x_scaler.scale(x), p.y_scaler.scale(y),
                             1.0 - val_fraction, seed);
  p.pool_rows = pool.size();
  return p;
}

void check_fraction(double f) {
  if (!(f > 0.0 && f < 1.0)) throw UsageError("--val-fraction must lie in (0, 1)");
}

// ---------------------------------------------------------------------------
// Commands

struct Ctx {
  Environment env;
  Workspace ws;
  std::ostream& out;
};

struct IngestArgs {
  std::string path;
  bool permissive = false;
};

int cmd_ingest(Ctx& c, const IngestArgs& a) {
  IngestOptions opts;
  opts.permissive = a.permissive;
  IngestResult res;
  try {
    res = ingest_csv(text::read_file(a.path), opts);
  } catch (const ValidationError& e) {
    c.out << "rejected " << a.path << "\n" << e.what() << "\n";
    throw;
  }
  const auto& ds = res.dataset;
  const auto scaler = fit_scaler(ds);
  std::string scaler_txt;
  for (const auto& r : scaler.ranges()) {
    scaler_txt += "range " + r.name + " " + num(r.min) + " " + num(r.max) + "\n";
  }
  const auto scaled = scale(ds, scaler);
  std::string scaled_csv = "name";
  for (auto n : feature_names()) scaled_csv += "," + std::string(n);
  scaled_csv += "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    scaled_csv += ds[i].name;
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
      scaled_csv += "," + num(scaled(static_cast<Eigen::Index>(i), j));
    }
    scaled_csv += "\n";
  }
  const std::string config = "ingest permissive=" + std::to_string(a.permissive);
  c.ws.write(kDatasetFile, to_csv(ds), config, {});
  c.ws.write(kScalerFile, scaler_txt, config, {kDatasetFile});
  c.ws.write(kScaledFile, scaled_csv, config, {kDatasetFile, kScalerFile});
  c.ws.write(kIngestFile,
             format_kv({{"source", a.path},
                        {"records", std::to_string(ds.size())},
                        {"skipped", std::to_string(res.issues.size())}}),
             config, {kDatasetFile});

  c.out << "records: " << ds.size() << "\n";
  c.out << "errors: " << res.issues.size() << "\n";
  for (const auto& is : res.issues) {
    c.out << "  line " << is.line;
    if (is.column) c.out << " column " << is.column;
    c.out << ": " << is.message << "\n";
  }
  c.out << "wrote " << c.ws.path(kDatasetFile).string() << "\n";
  return kOk;
}

struct AugmentArgs {
  std::size_t n = 512;
  augment::GanConfig gan;
};

int cmd_augment(Ctx& c, AugmentArgs a) {
  const auto ds = load_dataset(c.ws);
  a.gan.seed = c.env.seed;
  std::string csv;
  double mape = 0.0, outliers = 0.0, acc = 0.0;
  std::size_t kept = 0;
  if (a.n == 0) {
    csv = augment::synthetic_csv(augment::SyntheticBatch{});
  } else {
    const auto res = augment::augment_dataset(ds, a.n, a.gan);
    csv = augment::synthetic_csv(res.batch);
    mape = res.batch.mean_mape();
    outliers = res.batch.outlier_rate();
    acc = res.discriminator_accuracy;
    kept = res.batch.kept_count();
  }
  const std::string config =
      "augment n=" + std::to_string(a.n) + " seed=" + std::to_string(a.gan.seed) +
      " epochs=" + std::to_string(a.gan.epochs) + " glr=" + num(a.gan.generator_lr) +
      " dlr=" + num(a.gan.discriminator_lr) + " noise=" + std::to_string(a.gan.noise_dim);
  c.ws.write(kSyntheticFile, csv, config, {kDatasetFile});
  const auto stats = format_kv({{"generated", std::to_string(a.n)},
                                {"kept", std::to_string(kept)},
                                {"mape_pct", num(mape)},
                                {"outlier_rate", num(outliers)},
                                {"discriminator_accuracy", num(acc)},
                                {"epochs", std::to_string(a.gan.epochs)},
                                {"seed", std::to_string(a.gan.seed)}});
  c.ws.write(kAugmentFile, stats, config, {kDatasetFile, kSyntheticFile});
  c.out << stats << "wrote " << c.ws.path(kSyntheticFile).string() << "\n";
  return kOk;
}

struct ScalingArgs {
  std::optional<double> power;
  std::optional<double> voltage;
};

int cmd_fit_scaling(Ctx& c, const ScalingArgs& a) {
  const auto ds = load_dataset(c.ws);
  const auto coeffs = fit_scaling(ds);
  std::string csv = "coefficient,value,sigma,r_squared,n\n";
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    const auto& f = coeffs.fits[r];
    csv += std::string(relation_name(static_cast<Relation>(r))) + "," + num(f.coefficient) +
           "," + num(f.sigma()) + "," + num(f.r_squared) + "," +
           std::to_string(coeffs.n_records) + "\n";
  }
  c.ws.write(kScalingFile, csv, "fit-scaling", {kDatasetFile});
  c.out << csv;
  if (a.power || a.voltage) {
    if (!a.power || !a.voltage) throw UsageError("--power and --voltage go together");
    const auto d = synthesize_design(*a.power, *a.voltage, coeffs);
    const auto row = [&](const char* name, double v, const Band& b) {
      c.out << name << "=" << num(v) << " [" << num(b.low) << ", " << num(b.high) << "]\n";
    };
    c.out << "design power_w=" << num(d.power_w) << " ud_v=" << num(d.ud_v) << "\n";
    row("d_mm", d.d_mm, d.d_band);
    row("h_mm", d.h_mm, d.h_band);
    row("mdot_mg_s", d.mdot_mg_s, d.mdot_band);
    row("thrust_mn", d.thrust_mn, d.thrust_band);
    row("isp_s", d.isp_s, d.isp_band);
    row("eta_anode", d.eta_anode, d.eta_band);
  }
  return kOk;
}

int cmd_physfit(Ctx& c, const physfit::FitConfig& cfg) {
  const auto ds = load_dataset(c.ws);
  const auto rep = physfit::fit_coefficients_gd(ds, cfg);
  const auto body = rep.summary() + "\n" +
                    format_kv({{"loss", num(rep.loss)},
                               {"gradient_norm", num(rep.gradient_norm)},
                               {"epochs_run", std::to_string(rep.epochs_run)},
                               {"converged", rep.converged ? "true" : "false"}});
  c.ws.write(kPhysfitFile, body,
             "physfit lr=" + num(cfg.learning_rate) + " epochs=" + std::to_string(cfg.epochs),
             {kDatasetFile});
  c.out << body;
  if (!rep.converged) c.out << "warning: coefficient fit did not converge\n";
  return kOk;
}

struct TuneArgs {
  std::string target = "thrust_mn";
  std::string inputs;
  int trials = 50;
  int epochs = 400;
  double val_fraction = 0.2;
};

int cmd_tune(Ctx& c, const TuneArgs& a) {
  check_fraction(a.val_fraction);
  if (a.trials < 1) throw UsageError("--trials must be at least 1");
  const auto inputs = a.inputs.empty() ? kDefaultInputs : split_list(a.inputs);
  const auto p = make_problem(c.ws, inputs, a.target, a.val_fraction, c.env.seed);
  tune::TuneConfig cfg;
  cfg.n_trials = a.trials;
  cfg.seed = c.env.seed;
  cfg.trial.seed = c.env.seed;
  cfg.trial.epochs = a.epochs;
  const auto res = tune::optimize(tune::SearchSpace{}, p.split, cfg);
  const auto& best = res.best_trial();
  const std::string config = "tune target=" + a.target + " inputs=" + text::join(inputs, ",") +
                             " trials=" + std::to_string(a.trials) + " epochs=" +
                             std::to_string(a.epochs) + " val=" + num(a.val_fraction) +
                             " seed=" + std::to_string(c.env.seed);
  std::vector<std::string> deps = {kDatasetFile};
  if (c.ws.has(kSyntheticFile)) deps.emplace_back(kSyntheticFile);
  c.ws.write(kHistoryFile, tune::history_csv(res.history), config, deps);
  const auto best_txt = format_kv({{"target", a.target},
                                   {"inputs", text::join(inputs, ",")},
                                   {"trial", std::to_string(best.id)},
                                   {"widths", tune::format_widths(best.params.widths)},
                                   {"activation", std::string(nn::to_string(best.params.activation))},
                                   {"optimizer", std::string(nn::to_string(best.params.optimizer))},
                                   {"learning_rate", num(best.params.learning_rate)},
                                   {"val_r2", num(best.score)}});
  c.ws.write(kBestFile, best_txt, config, deps);
  std::size_t failed = 0;
  for (const auto& t : res.history) failed += t.status != tune::TrialStatus::kComplete;
  c.out << "trials: " << res.history.size() << " (" << failed << " failed)\n";
  c.out << "best R2: " << num(best.score) << "\n" << best_txt;
  return kOk;
}

struct SelectArgs {
  std::string target = "thrust_mn";
  std::string inputs;
  int max_iter = 50;
};

int cmd_select(Ctx& c, const SelectArgs& a) {
  const auto inputs = a.inputs.empty() ? kDefaultInputs : split_list(a.inputs);
  std::vector<std::size_t> cols;
  for (const auto& n : inputs) {
    if (n == a.target) throw UsageError("target '" + a.target + "' is also a candidate");
    cols.push_back(column_or_usage(n));
  }
  const auto t_col = column_or_usage(a.target);
  const auto pool = load_pool(c.ws);
  const auto m = pool.feature_matrix();
  select::BorutaConfig cfg;
  cfg.max_iter = a.max_iter;
  cfg.seed = c.env.seed;
  const auto res = select::boruta(columns(m, cols), m.col(static_cast<Eigen::Index>(t_col)),
                                  inputs, cfg);
  const auto report = "target: " + a.target + "\n" + res.report();
  std::vector<std::string> deps = {kDatasetFile};
  if (c.ws.has(kSyntheticFile)) deps.emplace_back(kSyntheticFile);
  c.ws.write(kBorutaFile, report,
             "select target=" + a.target + " inputs=" + text::join(inputs, ",") +
                 " max_iter=" + std::to_string(a.max_iter) +
                 " seed=" + std::to_string(c.env.seed),
             deps);
  c.out << report;
  return kOk;
}

struct TrainArgs {
  std::string target;
  std::string inputs;
  std::string widths;
  std::string activation;
  std::string optimizer;
  std::optional<double> lr;
  int epochs = 1000;
  double val_fraction = 0.2;
};

int cmd_train(Ctx& c, const TrainArgs& a) {
  check_fraction(a.val_fraction);
  KeyValues best;
  if (c.ws.has(kBestFile)) best = parse_kv(c.ws.read(kBestFile));
  if (a.widths.empty() && best.empty()) {
    throw PreconditionError("no architecture: run `hetfit tune` first or pass --widths");
  }
  const auto pick = [&](const std::string& flag, const char* key, const std::string& dflt) {
    if (!flag.empty()) return flag;
    const auto it = best.find(key);
    return it != best.end() ? it->second : dflt;
  };
  const std::string target = pick(a.target, "target", "thrust_mn");
  const auto inputs = split_list(pick(a.inputs, "inputs", text::join(kDefaultInputs, ",")));

  tune::Hyperparameters hp;
  hp.widths = tune::parse_widths(pick(a.widths, "widths", ""));
  const auto act = nn::parse_activation(pick(a.activation, "activation", "relu"));
  const auto opt = nn::parse_optimizer(pick(a.optimizer, "optimizer", "adam"));
  if (!act) throw UsageError("unknown activation");
  if (!opt) throw UsageError("unknown optimizer");
  hp.activation = *act;
  hp.optimizer = *opt;
  if (a.lr) {
    hp.learning_rate = *a.lr;
  } else if (const auto it = best.find("learning_rate"); it != best.end()) {
    hp.learning_rate = text::parse_double(it->second).value_or(1e-2);
  }
  if (hp.widths.empty()) throw UsageError("architecture needs at least one hidden layer");

  const auto p = make_problem(c.ws, inputs, target, a.val_fraction, c.env.seed);
  auto net = nn::Mlp::build(static_cast<int>(inputs.size()), hp.layer_specs(1), c.env.seed);
  nn::TrainConfig tc;
  tc.epochs = a.epochs;
  tc.learning_rate = hp.learning_rate;
  tc.optimizer = hp.optimizer;
  tc.seed = c.env.seed;
  auto trained = nn::train(std::move(net), p.split.x_train, p.split.y_train, tc);

  Surrogate model{inputs, {target}, p.x_scaler, p.y_scaler, std::move(trained.model)};
  const Eigen::MatrixXd pred_scaled = model.predict_scaled(p.split.x_val);
  const Eigen::VectorXd pred = p.y_scaler.unscale(pred_scaled).col(0);
  const Eigen::VectorXd truth = p.y_scaler.unscale(p.split.y_val).col(0);
  const double rmse = stats::rmse(pred, truth);
  const double r2 = stats::r2_score(pred_scaled, p.split.y_val);
  if (!std::isfinite(rmse)) throw TrainingDivergedError("non-finite validation error", a.epochs);

  const std::string config = "train target=" + target + " inputs=" + text::join(inputs, ",") +
                             " widths=" + tune::format_widths(hp.widths) + " act=" +
                             std::string(nn::to_string(hp.activation)) + " opt=" +
                             std::string(nn::to_string(hp.optimizer)) + " lr=" +
                             num(hp.learning_rate) + " epochs=" + std::to_string(a.epochs) +
                             " val=" + num(a.val_fraction) +
                             " seed=" + std::to_string(c.env.seed);
  std::vector<std::string> deps = {kDatasetFile};
  if (c.ws.has(kSyntheticFile)) deps.emplace_back(kSyntheticFile);
  if (a.widths.empty()) deps.emplace_back(kBestFile);
  c.ws.write(kModelFile, serialize_model(model), config, deps);
  const auto metrics = format_kv({{"target", target},
                                  {"inputs", text::join(inputs, ",")},
                                  {"widths", tune::format_widths(hp.widths)},
                                  {"activation", std::string(nn::to_string(hp.activation))},
                                  {"optimizer", std::string(nn::to_string(hp.optimizer))},
                                  {"learning_rate", num(hp.learning_rate)},
                                  {"epochs", std::to_string(a.epochs)},
                                  {"train_rows", std::to_string(p.split.x_train.rows())},
                                  {"val_rows", std::to_string(p.split.x_val.rows())},
                                  {"final_loss", num(trained.final_loss)},
                                  {"val_r2", num(r2)},
                                  {"val_rmse", num(rmse)},
                                  {"band_95", num(1.96 * rmse)}});
  c.ws.write(kMetricsFile, metrics, config, {kModelFile});
  c.out << metrics << "wrote " << c.ws.path(kModelFile).string() << "\n";
  return kOk;
}

Surrogate load_workspace_model(const Ctx& c, const std::string& path) {
  if (!path.empty()) return load_model(path);
  c.ws.require(kModelFile, "train");
  return load_model(c.ws.path(kModelFile).string());
}

void emit(Ctx& c, const std::string& output, const std::string& content) {
  if (output.empty()) {
    c.out << content;
  } else {
    text::write_file(output, content);
    c.out << "wrote " << output << "\n";
  }
}

struct PredictArgs {
  std::string model;
  std::string input;
  std::vector<std::string> set;
  std::string output;
};

int cmd_predict(Ctx& c, const PredictArgs& a) {
  const auto model = load_workspace_model(c, a.model);
  const auto n_in = model.input_names.size();
  Eigen::MatrixXd x;
  if (!a.input.empty()) {
    if (!a.set.empty()) throw UsageError("use either --input or --set, not both");
    const auto rows = text::lines(text::read_file(a.input));
    if (rows.empty()) throw ParseError("empty input file " + a.input, 1, 0);
    const auto header = text::split(rows[0], ',');
    std::vector<std::size_t> idx;
    for (const auto& name : model.input_names) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) {
        throw ValidationError("input file lacks column '" + name + "'; model inputs: " +
                              text::join(model.input_names, ", "));
      }
      idx.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    std::vector<std::vector<double>> values;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (text::trim(rows[r]).empty()) continue;
      const auto f = text::split(rows[r], ',');
      std::vector<double> row;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto v = idx[j] < f.size() ? text::parse_double(f[idx[j]]) : std::nullopt;
        if (!v) throw ParseError("bad value for '" + model.input_names[j] + "'", r + 1, idx[j] + 1);
        row.push_back(*v);
      }
      values.push_back(std::move(row));
    }
    x.resize(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(n_in));
    for (std::size_t r = 0; r < values.size(); ++r) {
      for (std::size_t j = 0; j < n_in; ++j) {
        x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = values[r][j];
      }
    }
  } else {
    x.resize(1, static_cast<Eigen::Index>(n_in));
    std::vector<bool> seen(n_in, false);
    for (const auto& kv : a.set) {
      const auto eq = kv.find('=');
      const auto name = kv.substr(0, eq);
      const auto it = std::find(model.input_names.begin(), model.input_names.end(), name);
      const auto v = eq == std::string::npos ? std::nullopt : text::parse_double(kv.substr(eq + 1));
      if (it == model.input_names.end() || !v) {
        throw UsageError("bad --set '" + kv + "'; model inputs: " +
                         text::join(model.input_names, ", "));
      }
      const auto j = static_cast<std::size_t>(it - model.input_names.begin());
      x(0, static_cast<Eigen::Index>(j)) = *v;
      seen[j] = true;
    }
    for (std::size_t j = 0; j < n_in; ++j) {
      if (!seen[j]) throw UsageError("missing --set " + model.input_names[j] + "=<value>");
    }
  }
  const Eigen::MatrixXd y =
      c.env.mode == Mode::kSci ? model.predict_scaled(x) : model.predict_real(x);
  std::string csv = text::join(model.input_names, ",") + "," +
                    text::join(model.output_names, ",") + "\n";
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) csv += num(x(r, j)) + ",";
    for (Eigen::Index j = 0; j < y.cols(); ++j) csv += (j ? "," : "") + num(y(r, j));
    csv += "\n";
  }
  emit(c, a.output, csv);
  return kOk;
}

struct SurfaceArgs {
  std::string x;
  std::string y;
  std::string target;
  int grid = 50;
  std::string model;
  std::string output;
};

int cmd_surface(Ctx& c, const SurfaceArgs& a) {
  if (a.x == a.y) throw UsageError("surface features must differ (got '" + a.x + "' twice)");
  if (a.grid < 1) throw UsageError("--grid must be at least 1");
  const auto model = load_workspace_model(c, a.model);
  if (!a.target.empty() && a.target != model.output_names.at(0)) {
    throw UsageError("model predicts '" + model.output_names.at(0) + "', not '" + a.target + "'");
  }
  const auto locate = [&](const std::string& n) {
    const auto it = std::find(model.input_names.begin(), model.input_names.end(), n);
    if (it == model.input_names.end()) {
      throw UsageError("'" + n + "' is not a model input; inputs: " +
                       text::join(model.input_names, ", "));
    }
    return static_cast<std::size_t>(it - model.input_names.begin());
  };
  const auto xi = locate(a.x);
  const auto yi = locate(a.y);
  const auto n_in = model.input_names.size();

  // Inputs off the grid sit at the real-record mean, or the middle of the
  // training range when no dataset is around.
  Eigen::RowVectorXd base(static_cast<Eigen::Index>(n_in));
  std::optional<Eigen::MatrixXd> real;
  if (c.ws.has(kDatasetFile)) real = load_dataset(c.ws).feature_matrix();
  for (std::size_t j = 0; j < n_in; ++j) {
    const auto& r = model.input_scaler[j];
    const auto col = feature_index(model.input_names[j]);
    base(static_cast<Eigen::Index>(j)) =
        real && col ? real->col(static_cast<Eigen::Index>(*col)).mean() : 0.5 * (r.min + r.max);
  }
  const auto axis = [&](std::size_t j) {
    const auto& r = model.input_scaler[j];
    std::vector<double> v(static_cast<std::size_t>(a.grid));
    for (int i = 0; i < a.grid; ++i) {
      v[static_cast<std::size_t>(i)] =
          a.grid == 1 ? 0.5 * (r.min + r.max)
                      : r.min + (r.max - r.min) * i / static_cast<double>(a.grid - 1);
    }
    return v;
  };
  const auto xs = axis(xi);
  const auto ys = axis(yi);
  Eigen::MatrixXd grid(static_cast<Eigen::Index>(xs.size() * ys.size()),
                       static_cast<Eigen::Index>(n_in));
  Eigen::Index row = 0;
  for (double xv : xs) {
    for (double yv : ys) {
      grid.row(row) = base;
      grid(row, static_cast<Eigen::Index>(xi)) = xv;
      grid(row, static_cast<Eigen::Index>(yi)) = yv;
      ++row;
    }
  }
  const bool sci = c.env.mode == Mode::kSci;
  const Eigen::MatrixXd coords = sci ? model.input_scaler.scale(grid) : grid;
  const Eigen::MatrixXd pred = sci ? model.predict_scaled(coords) : model.predict_real(grid);
  std::string csv = a.x + "," + a.y + "," + model.output_names.at(0) + "\n";
  std::size_t non_finite = 0;
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    non_finite += !std::isfinite(pred(r, 0));
    csv += num(coords(r, static_cast<Eigen::Index>(xi))) + "," +
           num(coords(r, static_cast<Eigen::Index>(yi))) + "," + num(pred(r, 0)) + "\n";
  }
  const std::string name = "surface_" + model.output_names.at(0) + "_" + a.x + "_" + a.y + ".csv";
  if (a.output.empty()) {
    c.ws.write(name, csv,
               "surface x=" + a.x + " y=" + a.y + " grid=" + std::to_string(a.grid) +
                   " env=" + (sci ? "sci" : "rci"),
               {kModelFile, kDatasetFile});
    c.out << "wrote " << c.ws.path(name).string() << " (" << grid.rows() << " rows)\n";
  } else {
    emit(c, a.output, csv);
  }
  if (non_finite) {
    c.out << non_finite << " non-finite predictions\n";
    return kNumerical;
  }
  return kOk;
}

struct ExportArgs {
  std::string model;
  std::string to;
};

int cmd_export(Ctx& c, const ExportArgs& a) {
  const auto model = load_workspace_model(c, a.model);
  const auto content = serialize_model(model);
  text::write_file(a.to, content);
  const auto reloaded = load_model(a.to);
  // Probe on a 7^k lattice (capped) across the training box.
  const auto n_in = static_cast<Eigen::Index>(model.input_names.size());
  const Eigen::Index n_probe = 64;
  Eigen::MatrixXd probe(n_probe, n_in);
  for (Eigen::Index r = 0; r < n_probe; ++r) {
    for (Eigen::Index j = 0; j < n_in; ++j) {
      probe(r, j) = static_cast<double>((r * 7 + j * 3) % 11) / 10.0;
    }
  }
  const Eigen::MatrixXd before = model.predict_scaled(probe);
  const Eigen::MatrixXd after = reloaded.predict_scaled(probe);
  const bool same = std::equal(before.data(), before.data() + before.size(), after.data());
  if (!same) {
    c.out << "round trip mismatch for " << a.to << "\n";
    return kNumerical;
  }
  c.out << "wrote " << a.to << " (" << kModelFormatTag << ", round trip verified on "
        << n_probe << " probes)\n";
  return kOk;
}

int cmd_report(Ctx& c) {
  std::string r = "hetfit run report\n\n[environment]\n";
  r += std::string("mode=") + (c.env.mode == Mode::kSci ? "sci" : "rci") + "\n";
  r += "out=" + c.ws.dir().string() + "\n";
  r += "seed=" + std::to_string(c.env.seed) + "\n";
  const auto section = [&](const char* title, const char* file) {
    r += std::string("\n[") + title + "]\n";
    r += c.ws.has(file) ? c.ws.read(file) : std::string("(not run)\n");
  };
  section("dataset", kIngestFile);
  section("scaling coefficients", kScalingFile);
  section("physics-constrained fit", kPhysfitFile);
  section("augmentation", kAugmentFile);
  section("best trial", kBestFile);
  section("feature selection", kBorutaFile);
  section("surrogate", kMetricsFile);

  r += "\n[artifacts]\n";
  const auto manifest = c.ws.load_manifest();
  std::size_t stale = 0;
  for (const auto& [name, e] : manifest) {
    if (name == kReportFile) continue;
    std::string status = "ok";
    if (!c.ws.has(name)) {
      continue;  // only files that exist are referenced
    }
    if (text::hex64(text::fnv1a(c.ws.read(name))) != e.content) {
      status = "modified";
    } else {
      for (const auto& [dep, hash] : e.deps) {
        const auto it = manifest.find(dep);
        if (it == manifest.end() || it->second.content != hash) {
          status = "stale (" + dep + " changed)";
          break;
        }
      }
    }
    stale += status != "ok";
    r += c.ws.path(name).string() + " config=" + e.config + " " + status + "\n";
  }
  c.ws.write(kReportFile, r, "report", {});
  c.out << r;
  if (stale) c.out << "warning: " << stale << " artifact(s) out of date\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hall-thruster design toolkit: scaling laws, GAN augmentation, "
               "surrogate tuning and design-space surfaces"};
  app.name("hetfit");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read options from a key=value file");

  Environment env;
  std::string env_mode = "rci";
  std::string out_dir = env.out_dir.string();
  app.add_option("--seed", env.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--env", env_mode, "rci (real units) or sci (scaled units)")
      ->check(CLI::IsMember({"rci", "sci"}))
      ->capture_default_str();
  app.add_option("--out", out_dir, "Workspace directory")->capture_default_str();

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Validate a thruster CSV into the workspace");
  s_ingest->add_option("csv", ingest.path, "Input CSV")->required();
  s_ingest->add_flag("--permissive", ingest.permissive, "Skip bad rows instead of rejecting");

  AugmentArgs aug;
  auto* s_aug = app.add_subcommand("augment", "Train the GAN and write synthetic records");
  s_aug->add_option("-n,--n", aug.n, "Rows to generate")->capture_default_str();
  s_aug->add_option("--epochs", aug.gan.epochs, "Adversarial steps")->capture_default_str();
  s_aug->add_option("--generator-lr", aug.gan.generator_lr)->capture_default_str();
  s_aug->add_option("--discriminator-lr", aug.gan.discriminator_lr)->capture_default_str();
  s_aug->add_option("--noise-dim", aug.gan.noise_dim)->capture_default_str();
  s_aug->add_option("--fake-batch", aug.gan.fake_batch_size)->capture_default_str();

  ScalingArgs scal;
  auto* s_scal = app.add_subcommand("fit-scaling", "Fit the linear scaling coefficients");
  s_scal->add_option("--power", scal.power, "Design power [W]");
  s_scal->add_option("--voltage", scal.voltage, "Design discharge voltage [V]");

  physfit::FitConfig pf;
  auto* s_pf = app.add_subcommand("physfit", "Refit the coefficients by gradient descent");
  s_pf->add_option("--lr", pf.learning_rate)->capture_default_str();
  s_pf->add_option("--epochs", pf.epochs)->capture_default_str();

  TuneArgs tn;
  auto* s_tune = app.add_subcommand("tune", "TPE search over surrogate architectures");
  s_tune->add_option("--target", tn.target)->capture_default_str();
  s_tune->add_option("--inputs", tn.inputs, "Comma-separated input columns");
  s_tune->add_option("--trials", tn.trials)->capture_default_str();
  s_tune->add_option("--epochs", tn.epochs, "Training epochs per trial")->capture_default_str();
  s_tune->add_option("--val-fraction", tn.val_fraction)->capture_default_str();

  SelectArgs sel;
  auto* s_sel = app.add_subcommand("select", "Boruta feature selection");
  s_sel->add_option("--target", sel.target)->capture_default_str();
  s_sel->add_option("--inputs", sel.inputs, "Comma-separated candidate columns");
  s_sel->add_option("--max-iter", sel.max_iter)->capture_default_str();

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "Train the surrogate and save it");
  s_train->add_option("--target", tr.target);
  s_train->add_option("--inputs", tr.inputs);
  s_train->add_option("--widths", tr.widths, "Hidden widths, e.g. 64;32");
  s_train->add_option("--activation", tr.activation);
  s_train->add_option("--optimizer", tr.optimizer);
  s_train->add_option("--lr", tr.lr);
  s_train->add_option("--epochs", tr.epochs)->capture_default_str();
  s_train->add_option("--val-fraction", tr.val_fraction)->capture_default_str();

  PredictArgs pr;
  auto* s_pred = app.add_subcommand("predict", "Run the surrogate on rows");
  s_pred->add_option("--model", pr.model, "Model file (default: workspace model)");
  s_pred->add_option("--input", pr.input, "CSV with a header naming the model inputs");
  s_pred->add_option("--set", pr.set, "name=value, repeatable");
  s_pred->add_option("-o,--output", pr.output);

  SurfaceArgs sf;
  auto* s_surf = app.add_subcommand("surface", "Grid of predictions over two inputs");
  s_surf->add_option("--x", sf.x)->required();
  s_surf->add_option("--y", sf.y)->required();
  s_surf->add_option("--target", sf.target);
  s_surf->add_option("--grid", sf.grid)->capture_default_str();
  s_surf->add_option("--model", sf.model);
  s_surf->add_option("-o,--output", sf.output);

  ExportArgs ex;
  auto* s_exp = app.add_subcommand("export", "Write a portable model file");
  s_exp->add_option("--model", ex.model);
  s_exp->add_option("--to", ex.to)->required();

  auto* s_rep = app.add_subcommand("report", "Summarize the workspace");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  env.mode = env_mode == "sci" ? Mode::kSci : Mode::kRci;
  env.out_dir = out_dir;
  Ctx ctx{env, Workspace(env.out_dir), out};
  try {
    if (s_ingest->parsed()) return cmd_ingest(ctx, ingest);
    if (s_aug->parsed()) return cmd_augment(ctx, aug);
    if (s_scal->parsed()) return cmd_fit_scaling(ctx, scal);
    if (s_pf->parsed()) return cmd_physfit(ctx, pf);
    if (s_tune->parsed()) return cmd_tune(ctx, tn);
    if (s_sel->parsed()) return cmd_select(ctx, sel);
    if (s_train->parsed()) return cmd_train(ctx, tr);
    if (s_pred->parsed()) return cmd_predict(ctx, pr);
    if (s_surf->parsed()) return cmd_surface(ctx, sf);
    if (s_exp->parsed()) return cmd_export(ctx, ex);
    if (s_rep->parsed()) return cmd_report(ctx);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const TrainingDivergedError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const NoViableArchitectureError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const DomainError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const VersionError& e) {
    err << "version error: " << e.what() << "\n";
    return kValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kUsage;
}

}  // namespace hetfit::cli
