#include "hetfit/augment.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "hetfit/error.hpp"
#include "hetfit/random.hpp"
#include "hetfit/text.hpp"

namespace hetfit::augment {

namespace {

constexpr nn::AdamParams kGanAdam{0.5, 0.999, 1e-8};

Eigen::MatrixXd noise(Rng& rng, Eigen::Index rows, int dim) {
  Eigen::MatrixXd z(rows, dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) z(r, c) = rng.normal();
  }
  return z;
}

double sigmoid(double z) { return nn::activate(nn::Activation::kSigmoid, z); }

// Binary cross-entropy from logits: log(1 + e^l) - y * l, stable form.
double bce_logit(double logit, double label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

std::vector<nn::LayerSpec> with_output(std::vector<nn::LayerSpec> hidden,
                                       int width) {
  hidden.push_back({width, nn::Activation::kIdentity});
  return hidden;
}

}  // namespace

GanModel train_gan(const Eigen::MatrixXd& scaled, const GanConfig& config) {
  if (scaled.rows() < 8) {
    throw PreconditionError("GAN training needs at least 8 rows, got " +
                            std::to_string(scaled.rows()));
  }
  if (scaled.cols() < 1) throw PreconditionError("GAN training needs features");
  if (config.noise_dim < 1) throw DomainError("noise_dim must be at least 1");
  if (config.epochs < 1) throw DomainError("epochs must be at least 1");

  Rng rng(config.seed);
  const auto dim = static_cast<int>(scaled.cols());
  const auto gen_layers = with_output(config.generator_hidden, dim);
  const auto disc_layers = with_output(config.discriminator_hidden, 1);

  GanModel gan;
  gan.noise_dim = config.noise_dim;
  gan.generator = nn::Mlp::build(config.noise_dim, gen_layers, rng.next());
  gan.discriminator = nn::Mlp::build(dim, disc_layers, rng.next());

  nn::Optimizer gen_opt(nn::OptimizerKind::kAdam, config.generator_lr,
                        gan.generator, kGanAdam);
  nn::Optimizer disc_opt(nn::OptimizerKind::kAdam, config.discriminator_lr,
                         gan.discriminator, kGanAdam);

  const Eigen::Index n = scaled.rows();
  const Eigen::Index m =
      config.batch_size > 0 ? std::min<Eigen::Index>(config.batch_size, n) : n;
  const Eigen::Index mf = std::max(config.fake_batch_size, 1);
  gan.discriminator_loss.reserve(static_cast<std::size_t>(config.epochs));
  gan.generator_loss.reserve(static_cast<std::size_t>(config.epochs));

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Eigen::MatrixXd real_batch;
    if (m == n) {
      real_batch = scaled;
    } else {
      rng.shuffle(idx.begin(), idx.end());
      std::vector<Eigen::Index> pick(idx.begin(), idx.begin() + m);
      real_batch = scaled(pick, Eigen::all);
    }

    // Discriminator: real rows toward real_label, generated rows toward 0.
    const Eigen::MatrixXd fake =
        gan.generator.forward_batch(noise(rng, mf, gan.noise_dim));
    const auto real_trace = nn::forward_trace(gan.discriminator, real_batch);
    const auto fake_trace = nn::forward_trace(gan.discriminator, fake);
    Eigen::MatrixXd real_grad(m, 1), fake_grad(mf, 1);
    double real_loss = 0.0;
    double fake_loss = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double l = real_trace.output(i, 0);
      real_loss += bce_logit(l, config.real_label);
      real_grad(i, 0) = (sigmoid(l) - config.real_label) / static_cast<double>(m);
    }
    for (Eigen::Index i = 0; i < mf; ++i) {
      const double l = fake_trace.output(i, 0);
      fake_loss += bce_logit(l, 0.0);
      fake_grad(i, 0) = sigmoid(l) / static_cast<double>(mf);
    }
    const double d_loss = real_loss / static_cast<double>(m) +
                          fake_loss / static_cast<double>(mf);
    auto d_grads = nn::backprop(gan.discriminator, real_trace, real_grad);
    const auto d_fake = nn::backprop(gan.discriminator, fake_trace, fake_grad);
    for (std::size_t k = 0; k < d_grads.weights.size(); ++k) {
      d_grads.weights[k] += d_fake.weights[k];
      d_grads.biases[k] += d_fake.biases[k];
    }
    disc_opt.step(gan.discriminator, d_grads);

    // Generator: non-saturating loss -log D(G(z)).
    const auto gen_trace =
        nn::forward_trace(gan.generator, noise(rng, mf, gan.noise_dim));
    const auto judged = nn::forward_trace(gan.discriminator, gen_trace.output);
    Eigen::MatrixXd logit_grad(mf, 1);
    double g_loss = 0.0;
    for (Eigen::Index i = 0; i < mf; ++i) {
      const double l = judged.output(i, 0);
      g_loss += bce_logit(l, 1.0);
      logit_grad(i, 0) = (sigmoid(l) - 1.0) / static_cast<double>(mf);
    }
    g_loss /= static_cast<double>(mf);
    Eigen::MatrixXd sample_grad;
    nn::backprop(gan.discriminator, judged, logit_grad, &sample_grad);
    gen_opt.step(gan.generator, nn::backprop(gan.generator, gen_trace, sample_grad));

    if (!std::isfinite(d_loss) || !std::isfinite(g_loss)) {
      throw TrainingDivergedError("GAN training", epoch);
    }
    gan.discriminator_loss.push_back(d_loss);
    gan.generator_loss.push_back(g_loss);
  }
  return gan;
}

Eigen::MatrixXd sample(const GanModel& gan, std::size_t n, std::uint64_t seed) {
  if (n == 0) return Eigen::MatrixXd(0, gan.data_dim());
  Rng rng(seed);
  return gan.generator.forward_batch(
      noise(rng, static_cast<Eigen::Index>(n), gan.noise_dim));
}

Eigen::VectorXd discriminate(const GanModel& gan, const Eigen::MatrixXd& rows) {
  return gan.discriminator.forward_batch(rows).col(0).unaryExpr(&sigmoid);
}

double discriminator_accuracy(const GanModel& gan, const Eigen::MatrixXd& real,
                              std::uint64_t seed) {
  if (real.rows() == 0) throw PreconditionError("no real rows to classify");
  const auto fake = sample(gan, static_cast<std::size_t>(real.rows()), seed);
  const auto p_real = discriminate(gan, real);
  const auto p_fake = discriminate(gan, fake);
  const auto correct = (p_real.array() > 0.5).count() + (p_fake.array() <= 0.5).count();
  return static_cast<double>(correct) / static_cast<double>(2 * real.rows());
}

BoundarySpec BoundarySpec::defaults(const ScalerParams& scaler) {
  std::vector<std::string> names;
  for (const auto& r : scaler.ranges()) names.push_back(r.name);
  auto b = with_lower(names, 0.0);
  for (std::size_t j = 0; j < scaler.size(); ++j) {
    b.lower[j] = scaler.degenerate(j) ? 0.0 : scaler.scale_value(j, 0.0);
  }
  return b;
}

BoundarySpec BoundarySpec::with_lower(const std::vector<std::string>& names,
                                      double lower) {
  BoundarySpec b;
  b.lower.assign(names.size(), lower);
  b.upper.reserve(names.size());
  for (const auto& name : names) {
    if (name == "thrust_mn") {
      b.upper.push_back(2.0);
    } else if (name == "eta_anode") {
      b.upper.push_back(1.4);
    } else {
      b.upper.push_back(1.5);
    }
  }
  return b;
}

Partition boundary_filter(const Eigen::MatrixXd& rows, const BoundarySpec& bounds) {
  if (bounds.lower.size() != bounds.upper.size()) {
    throw ShapeError("boundary spec lower/upper lengths differ");
  }
  if (static_cast<std::size_t>(rows.cols()) != bounds.size()) {
    throw ShapeError("boundary_filter: rows have " + std::to_string(rows.cols()) +
                     " features, bounds cover " + std::to_string(bounds.size()));
  }
  for (std::size_t j = 0; j < bounds.size(); ++j) {
    if (!(bounds.lower[j] < bounds.upper[j])) {
      throw DomainError("boundary spec requires lower < upper");
    }
  }
  Partition p;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    bool ok = true;
    for (Eigen::Index j = 0; j < rows.cols() && ok; ++j) {
      const double v = rows(i, j);
      const auto ju = static_cast<std::size_t>(j);
      ok = v >= bounds.lower[ju] && v <= bounds.upper[ju];
    }
    (ok ? p.kept : p.outliers).push_back(static_cast<std::size_t>(i));
  }
  return p;
}

Eigen::VectorXd nearest_record_mape(const Eigen::MatrixXd& fake,
                                    const Eigen::MatrixXd& real) {
  if (fake.rows() == 0) throw PreconditionError("similarity: no fake rows");
  if (real.rows() == 0) throw PreconditionError("similarity: no real rows");
  if (fake.cols() != real.cols()) {
    throw ShapeError("similarity: fake and real rows differ in width");
  }
  Eigen::VectorXd out(fake.rows());
  for (Eigen::Index i = 0; i < fake.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < real.rows(); ++r) {
      double sum = 0.0;
      int used = 0;
      for (Eigen::Index j = 0; j < real.cols(); ++j) {
        const double ref = real(r, j);
        if (ref == 0.0) continue;
        sum += std::abs((fake(i, j) - ref) / ref);
        ++used;
      }
      if (used > 0) best = std::min(best, sum / used);
    }
    out(i) = 100.0 * best;
  }
  return out;
}

double similarity_mape(const Eigen::MatrixXd& fake, const Eigen::MatrixXd& real) {
  return nearest_record_mape(fake, real).mean();
}

std::size_t SyntheticBatch::kept_count() const {
  std::size_t k = 0;
  for (bool b : kept) k += b ? 1 : 0;
  return k;
}

double SyntheticBatch::mean_mape() const {
  return mape_pct.size() ? mape_pct.mean() : 0.0;
}

double SyntheticBatch::outlier_rate() const {
  return kept.empty() ? 0.0
                      : static_cast<double>(kept.size() - kept_count()) /
                            static_cast<double>(kept.size());
}

SyntheticBatch generate(const GanModel& gan, std::size_t n, std::uint64_t seed,
                        const ScalerParams& scaler,
                        const Eigen::MatrixXd& real_reference,
                        const BoundarySpec& bounds) {
  if (static_cast<int>(scaler.size()) != gan.data_dim()) {
    throw ShapeError("generate: scaler width does not match generator output");
  }
  SyntheticBatch batch;
  batch.scaled = sample(gan, n, seed);
  batch.real = scaler.unscale(batch.scaled);
  batch.kept.assign(n, false);
  if (n == 0) {
    batch.mape_pct = Eigen::VectorXd(0);
    return batch;
  }
  batch.mape_pct = nearest_record_mape(batch.real, real_reference);
  for (auto i : boundary_filter(batch.scaled, bounds).kept) batch.kept[i] = true;
  return batch;
}

AugmentResult augment_dataset(const Dataset& dataset, std::size_t n,
                              const GanConfig& config) {
  AugmentResult out;
  const Eigen::MatrixXd real = dataset.feature_matrix();
  out.scaler = fit_scaler(real, dataset.feature_names());
  out.gan_columns = out.scaler.active_columns();
  if (out.gan_columns.empty()) {
    throw PreconditionError("every feature is constant; nothing to learn");
  }
  const auto sub_scaler = out.scaler.select(out.gan_columns);
  const Eigen::MatrixXd sub_real = real(Eigen::all, out.gan_columns);
  const Eigen::MatrixXd sub_scaled = sub_scaler.scale(sub_real);

  out.gan = train_gan(sub_scaled, config);
  out.discriminator_accuracy =
      discriminator_accuracy(out.gan, sub_scaled, config.seed + 1);

  const auto sub_batch = generate(out.gan, n, config.seed + 2, sub_scaler, sub_real,
                                  BoundarySpec::defaults(sub_scaler));

  // Degenerate features are re-inserted at their constant value.
  auto& b = out.batch;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto width = static_cast<Eigen::Index>(out.scaler.size());
  b.scaled = Eigen::MatrixXd::Constant(rows, width, 0.5);
  for (std::size_t k = 0; k < out.gan_columns.size(); ++k) {
    b.scaled.col(static_cast<Eigen::Index>(out.gan_columns[k])) =
        sub_batch.scaled.col(static_cast<Eigen::Index>(k));
  }
  b.real = out.scaler.unscale(b.scaled);
  b.mape_pct = sub_batch.mape_pct;
  b.kept = sub_batch.kept;
  return out;
}

std::string synthetic_csv(const SyntheticBatch& batch,
                          const std::string& name_prefix) {
  std::string out(kCsvHeader);
  out += ",mape_pct,kept\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu", i);
    const auto row = static_cast<Eigen::Index>(i);
    out += name_prefix + name;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(kRecordFieldCount); ++j) {
      out += ',';
      out += text::format_double(batch.real(row, j));
    }
    out += ',';
    out += text::format_double(batch.mape_pct(row));
    out += batch.kept[i] ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace hetfit::augment
