#include "dubrec/model.hpp"

#include "dubrec/errors.hpp"
#include "dubrec/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dubrec {

double FactorModel::logit(std::int32_t u, std::int32_t i) const {
  return user_factors.row(u).dot(item_factors.row(i)) + user_bias[u] +
         item_bias[i] + global_bias;
}

double FactorModel::predict(std::int32_t u, std::int32_t i) const {
  if (u < 0 || u >= n_users() || i < 0 || i >= n_items()) {
    throw std::out_of_range("predict: pair (" + std::to_string(u) + "," +
                            std::to_string(i) + ") outside " +
                            std::to_string(n_users()) + "x" +
                            std::to_string(n_items()));
  }
  return clamp_unit(sigmoid(logit(u, i)), clamp_eps);
}

Vector FactorModel::predict_items(std::int32_t u) const {
  if (u < 0 || u >= n_users()) {
    throw std::out_of_range("predict_items: user " + std::to_string(u));
  }
  Vector z = item_factors * user_factors.row(u).transpose() + item_bias;
  z.array() += user_bias[u] + global_bias;
  const double eps = clamp_eps;
  return z.unaryExpr(
      [eps](double v) { return clamp_unit(sigmoid(v), eps); });
}

bool FactorModel::all_finite() const {
  return user_factors.allFinite() && item_factors.allFinite() &&
         user_bias.allFinite() && item_bias.allFinite() &&
         std::isfinite(global_bias);
}

FactorModel init_model(std::int32_t n_users, std::int32_t n_items,
                       std::int32_t rank, std::uint64_t seed) {
  if (n_users <= 0 || n_items <= 0 || rank <= 0) {
    throw ConfigError("init_model: dimensions must be positive");
  }
  FactorModel m = zero_model(n_users, n_items, rank);
  Rng rng(derive_seed(seed, 0x30de1));
  constexpr double kInitScale = 0.01;
  for (std::int32_t u = 0; u < n_users; ++u) {
    for (std::int32_t k = 0; k < rank; ++k) {
      m.user_factors(u, k) = kInitScale * rng.normal();
    }
  }
  for (std::int32_t i = 0; i < n_items; ++i) {
    for (std::int32_t k = 0; k < rank; ++k) {
      m.item_factors(i, k) = kInitScale * rng.normal();
    }
  }
  return m;
}

FactorModel zero_model(std::int32_t n_users, std::int32_t n_items,
                       std::int32_t rank) {
  FactorModel m;
  m.user_factors = Matrix::Zero(n_users, rank);
  m.item_factors = Matrix::Zero(n_items, rank);
  m.user_bias = Vector::Zero(n_users);
  m.item_bias = Vector::Zero(n_items);
  m.global_bias = 0.0;
  m.rank = rank;
  return m;
}

OptimizerState OptimizerState::for_model(const FactorModel& model,
                                         AdamConfig cfg) {
  OptimizerState s;
  s.m_user = Matrix::Zero(model.user_factors.rows(), model.rank);
  s.v_user = s.m_user;
  s.m_item = Matrix::Zero(model.item_factors.rows(), model.rank);
  s.v_item = s.m_item;
  s.m_user_bias = Vector::Zero(model.user_bias.size());
  s.v_user_bias = s.m_user_bias;
  s.m_item_bias = Vector::Zero(model.item_bias.size());
  s.v_item_bias = s.m_item_bias;
  s.config = cfg;
  return s;
}

GradAccumulator::GradAccumulator(const FactorModel& model)
    : g_user_(Matrix::Zero(model.user_factors.rows(), model.rank)),
      g_item_(Matrix::Zero(model.item_factors.rows(), model.rank)),
      g_user_bias_(Vector::Zero(model.user_bias.size())),
      g_item_bias_(Vector::Zero(model.item_bias.size())),
      touched_user_(model.user_factors.rows(), 0),
      touched_item_(model.item_factors.rows(), 0) {}

void GradAccumulator::reset() {
  g_user_.setZero();
  g_item_.setZero();
  g_user_bias_.setZero();
  g_item_bias_.setZero();
  g_global_ = 0.0;
  std::fill(touched_user_.begin(), touched_user_.end(), 0);
  std::fill(touched_item_.begin(), touched_item_.end(), 0);
  any_ = false;
}

void GradAccumulator::add_example(const FactorModel& model,
                                  const TrainingExample& ex,
                                  const LossKind& loss) {
  const double yhat = model.predict(ex.user, ex.item);
  const double dlogit =
      ex.weight * loss_logit_gradient(loss, ex.target, yhat);
  g_user_.row(ex.user) += dlogit * model.item_factors.row(ex.item);
  g_item_.row(ex.item) += dlogit * model.user_factors.row(ex.user);
  g_user_bias_[ex.user] += dlogit;
  g_item_bias_[ex.item] += dlogit;
  g_global_ += dlogit;
  touched_user_[ex.user] = 1;
  touched_item_[ex.item] = 1;
  any_ = true;
}

void GradAccumulator::add_l2_touched(const FactorModel& model, double coeff) {
  if (coeff == 0.0) return;
  for (std::int32_t u = 0; u < model.n_users(); ++u) {
    if (!touched_user_[u]) continue;
    g_user_.row(u) += coeff * model.user_factors.row(u);
    g_user_bias_[u] += coeff * model.user_bias[u];
  }
  for (std::int32_t i = 0; i < model.n_items(); ++i) {
    if (!touched_item_[i]) continue;
    g_item_.row(i) += coeff * model.item_factors.row(i);
    g_item_bias_[i] += coeff * model.item_bias[i];
  }
  if (any_) g_global_ += coeff * model.global_bias;
}

void GradAccumulator::touch_all() {
  std::fill(touched_user_.begin(), touched_user_.end(), 1);
  std::fill(touched_item_.begin(), touched_item_.end(), 1);
  any_ = true;
}

void GradAccumulator::add_l2_all(const FactorModel& model, double coeff) {
  if (coeff == 0.0) return;
  touch_all();
  g_user_ += coeff * model.user_factors;
  g_item_ += coeff * model.item_factors;
  g_user_bias_ += coeff * model.user_bias;
  g_item_bias_ += coeff * model.item_bias;
  g_global_ += coeff * model.global_bias;
}

void GradAccumulator::add_frobenius_pull(const FactorModel& self,
                                         const FactorModel& other,
                                         double coeff) {
  if (coeff == 0.0) return;
  const double dist = param_distance(self, other);
  if (dist <= 0.0) return;
  touch_all();
  const double s = coeff / dist;
  g_user_ += s * (self.user_factors - other.user_factors);
  g_item_ += s * (self.item_factors - other.item_factors);
  g_user_bias_ += s * (self.user_bias - other.user_bias);
  g_item_bias_ += s * (self.item_bias - other.item_bias);
  g_global_ += s * (self.global_bias - other.global_bias);
}

namespace {

inline double adam_delta(double grad, double& m, double& v,
                         const AdamConfig& c, double corr1, double corr2) {
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad * grad;
  const double mhat = m / corr1;
  const double vhat = v / corr2;
  return c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
}

}  // namespace

void adam_step(FactorModel& model, OptimizerState& opt,
               const GradAccumulator& grads) {
  if (!grads.user_grad().allFinite() || !grads.item_grad().allFinite() ||
      !grads.user_bias_grad().allFinite() ||
      !grads.item_bias_grad().allFinite() ||
      !std::isfinite(grads.global_bias_grad())) {
    throw NumericError("adam_step: non-finite gradient");
  }
  const AdamConfig& c = opt.config;
  ++opt.step_count;
  const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step_count));
  const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step_count));
  const std::int32_t rank = model.rank;
  for (std::int32_t u = 0; u < model.n_users(); ++u) {
    if (!grads.touched_users()[u]) continue;
    for (std::int32_t k = 0; k < rank; ++k) {
      model.user_factors(u, k) -= adam_delta(
          grads.user_grad()(u, k), opt.m_user(u, k), opt.v_user(u, k), c,
          corr1, corr2);
    }
    model.user_bias[u] -= adam_delta(grads.user_bias_grad()[u],
                                     opt.m_user_bias[u], opt.v_user_bias[u], c,
                                     corr1, corr2);
  }
  for (std::int32_t i = 0; i < model.n_items(); ++i) {
    if (!grads.touched_items()[i]) continue;
    for (std::int32_t k = 0; k < rank; ++k) {
      model.item_factors(i, k) -= adam_delta(
          grads.item_grad()(i, k), opt.m_item(i, k), opt.v_item(i, k), c,
          corr1, corr2);
    }
    model.item_bias[i] -= adam_delta(grads.item_bias_grad()[i],
                                     opt.m_item_bias[i], opt.v_item_bias[i], c,
                                     corr1, corr2);
  }
  if (grads.anything_touched()) {
    model.global_bias -= adam_delta(grads.global_bias_grad(), opt.m_global,
                                    opt.v_global, c, corr1, corr2);
  }
  if (!model.all_finite()) {
    throw NumericError("adam_step: parameters diverged");
  }
}

void grad_step(FactorModel& model, OptimizerState& opt,
               std::span<const TrainingExample> batch, const LossKind& loss,
               double l2) {
  GradAccumulator grads(model);
  for (const TrainingExample& ex : batch) {
    grads.add_example(model, ex, loss);
  }
  grads.add_l2_touched(model, l2);
  adam_step(model, opt, grads);
}

double regularization_value(const FactorModel& model, double lambda) {
  const double sq = model.user_factors.squaredNorm() +
                    model.item_factors.squaredNorm() +
                    model.user_bias.squaredNorm() +
                    model.item_bias.squaredNorm() +
                    model.global_bias * model.global_bias;
  return lambda * sq;
}

double param_distance(const FactorModel& a, const FactorModel& b) {
  if (a.rank != b.rank || a.n_users() != b.n_users() ||
      a.n_items() != b.n_items()) {
    throw DataError("param_distance: models must share dimensions");
  }
  const double sq = (a.user_factors - b.user_factors).squaredNorm() +
                    (a.item_factors - b.item_factors).squaredNorm() +
                    (a.user_bias - b.user_bias).squaredNorm() +
                    (a.item_bias - b.item_bias).squaredNorm() +
                    (a.global_bias - b.global_bias) *
                        (a.global_bias - b.global_bias);
  return std::sqrt(sq);
}

namespace {

void write_matrix(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

Matrix read_matrix(const std::filesystem::path& path, std::int64_t rows,
                   std::int64_t cols) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Matrix m(rows, cols);
  std::string line, field;
  for (std::int64_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw ParseError(path.string() + ": truncated at row " + std::to_string(r));
    }
    std::stringstream ss(line);
    for (std::int64_t c = 0; c < cols; ++c) {
      if (!std::getline(ss, field, ',')) {
        throw ParseError(path.string() + ":" + std::to_string(r + 1) +
                         ": truncated row");
      }
      m(r, c) = std::stod(field);
    }
  }
  return m;
}

}  // namespace

void save_model(const FactorModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream meta(dir / "meta");
  if (!meta) throw DataError("cannot write " + (dir / "meta").string());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", model.clamp_eps);
  meta << "n_users=" << model.n_users() << '\n'
       << "n_items=" << model.n_items() << '\n'
       << "rank=" << model.rank << '\n'
       << "clamp_eps=" << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", model.global_bias);
  meta << "global_bias=" << buf << '\n';
  meta.close();
  write_matrix(model.user_factors, dir / "user_factors.csv");
  write_matrix(model.item_factors, dir / "item_factors.csv");
  write_matrix(model.user_bias, dir / "user_bias.csv");
  write_matrix(model.item_bias, dir / "item_bias.csv");
}

FactorModel load_model(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "meta");
  if (!meta) throw DataError("cannot open " + (dir / "meta").string());
  std::int32_t n_users = 0, n_items = 0, rank = 0;
  double clamp_eps = 1e-7, global_bias = 0.0;
  std::string line;
  while (std::getline(meta, line)) {
    const auto pos = line.find('=');
    if (pos == std::string::npos) continue;
    const std::string key = line.substr(0, pos);
    const std::string value = line.substr(pos + 1);
    if (key == "n_users") n_users = std::stoi(value);
    else if (key == "n_items") n_items = std::stoi(value);
    else if (key == "rank") rank = std::stoi(value);
    else if (key == "clamp_eps") clamp_eps = std::stod(value);
    else if (key == "global_bias") global_bias = std::stod(value);
  }
  if (n_users <= 0 || n_items <= 0 || rank <= 0) {
    throw ParseError((dir / "meta").string() + ": bad dimensions");
  }
  FactorModel m = zero_model(n_users, n_items, rank);
  m.clamp_eps = clamp_eps;
  m.global_bias = global_bias;
  m.user_factors = read_matrix(dir / "user_factors.csv", n_users, rank);
  m.item_factors = read_matrix(dir / "item_factors.csv", n_items, rank);
  m.user_bias = read_matrix(dir / "user_bias.csv", n_users, 1);
  m.item_bias = read_matrix(dir / "item_bias.csv", n_items, 1);
  return m;
}

}  // namespace dubrec
