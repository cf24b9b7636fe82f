#include "stylemetric/metric.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/SVD>

#include "stylemetric/error.hpp"
#include "stylemetric/rng.hpp"

namespace stylemetric {

std::string to_string(MetricShape s) { return s == MetricShape::diagonal ? "diagonal" : "full"; }

MetricShape parse_metric_shape(const std::string& s) {
  if (s == "diagonal" || s == "diag") return MetricShape::diagonal;
  if (s == "full") return MetricShape::full;
  throw InvalidArgument("unknown metric shape '" + s + "'");
}

// ------------------------------------------------------------ standardization

Eigen::VectorXd Standardization::apply(const Eigen::VectorXd& x) const {
  if (empty()) return x;
  return (x - mean).cwiseQuotient(scale);
}

Standardization Standardization::fit(const std::vector<const Eigen::VectorXd*>& rows) {
  if (rows.empty()) throw InvalidArgument("cannot standardize an empty corpus");
  const Eigen::Index d = rows.front()->size();
  Standardization s;
  s.mean = Eigen::VectorXd::Zero(d);
  for (const auto* r : rows) s.mean += *r;
  s.mean /= static_cast<double>(rows.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (const auto* r : rows) var += (*r - s.mean).array().square().matrix();
  var /= static_cast<double>(rows.size());
  s.scale = var.cwiseSqrt();
  for (Eigen::Index i = 0; i < d; ++i)
    if (!(s.scale(i) > 1e-12 * std::max(1.0, std::abs(s.mean(i))))) s.scale(i) = 1.0;
  return s;
}

// ------------------------------------------------------------ weight matrix

int WeightMatrix::dim() const {
  return shape == MetricShape::diagonal ? static_cast<int>(diag.size()) : static_cast<int>(full.rows());
}

Eigen::VectorXd WeightMatrix::transform(const Eigen::VectorXd& x) const {
  Eigen::VectorXd z = standardization.apply(x);
  if (projection.size() != 0) z = projection * z;
  return z;
}

double WeightMatrix::squared_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  Eigen::VectorXd diff = x - y;
  if (!standardization.empty()) diff = diff.cwiseQuotient(standardization.scale);
  if (projection.size() != 0) diff = projection * diff;
  const double d2 =
      shape == MetricShape::diagonal ? squared_distance_diagonal(diag, diff) : squared_distance_full(full, diff);
  return std::max(d2, 0.0);
}

WeightMatrix WeightMatrix::scaled(double s) const {
  if (!(s > 0) || !std::isfinite(s)) throw InvalidArgument("scale factor must be positive");
  WeightMatrix out = *this;
  out.diag *= s;
  out.full *= s;
  return out;
}

void WeightMatrix::validate() const {
  const int d = dim();
  if (d <= 0) throw InvalidArgument("weight matrix has no dimensions");
  if (shape == MetricShape::diagonal) {
    if (full.size() != 0) throw InvalidArgument("diagonal weight matrix carries a full block");
    for (Eigen::Index i = 0; i < diag.size(); ++i)
      if (!std::isfinite(diag(i)) || diag(i) < 0) throw InvalidArgument("diagonal weights must be finite and >= 0");
  } else {
    if (full.rows() != full.cols()) throw InvalidArgument("full weight matrix is not square");
    if (!full.allFinite()) throw InvalidArgument("full weight matrix has non-finite entries");
    const double asym = (full - full.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9) throw InvalidArgument("full weight matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(full, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8) throw InvalidArgument("full weight matrix is not PSD");
  }
  if (projection.size() != 0) {
    if (projection.rows() != d || projection.cols() != input_dim)
      throw InvalidArgument("projection shape does not match the metric");
  } else if (input_dim != d) {
    throw InvalidArgument("input dimension differs from metric dimension without a projection");
  }
  if (!standardization.empty()) {
    if (standardization.mean.size() != input_dim || standardization.scale.size() != input_dim)
      throw InvalidArgument("standardization size does not match the input dimension");
    if ((standardization.scale.array() <= 0).any()) throw InvalidArgument("standardization scale must be positive");
  }
}

WeightMatrix WeightMatrix::identity(int dim, std::string config_hash, MetricShape shape) {
  if (dim <= 0) throw InvalidArgument("identity metric needs a positive dimension");
  WeightMatrix w;
  w.shape = shape;
  w.input_dim = dim;
  if (shape == MetricShape::diagonal)
    w.diag = Eigen::VectorXd::Ones(dim);
  else
    w.full = Eigen::MatrixXd::Identity(dim, dim);
  w.config_hash = std::move(config_hash);
  w.provenance = {{"init", "identity"}};
  return w;
}

bool WeightMatrix::operator==(const WeightMatrix& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
  };
  return shape == o.shape && input_dim == o.input_dim && same(diag, o.diag) && same(full, o.full) &&
         same(projection, o.projection) && same(standardization.mean, o.standardization.mean) &&
         same(standardization.scale, o.standardization.scale) && config_hash == o.config_hash &&
         provenance == o.provenance;
}

// ------------------------------------------------------------ distance

double distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const WeightMatrix& w) {
  if (x.size() != w.input_dim || y.size() != w.input_dim)
    throw InvalidArgument("feature dimension " + std::to_string(x.size()) + "/" + std::to_string(y.size()) +
                          " does not match metric input dimension " + std::to_string(w.input_dim));
  if (x.hasNaN() || y.hasNaN()) throw InvalidArgument("NaN in feature vector");
  return std::sqrt(w.squared_distance(x, y));
}

namespace {

void check_hash(const FeatureVector& x, const WeightMatrix& w) {
  if (!w.config_hash.empty() && x.config_hash != w.config_hash)
    throw ConfigMismatch("features of '" + x.model_id + "' use config " + x.config_hash + " but the metric expects " +
                         w.config_hash);
}

const FeatureVector& lookup(const FeatureMap& features, const std::string& id) {
  auto it = features.find(id);
  if (it == features.end()) throw NotFound("no features for model '" + id + "'");
  return it->second;
}

}  // namespace

double distance(const FeatureVector& x, const FeatureVector& y, const WeightMatrix& w) {
  check_hash(x, w);
  check_hash(y, w);
  return distance(x.values, y.values, w);
}

// ------------------------------------------------------------ training

nlohmann::ordered_json TrainConfig::to_json() const {
  return {{"shape", to_string(shape)},
          {"lambda", lambda},
          {"seed", seed},
          {"max_epochs", max_epochs},
          {"tolerance", tolerance},
          {"init", init == MetricInit::identity ? "identity" : "random"},
          {"pca_dims", pca_dims},
          {"standardize", standardize},
          {"loss", "logistic triplet loss on squared distances"},
          {"optimizer", "projected gradient descent, backtracking line search"}};
}

namespace {

// Metric-space images of all models a triplet set touches.
struct TripletData {
  Eigen::MatrixXd U, V;  // columns: z_a - z_b, z_a - z_c
};

TripletData triplet_data(const WeightMatrix& frame, const std::vector<TripletRecord>& triplets,
                         const FeatureMap& features) {
  std::map<std::string, Eigen::VectorXd> z;
  auto image = [&](const std::string& id) -> const Eigen::VectorXd& {
    auto it = z.find(id);
    if (it != z.end()) return it->second;
    const FeatureVector& fv = lookup(features, id);
    check_hash(fv, frame);
    if (fv.values.size() != frame.input_dim)
      throw InvalidArgument("model '" + id + "' has " + std::to_string(fv.values.size()) + " features, expected " +
                            std::to_string(frame.input_dim));
    if (!fv.values.allFinite()) throw InvalidArgument("non-finite features for model '" + id + "'");
    return z.emplace(id, frame.transform(fv.values)).first->second;
  };
  const Eigen::Index d = frame.dim();
  TripletData data{Eigen::MatrixXd(d, static_cast<Eigen::Index>(triplets.size())),
                   Eigen::MatrixXd(d, static_cast<Eigen::Index>(triplets.size()))};
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    const auto& a = image(triplets[t].a);
    data.U.col(static_cast<Eigen::Index>(t)) = a - image(triplets[t].b);
    data.V.col(static_cast<Eigen::Index>(t)) = a - image(triplets[t].c);
  }
  return data;
}

// PCA frame of the standardized corpus: rows of the result are components.
Eigen::MatrixXd principal_components(const std::vector<Eigen::VectorXd>& rows, int k) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index D = rows.front().size();
  Eigen::MatrixXd X(n, D);
  for (Eigen::Index i = 0; i < n; ++i) X.row(i) = rows[static_cast<std::size_t>(i)].transpose();
  X.rowwise() -= X.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
  const Eigen::Index r = std::min<Eigen::Index>({static_cast<Eigen::Index>(k), svd.matrixV().cols(), D});
  Eigen::MatrixXd P = svd.matrixV().leftCols(r).transpose();
  for (Eigen::Index i = 0; i < r; ++i) {
    Eigen::Index arg = 0;
    P.row(i).cwiseAbs().maxCoeff(&arg);
    if (P(i, arg) < 0) P.row(i) *= -1.0;
  }
  return P;
}

WeightMatrix make_frame(const std::vector<TripletRecord>& triplets, const FeatureMap& features,
                        const TrainConfig& cfg) {
  const FeatureVector& first = lookup(features, triplets.front().a);
  WeightMatrix w;
  w.shape = cfg.shape;
  w.input_dim = static_cast<int>(first.values.size());
  w.config_hash = first.config_hash;
  if (cfg.standardize) {
    std::vector<const Eigen::VectorXd*> rows;
    rows.reserve(features.size());
    for (const auto& [id, fv] : features) {
      if (fv.values.size() != w.input_dim) throw InvalidArgument("feature vectors of mixed length");
      rows.push_back(&fv.values);
    }
    w.standardization = Standardization::fit(rows);
  }
  int d = w.input_dim;
  if (cfg.shape == MetricShape::full && cfg.pca_dims > 0 && cfg.pca_dims < w.input_dim) {
    std::vector<Eigen::VectorXd> rows;
    rows.reserve(features.size());
    for (const auto& [id, fv] : features) rows.push_back(w.standardization.apply(fv.values));
    w.projection = principal_components(rows, cfg.pca_dims);
    d = static_cast<int>(w.projection.rows());
  }
  Rng rng(mix_seed(cfg.seed, hash_string("metric-init")));
  if (cfg.shape == MetricShape::diagonal) {
    w.diag = Eigen::VectorXd::Ones(d);
    if (cfg.init == MetricInit::random)
      for (int i = 0; i < d; ++i) w.diag(i) = 2.0 * rng.uniform();
  } else {
    w.full = Eigen::MatrixXd::Identity(d, d);
    if (cfg.init == MetricInit::random) {
      Eigen::MatrixXd A(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = rng.normal();
      w.full = A * A.transpose() / static_cast<double>(d);
      w.full = (w.full + w.full.transpose()) / 2.0;
    }
  }
  return w;
}

template <class Param, class Loss, class Project>
void minimize(Param& x, Loss&& loss, Project&& project, const TrainConfig& cfg, TrainResult& result) {
  Param g;
  double f = loss(x, &g);
  if (!std::isfinite(f)) throw Error("non-finite training loss");
  result.loss_history.push_back(f);
  double eta = 1.0 / std::max(1.0, g.cwiseAbs().maxCoeff());
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    bool moved = false;
    Param x_new;
    double f_new = f;
    while (eta > 1e-20) {
      x_new = project(Param(x - eta * g));
      const Param step = x_new - x;
      const double sq = step.squaredNorm();
      if (sq == 0.0) break;
      f_new = loss(x_new, nullptr);
      if (!std::isfinite(f_new)) throw Error("non-finite training loss");
      const double model = f + (g.array() * step.array()).sum() + sq / (2.0 * eta);
      if (f_new <= model && f_new <= f) {
        moved = true;
        break;
      }
      eta *= 0.5;
    }
    if (!moved) break;
    const double decrease = f - f_new;
    x = std::move(x_new);
    f = loss(x, &g);
    result.loss_history.push_back(f);
    result.epochs = epoch + 1;
    if (decrease <= cfg.tolerance * std::max(1.0, std::abs(f))) break;
    eta *= 2.0;
  }
}

}  // namespace

TrainResult train_detailed(const std::vector<TripletRecord>& triplets, const FeatureMap& features,
                           const TrainConfig& cfg) {
  if (triplets.empty()) throw InvalidArgument("training needs at least one triplet");
  if (cfg.lambda < 0 || !std::isfinite(cfg.lambda)) throw InvalidArgument("lambda must be >= 0");
  if (cfg.max_epochs < 0) throw InvalidArgument("max_epochs must be >= 0");
  TrainResult result;
  result.w = make_frame(triplets, features, cfg);
  WeightMatrix& w = result.w;
  const TripletData data = triplet_data(w, triplets, features);

  if (cfg.shape == MetricShape::diagonal) {
    const Eigen::MatrixXd Q = diagonal_margin_basis(data.U, data.V);
    auto loss = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      return diagonal_triplet_loss<double>(x, Q, cfg.lambda, grad);
    };
    minimize(w.diag, loss, [](const Eigen::VectorXd& x) { return project_nonnegative<double>(x); }, cfg, result);
  } else {
    auto loss = [&](const Eigen::MatrixXd& x, Eigen::MatrixXd* grad) {
      return full_triplet_loss<double>(x, data.U, data.V, cfg.lambda, grad);
    };
    minimize(w.full, loss, [](const Eigen::MatrixXd& x) { return project_psd<double>(x); }, cfg, result);
  }

  std::set<std::string> models;
  for (const auto& t : triplets) models.insert({t.a, t.b, t.c});
  w.provenance = nlohmann::ordered_json::object();
  w.provenance["triplet_set"] = cfg.triplet_set;
  w.provenance["triplet_count"] = triplets.size();
  w.provenance["model_count"] = models.size();
  w.provenance["standardized_over"] = cfg.standardize ? features.size() : 0;
  w.provenance["optimizer"] = cfg.to_json();
  w.provenance["seed"] = cfg.seed;
  w.provenance["epochs"] = result.epochs;
  w.provenance["final_loss"] = result.loss_history.back();
  w.validate();
  return result;
}

WeightMatrix train(const std::vector<TripletRecord>& triplets, const FeatureMap& features, const TrainConfig& cfg) {
  return train_detailed(triplets, features, cfg).w;
}

double triplet_loss(const WeightMatrix& w, const std::vector<TripletRecord>& triplets, const FeatureMap& features,
                    double lambda) {
  const TripletData data = triplet_data(w, triplets, features);
  if (w.shape == MetricShape::diagonal)
    return diagonal_triplet_loss<double>(w.diag, diagonal_margin_basis(data.U, data.V), lambda);
  return full_triplet_loss<double>(w.full, data.U, data.V, lambda);
}

// ------------------------------------------------------------ evaluation

bool predict_triplet(const WeightMatrix& w, const TripletRecord& t, const FeatureMap& features) {
  const FeatureVector& a = lookup(features, t.a);
  const FeatureVector& b = lookup(features, t.b);
  const FeatureVector& c = lookup(features, t.c);
  return distance(a, b, w) < distance(a, c, w);
}

double triplet_accuracy(const WeightMatrix& w, const std::vector<TripletRecord>& triplets,
                        const FeatureMap& features) {
  if (triplets.empty()) throw InvalidArgument("accuracy of an empty triplet set");
  std::size_t correct = 0;
  for (const auto& t : triplets) correct += predict_triplet(w, t, features) ? 1 : 0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(triplets.size());
}

std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("cross validation needs at least two folds");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, hash_string("folds")));
  rng.shuffle(order);
  std::vector<int> fold(n);
  for (std::size_t r = 0; r < n; ++r) fold[order[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
  return fold;
}

CvResult cross_validate(const std::vector<TripletRecord>& triplets, const FeatureMap& features, int folds,
                        std::uint64_t seed, const TrainConfig& cfg) {
  if (folds < 2) throw InvalidArgument("cross validation needs at least two folds");
  if (triplets.size() < static_cast<std::size_t>(folds))
    throw InvalidArgument("cross validation needs at least " + std::to_string(folds) + " triplets, got " +
                          std::to_string(triplets.size()));
  const auto fold = fold_assignment(triplets.size(), folds, seed);
  CvResult r;
  double sum = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<TripletRecord> train_set, test_set;
    for (std::size_t i = 0; i < triplets.size(); ++i) (fold[i] == f ? test_set : train_set).push_back(triplets[i]);
    const WeightMatrix w = train(train_set, features, cfg);
    const double acc = triplet_accuracy(w, test_set, features);
    r.fold_accuracy.push_back(acc);
    r.fold_size.push_back(test_set.size());
    sum += acc;
  }
  r.accuracy = sum / folds;
  return r;
}

double cv_accuracy(const std::vector<TripletRecord>& triplets, const FeatureMap& features, int folds,
                   std::uint64_t seed, const TrainConfig& cfg) {
  return cross_validate(triplets, features, folds, seed, cfg).accuracy;
}

// ------------------------------------------------------------ persistence

nlohmann::ordered_json to_json(const WeightMatrix& w) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "weights";
  j["shape"] = to_string(w.shape);
  j["input_dim"] = w.input_dim;
  j["dim"] = w.dim();
  j["config_hash"] = w.config_hash;
  j["values"] = w.shape == MetricShape::diagonal ? to_json(w.diag) : to_json(w.full);
  j["projection"] = w.projection.size() ? to_json(w.projection) : nlohmann::ordered_json();
  if (w.standardization.empty())
    j["standardization"] = nullptr;
  else
    j["standardization"] = {{"mean", to_json(w.standardization.mean)}, {"scale", to_json(w.standardization.scale)}};
  j["provenance"] = w.provenance;
  return j;
}

WeightMatrix weight_matrix_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("kind").get<std::string>() != "weights") throw IoError("not a weight record");
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw IoError("unsupported weight schema version");
    WeightMatrix w;
    w.shape = parse_metric_shape(j.at("shape").get<std::string>());
    w.input_dim = j.at("input_dim").get<int>();
    w.config_hash = j.at("config_hash").get<std::string>();
    if (w.shape == MetricShape::diagonal)
      w.diag = vector_from_json(j.at("values"));
    else
      w.full = matrix_from_json(j.at("values"));
    if (!j.at("projection").is_null()) w.projection = matrix_from_json(j.at("projection"));
    const auto& s = j.at("standardization");
    if (!s.is_null()) {
      w.standardization.mean = vector_from_json(s.at("mean"));
      w.standardization.scale = vector_from_json(s.at("scale"));
    }
    w.provenance = j.at("provenance");
    if (j.at("dim").get<int>() != w.dim()) throw IoError("weight record dim does not match its values");
    w.validate();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad weight record: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("bad weight record: ") + e.what());
  }
}

void write_weights(const std::filesystem::path& path, const WeightMatrix& w) {
  w.validate();
  write_text_atomic(path, to_json(w).dump() + "\n");
}

WeightMatrix read_weights(const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad weight file " + path.string() + ": " + e.what());
  }
  return weight_matrix_from_json(j);
}

void check_compatible(const WeightMatrix& w, const FeatureSet& features) {
  if (!w.config_hash.empty() && w.config_hash != features.config_hash)
    throw ConfigMismatch("metric was trained on features with config " + w.config_hash +
                         " but the feature file has config " + features.config_hash);
  for (const auto& [id, fv] : features.vectors)
    if (fv.values.size() != w.input_dim)
      throw InvalidArgument("model '" + id + "' has " + std::to_string(fv.values.size()) +
                            " features, metric expects " + std::to_string(w.input_dim));
}

}  // namespace stylemetric
