#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "stylemetric/feature_vector.hpp"
#include "stylemetric/metric_kernels.hpp"
#include "stylemetric/triplet_record.hpp"

namespace stylemetric {

enum class MetricShape { diagonal, full };

std::string to_string(MetricShape s);
MetricShape parse_metric_shape(const std::string& s);

/// Per-dimension affine map x -> (x - mean) / scale.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // 1 where the corpus variance vanishes

  bool empty() const { return mean.size() == 0; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  static Standardization fit(const std::vector<const Eigen::VectorXd*>& rows);
};

/// A learned or fixed style metric. Inputs are standardized, then optionally
/// projected (rows of `projection`), then measured with `diag` or `full`.
struct WeightMatrix {
  MetricShape shape = MetricShape::diagonal;
  int input_dim = 0;
  Eigen::VectorXd diag;
  Eigen::MatrixXd full;
  Eigen::MatrixXd projection;  // dim x input_dim, empty for none
  Standardization standardization;
  std::string config_hash;
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();

  /// Dimension of the space W acts on.
  int dim() const;
  Eigen::VectorXd transform(const Eigen::VectorXd& x) const;
  double squared_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  /// Scales every entry by s > 0.
  WeightMatrix scaled(double s) const;
  /// Throws InvalidArgument on negative diagonal entries, asymmetry or negative eigenvalues.
  void validate() const;

  static WeightMatrix identity(int dim, std::string config_hash, MetricShape shape = MetricShape::diagonal);

  bool operator==(const WeightMatrix& o) const;
};

/// √((x−y)ᵀW(x−y)) after W's input transform. Checks dims, config hash and NaN.
double distance(const FeatureVector& x, const FeatureVector& y, const WeightMatrix& w);
double distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const WeightMatrix& w);

enum class MetricInit { identity, random };

struct TrainConfig {
  MetricShape shape = MetricShape::diagonal;
  double lambda = 1e-3;
  std::uint64_t seed = 0;
  int max_epochs = 400;
  double tolerance = 1e-7;  // relative loss decrease that ends training
  MetricInit init = MetricInit::identity;
  int pca_dims = 100;  // full shape only
  bool standardize = true;
  std::string triplet_set;  // recorded in provenance

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  WeightMatrix w;
  std::vector<double> loss_history;  // loss at init, then after every epoch
  int epochs = 0;
};

/// Minimizes the logistic triplet loss by projected gradient descent with
/// backtracking. Standardization is fitted on every vector of `features`.
TrainResult train_detailed(const std::vector<TripletRecord>& triplets, const FeatureMap& features,
                           const TrainConfig& config = {});
WeightMatrix train(const std::vector<TripletRecord>& triplets, const FeatureMap& features,
                   const TrainConfig& config = {});

/// Triplet loss of a weight matrix on the given data (same objective as training).
double triplet_loss(const WeightMatrix& w, const std::vector<TripletRecord>& triplets, const FeatureMap& features,
                    double lambda);

/// distance(a,b) < distance(a,c); an exact tie is false.
bool predict_triplet(const WeightMatrix& w, const TripletRecord& t, const FeatureMap& features);
/// Percentage of triplets predicted correctly.
double triplet_accuracy(const WeightMatrix& w, const std::vector<TripletRecord>& triplets, const FeatureMap& features);

/// Fold index per triplet: a seeded shuffle dealt round-robin, so sizes differ by at most one.
std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed);

struct CvResult {
  double accuracy = 0;  // mean over folds, percent
  std::vector<double> fold_accuracy;
  std::vector<std::size_t> fold_size;
};

CvResult cross_validate(const std::vector<TripletRecord>& triplets, const FeatureMap& features, int folds = 5,
                        std::uint64_t seed = 0, const TrainConfig& config = {});
double cv_accuracy(const std::vector<TripletRecord>& triplets, const FeatureMap& features, int folds = 5,
                   std::uint64_t seed = 0, const TrainConfig& config = {});

nlohmann::ordered_json to_json(const WeightMatrix& w);
WeightMatrix weight_matrix_from_json(const nlohmann::ordered_json& j);
void write_weights(const std::filesystem::path& path, const WeightMatrix& w);
WeightMatrix read_weights(const std::filesystem::path& path);

/// Hard error when features and weights come from different extraction configs.
void check_compatible(const WeightMatrix& w, const FeatureSet& features);

}  // namespace stylemetric
