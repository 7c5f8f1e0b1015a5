#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgf/geometry.hpp"

namespace cgf {

// Fully connected ReLU network mapping histograms to compact descriptors.
// Hidden layers use ReLU; the output layer is linear.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: out_dim x in_dim
  std::vector<Eigen::VectorXd> biases;

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  std::size_t layer_count() const { return weights.size(); }

  // dims = {input, hidden..., output}. Weights ~ N(0, 0.1^2), biases zero.
  static Mlp init(const std::vector<int>& dims, std::uint64_t seed);

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  // Columns are samples.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second-moment state, one slot per parameter tensor.
class AdamState {
 public:
  explicit AdamState(const Mlp& net);

  // One update with the given gradients (same shapes as the net parameters).
  void step(Mlp& net, const std::vector<Eigen::MatrixXd>& weight_grads,
            const std::vector<Eigen::VectorXd>& bias_grads,
            const AdamConfig& config);

  std::int64_t step_count() const { return t_; }

 private:
  std::vector<Eigen::MatrixXd> m_w_, v_w_;
  std::vector<Eigen::VectorXd> m_b_, v_b_;
  std::int64_t t_ = 0;
};

// Triplets reference rows of histogram tables so multiple clouds can share
// one training set without copying vectors per triplet.
struct TripletRef {
  std::uint32_t anchor_table, anchor_row;
  std::uint32_t positive_table, positive_row;
  std::uint32_t negative_table, negative_row;
  bool hard = false;
};

struct TripletSet {
  std::vector<Eigen::MatrixXd> tables;  // rows are histograms
  std::vector<TripletRef> entries;

  std::size_t size() const { return entries.size(); }
};

// Binary cache: magic "CGF-TRI1", little-endian 64-bit count, then per entry
// six little-endian 32-bit indices (anchor/positive/negative table and row)
// and a hard flag byte.
void write_triplets(const TripletSet& triplets, const std::string& path);
// Rebinds cached index triples to the given tables.
TripletSet read_triplets(const std::string& path,
                         std::vector<Eigen::MatrixXd> tables);

// Concatenates sets, offsetting table indices; entry order is preserved.
TripletSet merge_triplet_sets(std::vector<TripletSet> sets);

struct TrainConfig {
  std::vector<int> hidden_dims = {512, 512, 512, 512, 512};
  int output_dim = 32;
  double margin = 1.0;
  int epochs = 3;
  int batch_size = 512;
  AdamConfig adam;
  std::uint64_t seed = 0;
};

struct LossRecord {
  int epoch;
  std::int64_t batch;
  double loss;
};

// Mean hinge loss over a batch of triplets:
//   max(|f(a) - f(p)|^2 - |f(a) - f(n)|^2 + margin, 0)
double triplet_batch_loss(const Mlp& net, const TripletSet& triplets,
                          const std::vector<std::size_t>& batch, double margin);

// Loss and parameter gradients for one batch.
double triplet_batch_gradients(const Mlp& net, const TripletSet& triplets,
                               const std::vector<std::size_t>& batch,
                               double margin,
                               std::vector<Eigen::MatrixXd>& weight_grads,
                               std::vector<Eigen::VectorXd>& bias_grads);

// Minibatch training with a fresh shuffle per epoch. Returns the per-batch
// loss trace.
std::vector<LossRecord> train(Mlp& net, const TripletSet& triplets,
                              const TrainConfig& config);

// Model file: magic line "CGF-NET1", header line
// "dims: <input> <hidden...> <output>; margin: <m>", then little-endian
// 64-bit-double blob, per layer the row-major weight matrix then the bias
// vector.
void save_model(const Mlp& net, double margin, const std::string& path);
struct LoadedModel {
  Mlp net;
  double margin;
};
LoadedModel load_model(const std::string& path);

// Descriptors for every valid row of a featurized cloud.
struct FeatureSet {
  int dim = 0;
  std::vector<std::size_t> indices;  // original point indices
  Eigen::MatrixXd vectors;           // rows parallel to indices

  std::size_t size() const { return indices.size(); }
};

FeatureSet embed_all(const Mlp& net, const Eigen::MatrixXd& histograms,
                     const std::vector<char>& valid);

// Feature CSV: header "index,f0,...,f{n-1}", one row per descriptor.
void write_feature_csv(const FeatureSet& features, const std::string& path);
FeatureSet read_feature_csv(const std::string& path);

}  // namespace cgf
