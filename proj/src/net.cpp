#include "cgf/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "cgf/util.hpp"

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace cgf {

Mlp Mlp::init(const std::vector<int>& dims, std::uint64_t seed) {
  require(dims.size() >= 2, ErrorCode::InvalidArgument,
          "network needs at least input and output dimensions");
  for (int d : dims)
    require(d >= 1, ErrorCode::InvalidArgument, "layer dimensions must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.1);
  Mlp net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::Index rows = dims[l + 1], cols = dims[l];
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)      // row-major draw order
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(rows));
  }
  return net;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  require(input.size() == input_dim(), ErrorCode::Shape,
          "input dimension does not match the network");
  Eigen::VectorXd v = input;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    v = (weights[l] * v + biases[l]).eval();
    if (l + 1 < weights.size()) v = v.cwiseMax(0.0);
  }
  return v;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  require(inputs.rows() == input_dim(), ErrorCode::Shape,
          "input dimension does not match the network");
  Eigen::MatrixXd v = inputs;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    v = ((weights[l] * v).colwise() + biases[l]).eval();
    if (l + 1 < weights.size()) v = v.cwiseMax(0.0);
  }
  return v;
}

AdamState::AdamState(const Mlp& net) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    m_w_.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(),
                                         net.weights[l].cols()));
    v_w_.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(),
                                         net.weights[l].cols()));
    m_b_.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    v_b_.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
}

void AdamState::step(Mlp& net, const std::vector<Eigen::MatrixXd>& weight_grads,
                     const std::vector<Eigen::VectorXd>& bias_grads,
                     const AdamConfig& config) {
  require(weight_grads.size() == net.weights.size() &&
              bias_grads.size() == net.biases.size(),
          ErrorCode::Shape, "gradient layer count does not match the network");
  ++t_;
  double b1t = 1.0 - std::pow(config.beta1, static_cast<double>(t_));
  double b2t = 1.0 - std::pow(config.beta2, static_cast<double>(t_));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    m_w_[l] = config.beta1 * m_w_[l] + (1.0 - config.beta1) * weight_grads[l];
    v_w_[l] = config.beta2 * v_w_[l] +
              (1.0 - config.beta2) * weight_grads[l].cwiseProduct(weight_grads[l]);
    net.weights[l].array() -=
        config.learning_rate * (m_w_[l].array() / b1t) /
        ((v_w_[l].array() / b2t).sqrt() + config.epsilon);
    m_b_[l] = config.beta1 * m_b_[l] + (1.0 - config.beta1) * bias_grads[l];
    v_b_[l] = config.beta2 * v_b_[l] +
              (1.0 - config.beta2) * bias_grads[l].cwiseProduct(bias_grads[l]);
    net.biases[l].array() -=
        config.learning_rate * (m_b_[l].array() / b1t) /
        ((v_b_[l].array() / b2t).sqrt() + config.epsilon);
  }
}

namespace {

const Eigen::MatrixXd& table_of(const TripletSet& triplets, std::uint32_t index) {
  require(index < triplets.tables.size(), ErrorCode::Shape,
          "triplet references a missing table");
  return triplets.tables[index];
}

Eigen::VectorXd row_of(const TripletSet& triplets, std::uint32_t table,
                       std::uint32_t row) {
  const auto& t = table_of(triplets, table);
  require(row < t.rows(), ErrorCode::Shape, "triplet row out of range");
  return t.row(row);
}

// Stacks the batch as columns: anchors, then positives, then negatives.
Eigen::MatrixXd gather_batch(const TripletSet& triplets,
                             const std::vector<std::size_t>& batch) {
  require(!batch.empty(), ErrorCode::InvalidArgument, "empty batch");
  Eigen::Index dim = table_of(triplets, 0).cols();
  Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd x(dim, 3 * b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const TripletRef& ref = triplets.entries[batch[static_cast<std::size_t>(k)]];
    x.col(k) = row_of(triplets, ref.anchor_table, ref.anchor_row);
    x.col(b + k) = row_of(triplets, ref.positive_table, ref.positive_row);
    x.col(2 * b + k) = row_of(triplets, ref.negative_table, ref.negative_row);
  }
  return x;
}

}  // namespace

double triplet_batch_loss(const Mlp& net, const TripletSet& triplets,
                          const std::vector<std::size_t>& batch, double margin) {
  Eigen::MatrixXd out = net.forward_batch(gather_batch(triplets, batch));
  Eigen::Index b = out.cols() / 3;
  double total = 0.0;
  for (Eigen::Index k = 0; k < b; ++k) {
    double d_ap = (out.col(k) - out.col(b + k)).squaredNorm();
    double d_an = (out.col(k) - out.col(2 * b + k)).squaredNorm();
    total += std::max(d_ap - d_an + margin, 0.0);
  }
  return total / static_cast<double>(b);
}

double triplet_batch_gradients(const Mlp& net, const TripletSet& triplets,
                               const std::vector<std::size_t>& batch,
                               double margin,
                               std::vector<Eigen::MatrixXd>& weight_grads,
                               std::vector<Eigen::VectorXd>& bias_grads) {
  Eigen::MatrixXd input = gather_batch(triplets, batch);
  std::size_t layers = net.weights.size();

  // Forward pass keeping every activation (activations[0] is the input).
  std::vector<Eigen::MatrixXd> activations(layers + 1);
  activations[0] = input;
  for (std::size_t l = 0; l < layers; ++l) {
    activations[l + 1] =
        ((net.weights[l] * activations[l]).colwise() + net.biases[l]).eval();
    if (l + 1 < layers)
      activations[l + 1] = activations[l + 1].cwiseMax(0.0);
  }

  const Eigen::MatrixXd& out = activations[layers];
  Eigen::Index b = out.cols() / 3;
  double inv_b = 1.0 / static_cast<double>(b);
  double total = 0.0;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(out.rows(), out.cols());
  for (Eigen::Index k = 0; k < b; ++k) {
    Eigen::VectorXd ap = out.col(k) - out.col(b + k);
    Eigen::VectorXd an = out.col(k) - out.col(2 * b + k);
    double hinge = ap.squaredNorm() - an.squaredNorm() + margin;
    if (hinge > 0.0) {
      total += hinge;
      grad.col(k) = 2.0 * inv_b * (ap - an);
      grad.col(b + k) = -2.0 * inv_b * ap;
      grad.col(2 * b + k) = 2.0 * inv_b * an;
    }
  }

  weight_grads.resize(layers);
  bias_grads.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    weight_grads[l] = grad * activations[l].transpose();
    bias_grads[l] = grad.rowwise().sum();
    if (l > 0) {
      grad = (net.weights[l].transpose() * grad).eval();
      grad.array() *= (activations[l].array() > 0.0).cast<double>();
    }
  }
  return total * inv_b;
}

std::vector<LossRecord> train(Mlp& net, const TripletSet& triplets,
                              const TrainConfig& config) {
  require(!triplets.entries.empty(), ErrorCode::NoTriplets,
          "no triplets to train on");
  require(config.batch_size >= 1, ErrorCode::InvalidArgument,
          "batch size must be >= 1");
  require(config.epochs >= 0, ErrorCode::InvalidArgument,
          "epoch count must be >= 0");
  require(config.margin > 0.0, ErrorCode::InvalidArgument,
          "margin must be positive");

  AdamState adam(net);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<LossRecord> trace;
  std::vector<Eigen::MatrixXd> weight_grads;
  std::vector<Eigen::VectorXd> bias_grads;
  std::int64_t batch_counter = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
      double loss = triplet_batch_gradients(net, triplets, batch, config.margin,
                                            weight_grads, bias_grads);
      adam.step(net, weight_grads, bias_grads, config.adam);
      trace.push_back({epoch, batch_counter++, loss});
    }
  }
  return trace;
}

namespace {

void write_blob(std::ofstream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
}

void read_blob(std::ifstream& in, double* data, std::size_t count,
               const std::string& path) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(double)));
  require(in.gcount() ==
              static_cast<std::streamsize>(count * sizeof(double)),
          ErrorCode::ModelFormat, path + ": truncated parameter blob");
}

}  // namespace

void save_model(const Mlp& net, double margin, const std::string& path) {
  require(!net.weights.empty(), ErrorCode::InvalidArgument,
          "cannot save an empty network");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write: " + path);
  out << "CGF-NET1\n";
  out << "dims: " << net.input_dim();
  for (const auto& w : net.weights) out << ' ' << w.rows();
  out << "; margin: " << format_double(margin) << '\n';
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    // Row-major on disk; Eigen matrices are column-major in memory.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w =
        net.weights[l];
    write_blob(out, w.data(), static_cast<std::size_t>(w.size()));
    write_blob(out, net.biases[l].data(),
               static_cast<std::size_t>(net.biases[l].size()));
  }
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open: " + path);
  std::string magic;
  require(static_cast<bool>(std::getline(in, magic)) && magic == "CGF-NET1",
          ErrorCode::ModelFormat, path + ": bad magic");
  std::string header;
  require(static_cast<bool>(std::getline(in, header)), ErrorCode::ModelFormat,
          path + ": missing header line");

  auto semicolon = header.find(';');
  require(header.rfind("dims:", 0) == 0 && semicolon != std::string::npos,
          ErrorCode::ModelFormat, path + ": bad header line");
  std::istringstream dims_in(header.substr(5, semicolon - 5));
  std::vector<int> dims;
  int d = 0;
  while (dims_in >> d) {
    require(d >= 1, ErrorCode::ModelFormat, path + ": non-positive dimension");
    dims.push_back(d);
  }
  require(dims.size() >= 2, ErrorCode::ModelFormat,
          path + ": header needs at least two dimensions");
  std::string margin_part = header.substr(semicolon + 1);
  auto margin_pos = margin_part.find("margin:");
  require(margin_pos != std::string::npos, ErrorCode::ModelFormat,
          path + ": missing margin");
  double margin = 0.0;
  {
    std::istringstream margin_in(margin_part.substr(margin_pos + 7));
    margin_in >> margin;
    require(!margin_in.fail() && margin > 0.0, ErrorCode::ModelFormat,
            path + ": bad margin value");
  }

  LoadedModel loaded;
  loaded.margin = margin;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(
        dims[l + 1], dims[l]);
    read_blob(in, w.data(), static_cast<std::size_t>(w.size()), path);
    Eigen::VectorXd bias(dims[l + 1]);
    read_blob(in, bias.data(), static_cast<std::size_t>(bias.size()), path);
    loaded.net.weights.emplace_back(w);
    loaded.net.biases.push_back(std::move(bias));
  }
  char extra;
  require(!in.read(&extra, 1), ErrorCode::ModelFormat,
          path + ": trailing bytes after parameters");
  return loaded;
}

void write_triplets(const TripletSet& triplets, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write: " + path);
  out.write("CGF-TRI1", 8);
  std::uint64_t count = triplets.entries.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& e : triplets.entries) {
    std::uint32_t fields[6] = {e.anchor_table,   e.anchor_row,
                               e.positive_table, e.positive_row,
                               e.negative_table, e.negative_row};
    out.write(reinterpret_cast<const char*>(fields), sizeof(fields));
    char hard = e.hard ? 1 : 0;
    out.write(&hard, 1);
  }
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

TripletSet read_triplets(const std::string& path,
                         std::vector<Eigen::MatrixXd> tables) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  require(in.gcount() == 8 && std::memcmp(magic, "CGF-TRI1", 8) == 0,
          ErrorCode::Parse, path + ": bad triplet cache magic");
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  require(in.gcount() == sizeof(count), ErrorCode::Parse,
          path + ": truncated triplet count");
  TripletSet set;
  set.tables = std::move(tables);
  set.entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t fields[6];
    in.read(reinterpret_cast<char*>(fields), sizeof(fields));
    char hard = 0;
    in.read(&hard, 1);
    require(in.good(), ErrorCode::Parse, path + ": truncated triplet entry");
    TripletRef ref{fields[0], fields[1], fields[2],
                   fields[3], fields[4], fields[5], hard != 0};
    for (int k = 0; k < 3; ++k) {
      std::uint32_t table = fields[2 * k], row = fields[2 * k + 1];
      require(table < set.tables.size() &&
                  row < static_cast<std::uint64_t>(set.tables[table].rows()),
              ErrorCode::Parse, path + ": triplet index out of table range");
    }
    set.entries.push_back(ref);
  }
  return set;
}

TripletSet merge_triplet_sets(std::vector<TripletSet> sets) {
  TripletSet merged;
  std::uint32_t offset = 0;
  for (auto& set : sets) {
    for (auto& table : set.tables) merged.tables.push_back(std::move(table));
    for (auto entry : set.entries) {
      entry.anchor_table += offset;
      entry.positive_table += offset;
      entry.negative_table += offset;
      merged.entries.push_back(entry);
    }
    offset = static_cast<std::uint32_t>(merged.tables.size());
  }
  return merged;
}

FeatureSet embed_all(const Mlp& net, const Eigen::MatrixXd& histograms,
                     const std::vector<char>& valid) {
  require(static_cast<std::size_t>(histograms.rows()) == valid.size(),
          ErrorCode::Shape, "validity flags do not match histogram rows");
  require(histograms.cols() == net.input_dim(), ErrorCode::Shape,
          "histogram dimension does not match the network input");
  FeatureSet out;
  out.dim = net.output_dim();
  for (std::size_t i = 0; i < valid.size(); ++i)
    if (valid[i]) out.indices.push_back(i);
  Eigen::Index n = static_cast<Eigen::Index>(out.indices.size());
  Eigen::MatrixXd inputs(histograms.cols(), n);
  for (Eigen::Index k = 0; k < n; ++k)
    inputs.col(k) = histograms.row(
        static_cast<Eigen::Index>(out.indices[static_cast<std::size_t>(k)]));
  out.vectors = net.forward_batch(inputs).transpose();
  return out;
}

void write_feature_csv(const FeatureSet& features, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write: " + path);
  out << "index";
  for (int k = 0; k < features.dim; ++k) out << ",f" << k;
  out << '\n';
  for (std::size_t i = 0; i < features.size(); ++i) {
    out << features.indices[i];
    for (Eigen::Index k = 0; k < features.vectors.cols(); ++k)
      out << ',' << format_double(features.vectors(static_cast<Eigen::Index>(i), k));
    out << '\n';
  }
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

FeatureSet read_feature_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Parse,
          path + ": empty feature file");
  require(line.rfind("index", 0) == 0, ErrorCode::Parse,
          path + ": missing feature header");
  int dim = static_cast<int>(std::count(line.begin(), line.end(), ','));
  require(dim >= 1, ErrorCode::Parse, path + ": feature header lists no columns");

  FeatureSet out;
  out.dim = dim;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    require(static_cast<bool>(std::getline(row, cell, ',')), ErrorCode::Parse,
            path + ":" + std::to_string(line_no) + ": empty row");
    try {
      out.indices.push_back(static_cast<std::size_t>(std::stoull(cell)));
      int got = 0;
      while (std::getline(row, cell, ',')) {
        values.push_back(std::stod(cell));
        ++got;
      }
      require(got == dim, ErrorCode::Parse,
              path + ":" + std::to_string(line_no) + ": expected " +
                  std::to_string(dim) + " feature values, got " +
                  std::to_string(got));
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw_error(ErrorCode::Parse,
                  path + ":" + std::to_string(line_no) + ": bad numeric cell");
    }
  }
  out.vectors = Eigen::MatrixXd(static_cast<Eigen::Index>(out.indices.size()), dim);
  for (std::size_t i = 0; i < out.indices.size(); ++i)
    for (int k = 0; k < dim; ++k)
      out.vectors(static_cast<Eigen::Index>(i), k) =
          values[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(k)];
  return out;
}

}  // namespace cgf
