// Command-line front end for the cgf pipeline:
//   synth -> featurize -> mine -> train -> embed -> match -> eval -> register
// plus the pca baseline and the bench query timer. Talks to the library
// exclusively through the C API.
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cgf.h"

using nlohmann::json;

namespace {

[[noreturn]] void fail(cgf_status status, const std::string& message) {
  std::cerr << "error: " << cgf_status_name(status) << ": " << message << "\n";
  std::exit(1);
}

void check(cgf_status status) {
  if (status != CGF_OK) fail(status, cgf_last_error());
}

std::string hex64(uint64_t value) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "0x%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

uint64_t stage_seed(uint64_t root, const std::string& stage) {
  uint64_t out = 0;
  check(cgf_derive_seed(root, stage.c_str(), &out));
  return out;
}

// Sidecar record that makes a run replayable: the exact command line, the
// effective config and its hash, the root seed, input-file hashes, and the
// produced artifacts. Never contains timestamps.
class RunManifest {
 public:
  explicit RunManifest(const std::string& command,
                       const std::vector<std::string>& argv) {
    j_["command"] = command;
    j_["argv"] = argv;
    j_["inputs"] = json::object();
    j_["outputs"] = json::array();
  }

  void input(const std::string& path) {
    uint64_t h = 0;
    check(cgf_hash_file(path.c_str(), &h));
    j_["inputs"][path] = hex64(h);
  }

  void output(const std::string& path) { j_["outputs"].push_back(path); }

  void config(json cfg) {
    std::string dumped = cfg.dump();
    uint64_t h = 0;
    check(cgf_hash_bytes(dumped.data(), dumped.size(), &h));
    j_["config"] = std::move(cfg);
    j_["config_hash"] = hex64(h);
  }

  void seed(uint64_t value) { j_["seed"] = value; }

  void write_to(const std::string& path) {
    std::ofstream out(path);
    if (!out.good()) fail(CGF_IO, "cannot write: " + path);
    out << j_.dump(2) << '\n';
    if (!out.good()) fail(CGF_IO, "write failed: " + path);
  }

  void write_sidecar(const std::string& primary) {
    write_to(primary + ".run.json");
  }

 private:
  json j_;
};

json load_config(const std::string& path,
                 const std::vector<std::string>& allowed_keys) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in.good()) fail(CGF_IO, "cannot open: " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    fail(CGF_PARSE, path + ": " + e.what());
  }
  if (!cfg.is_object()) fail(CGF_PARSE, path + ": config must be an object");
  for (const auto& item : cfg.items()) {
    bool known = false;
    for (const auto& key : allowed_keys)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      fail(CGF_INVALID_ARGUMENT, path + ": unknown config key: " + item.key());
  }
  return cfg;
}

// Precedence: explicit flag > config file > default already held in `value`.
template <typename T>
T pick(const CLI::App* cmd, const std::string& flag, const json& cfg,
       const std::string& key, const T& value) {
  if (cmd->count(flag) > 0) return value;
  if (cfg.contains(key)) {
    try {
      return cfg.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(CGF_PARSE, "config key " + key + ": " + e.what());
    }
  }
  return value;
}

cgf_cloud* read_cloud_or_fail(const std::string& path) {
  cgf_cloud* cloud = nullptr;
  check(cgf_cloud_read(path.c_str(), &cloud));
  return cloud;
}

// ---- shared histogram parameter flags -----------------------------------

struct HistogramFlags {
  std::string units = "diameter";
  int radial = 17;
  int elevation = 11;
  int azimuth = 12;
  double radius = std::nan("");
  double min_radius = std::nan("");
  double lrf_radius = std::nan("");
  double normal_radius = 0.0;
  int threads = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--units", units,
                    "radius units: diameter (fractions of the cloud's "
                    "bounding-box diagonal) or absolute")
        ->check(CLI::IsMember({"diameter", "absolute"}));
    cmd->add_option("--radial", radial, "radial bin count (default 17)");
    cmd->add_option("--elevation", elevation, "elevation bin count (default 11)");
    cmd->add_option("--azimuth", azimuth, "azimuth bin count (default 12)");
    cmd->add_option("--radius", radius,
                    "histogram support radius (default 0.17 diameter / 1.2)");
    cmd->add_option("--min-radius", min_radius,
                    "innermost radial threshold (default 0.015 diameter / 0.1)");
    cmd->add_option("--lrf-radius", lrf_radius,
                    "local-frame radius (default 0.02 diameter / 0.25)");
    cmd->add_option("--normal-radius", normal_radius,
                    "normal-estimation radius (default: lrf radius)");
    cmd->add_option("--threads", threads, "worker threads (0: all cores)");
  }

  // Resolves units and per-unit defaults against a concrete diameter.
  cgf_histogram_params resolve(const CLI::App* cmd, const json& cfg,
                               double diameter) const {
    std::string u = pick(cmd, "--units", cfg, "units", units);
    bool relative = u == "diameter";
    double scale = relative ? diameter : 1.0;
    double r = pick(cmd, "--radius", cfg, "radius", radius);
    double r_min = pick(cmd, "--min-radius", cfg, "min_radius", min_radius);
    double lrf = pick(cmd, "--lrf-radius", cfg, "lrf_radius", lrf_radius);
    double normal = pick(cmd, "--normal-radius", cfg, "normal_radius",
                         normal_radius);
    if (std::isnan(r)) r = relative ? 0.17 : 1.2;
    if (std::isnan(r_min)) r_min = relative ? 0.015 : 0.1;
    if (std::isnan(lrf)) lrf = relative ? 0.02 : 0.25;

    cgf_histogram_params params;
    cgf_histogram_params_default(&params);
    params.radial_bins = pick(cmd, "--radial", cfg, "radial_bins", radial);
    params.elevation_bins =
        pick(cmd, "--elevation", cfg, "elevation_bins", elevation);
    params.azimuth_bins = pick(cmd, "--azimuth", cfg, "azimuth_bins", azimuth);
    params.radius = r * scale;
    params.min_radius = r_min * scale;
    params.lrf_radius = lrf * scale;
    params.normal_radius = normal * scale;
    params.threads = pick(cmd, "--threads", cfg, "threads", threads);
    return params;
  }

  static std::vector<std::string> config_keys() {
    return {"units",      "radial_bins",   "elevation_bins",
            "azimuth_bins", "radius",      "min_radius",
            "lrf_radius", "normal_radius", "threads"};
  }

  static json effective(const cgf_histogram_params& p) {
    return json{{"radial_bins", p.radial_bins},
                {"elevation_bins", p.elevation_bins},
                {"azimuth_bins", p.azimuth_bins},
                {"radius", p.radius},
                {"min_radius", p.min_radius},
                {"lrf_radius", p.lrf_radius},
                {"normal_radius", p.normal_radius},
                {"threads", p.threads}};
  }
};

// ---- synth ---------------------------------------------------------------

struct SynthOpts {
  std::string surface = "sphere";
  int views = 6;
  int samples = 16000;
  double noise = 0.0;
  uint64_t seed = 0;
  std::string out;
  std::string format = "xyz";
  std::string config_path;
};

void run_synth(const SynthOpts& o, const CLI::App* cmd,
               const std::vector<std::string>& argv) {
  json cfg = load_config(o.config_path,
                         {"surface", "views", "samples", "noise", "format"});
  std::string surface = pick(cmd, "--surface", cfg, "surface", o.surface);
  int views = pick(cmd, "--views", cfg, "views", o.views);
  int samples = pick(cmd, "--samples", cfg, "samples", o.samples);
  double noise = pick(cmd, "--noise", cfg, "noise", o.noise);
  std::string format = pick(cmd, "--format", cfg, "format", o.format);

  cgf_set* set = nullptr;
  check(cgf_synthesize(surface.c_str(), views, samples, noise,
                       stage_seed(o.seed, "synth"), &set));
  check(cgf_set_write(set, o.out.c_str(), format.c_str()));
  size_t count = 0;
  check(cgf_set_size(set, &count));
  cgf_set_free(set);

  RunManifest manifest("synth", argv);
  if (!o.config_path.empty()) manifest.input(o.config_path);
  manifest.config(json{{"surface", surface},
                       {"views", views},
                       {"samples", samples},
                       {"noise", noise},
                       {"format", format}});
  manifest.seed(o.seed);
  for (size_t k = 0; k < count; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "view_%03zu.%s", k, format.c_str());
    manifest.output(o.out + "/" + name);
  }
  manifest.output(o.out + "/manifest.txt");
  manifest.write_to(o.out + "/run.json");
  std::cout << "wrote " << count << " views to " << o.out << "\n";
}

// ---- featurize -------------------------------------------------------------

struct FeaturizeOpts {
  std::string cloud;
  std::string out;
  std::string config_path;
  HistogramFlags hist;
};

void run_featurize(const FeaturizeOpts& o, const CLI::App* cmd,
                   const std::vector<std::string>& argv) {
  json cfg = load_config(o.config_path, HistogramFlags::config_keys());
  cgf_cloud* cloud = read_cloud_or_fail(o.cloud);
  double diameter = 0.0;
  check(cgf_cloud_diameter(cloud, &diameter));
  cgf_histogram_params params = o.hist.resolve(cmd, cfg, diameter);

  cgf_histograms* histograms = nullptr;
  check(cgf_featurize(cloud, &params, &histograms));
  cgf_cloud_free(cloud);
  check(cgf_histograms_write(histograms, o.out.c_str()));
  size_t total = 0, valid = 0;
  check(cgf_histograms_count(histograms, &total));
  check(cgf_histograms_valid_count(histograms, &valid));
  cgf_histograms_free(histograms);

  RunManifest manifest("featurize", argv);
  manifest.input(o.cloud);
  if (!o.config_path.empty()) manifest.input(o.config_path);
  manifest.config(HistogramFlags::effective(params));
  manifest.output(o.out);
  manifest.write_sidecar(o.out);
  std::cout << "featurized " << valid << "/" << total << " points -> " << o.out
            << "\n";
}

// ---- mine ------------------------------------------------------------------

struct MineOpts {
  std::vector<std::string> manifests;
  std::vector<std::string> histograms;
  std::string out;
  std::string config_path;
  std::string units = "diameter";
  double tau = 0.0;
  int per_point = 40;
  int hard = 15;
  int random = 25;
  double min_overlap = 0.3;
  uint64_t max_anchors = 0;
  uint64_t seed = 0;
};

void run_mine(const MineOpts& o, const CLI::App* cmd,
              const std::vector<std::string>& argv) {
  json cfg = load_config(
      o.config_path,
      {"units", "tau", "triplets_per_point", "hard_negatives_per_point",
       "random_negatives_per_point", "min_overlap", "max_anchors_per_pair"});
  std::string units = pick(cmd, "--units", cfg, "units", o.units);
  double tau = pick(cmd, "--tau", cfg, "tau", o.tau);

  cgf_mining_params params;
  cgf_mining_params_default(&params);
  params.triplets_per_point =
      pick(cmd, "--per-point", cfg, "triplets_per_point", o.per_point);
  params.hard_negatives_per_point =
      pick(cmd, "--hard", cfg, "hard_negatives_per_point", o.hard);
  params.random_negatives_per_point =
      pick(cmd, "--random", cfg, "random_negatives_per_point", o.random);
  params.min_overlap =
      pick(cmd, "--min-overlap", cfg, "min_overlap", o.min_overlap);
  params.max_anchors_per_pair = static_cast<size_t>(
      pick(cmd, "--max-anchors", cfg, "max_anchors_per_pair", o.max_anchors));

  std::vector<cgf_triplets*> mined;
  size_t next_histogram = 0;
  json set_summaries = json::array();
  for (size_t m = 0; m < o.manifests.size(); ++m) {
    cgf_set* set = nullptr;
    check(cgf_set_read(o.manifests[m].c_str(), &set));
    size_t views = 0;
    check(cgf_set_size(set, &views));
    if (next_histogram + views > o.histograms.size())
      fail(CGF_SHAPE, "need one histogram file per view; got " +
                          std::to_string(o.histograms.size()) + " for " +
                          std::to_string(next_histogram + views) + "+ views");

    std::vector<cgf_histograms*> tables(views, nullptr);
    for (size_t v = 0; v < views; ++v)
      check(cgf_histograms_read(o.histograms[next_histogram + v].c_str(),
                                &tables[v]));
    next_histogram += views;

    double diameter = 0.0;
    check(cgf_set_diameter(set, &diameter));
    double resolved_tau = tau > 0.0
                              ? (units == "diameter" ? tau * diameter : tau)
                              : 0.01 * diameter;
    params.tau = resolved_tau;
    params.seed = stage_seed(o.seed, "mine-" + std::to_string(m));

    cgf_triplets* triplets = nullptr;
    check(cgf_mine(set, tables.data(), tables.size(), &params, &triplets));
    mined.push_back(triplets);
    set_summaries.push_back(json{{"manifest", o.manifests[m]},
                                 {"views", views},
                                 {"tau", resolved_tau}});
    for (auto* t : tables) cgf_histograms_free(t);
    cgf_set_free(set);
  }
  if (next_histogram != o.histograms.size())
    fail(CGF_SHAPE, "histogram files left over: " +
                        std::to_string(o.histograms.size() - next_histogram));

  cgf_triplets* merged = nullptr;
  std::vector<const cgf_triplets*> views_const(mined.begin(), mined.end());
  check(cgf_triplets_merge(views_const.data(), views_const.size(), &merged));
  check(cgf_triplets_write(merged, o.out.c_str()));
  size_t count = 0;
  check(cgf_triplets_count(merged, &count));
  cgf_triplets_free(merged);
  for (auto* t : mined) cgf_triplets_free(t);

  RunManifest manifest("mine", argv);
  for (const auto& path : o.manifests) manifest.input(path);
  for (const auto& path : o.histograms) manifest.input(path);
  if (!o.config_path.empty()) manifest.input(o.config_path);
  manifest.config(json{
      {"sets", set_summaries},
      {"triplets_per_point", params.triplets_per_point},
      {"hard_negatives_per_point", params.hard_negatives_per_point},
      {"random_negatives_per_point", params.random_negatives_per_point},
      {"min_overlap", params.min_overlap},
      {"max_anchors_per_pair", params.max_anchors_per_pair}});
  manifest.seed(o.seed);
  manifest.output(o.out);
  manifest.write_sidecar(o.out);
  std::cout << "mined " << count << " triplets -> " << o.out << "\n";
}

// ---- train -----------------------------------------------------------------

struct TrainOpts {
  std::string triplets;
  std::vector<std::string> histograms;
  std::string out;
  std::string config_path;
  std::vector<int> hidden;
  int dim = 32;
  double margin = 1.0;
  int epochs = 3;
  int batch = 512;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  int log_every = 100;
};

void train_progress(int epoch, int64_t batch, double loss, void* user) {
  int log_every = *static_cast<int*>(user);
  if (log_every > 0 && batch % log_every == 0)
    std::cout << "epoch " << epoch << " batch " << batch << " loss " << loss
              << "\n";
}

void run_train(const TrainOpts& o, const CLI::App* cmd,
               const std::vector<std::string>& argv) {
  json cfg = load_config(o.config_path,
                         {"hidden_dims", "output_dim", "margin", "epochs",
                          "batch_size", "learning_rate", "beta1", "beta2",
                          "epsilon"});
  cgf_train_params params;
  cgf_train_params_default(&params);
  std::vector<int> hidden = pick(cmd, "--hidden", cfg, "hidden_dims",
                                 o.hidden.empty() ? std::vector<int>{512, 512,
                                                                     512, 512,
                                                                     512}
                                                  : o.hidden);
  if (hidden.empty() || hidden.size() > 8)
    fail(CGF_INVALID_ARGUMENT, "--hidden takes 1 to 8 layer sizes");
  params.hidden_count = static_cast<int>(hidden.size());
  for (size_t k = 0; k < hidden.size(); ++k)
    params.hidden_dims[k] = hidden[k];
  params.output_dim = pick(cmd, "--dim", cfg, "output_dim", o.dim);
  params.margin = pick(cmd, "--margin", cfg, "margin", o.margin);
  params.epochs = pick(cmd, "--epochs", cfg, "epochs", o.epochs);
  params.batch_size = pick(cmd, "--batch", cfg, "batch_size", o.batch);
  params.learning_rate = pick(cmd, "--lr", cfg, "learning_rate", o.lr);
  params.beta1 = pick(cmd, "--beta1", cfg, "beta1", o.beta1);
  params.beta2 = pick(cmd, "--beta2", cfg, "beta2", o.beta2);
  params.epsilon = pick(cmd, "--epsilon", cfg, "epsilon", o.adam_eps);
  params.seed = o.seed;

  std::vector<cgf_histograms*> tables(o.histograms.size(), nullptr);
  for (size_t k = 0; k < o.histograms.size(); ++k)
    check(cgf_histograms_read(o.histograms[k].c_str(), &tables[k]));
  cgf_triplets* triplets = nullptr;
  std::vector<const cgf_histograms*> tables_const(tables.begin(), tables.end());
  check(cgf_triplets_read(o.triplets.c_str(), tables_const.data(),
                          tables_const.size(), &triplets));

  int log_every = o.log_every;
  cgf_model* model = nullptr;
  check(cgf_train(triplets, &params, train_progress, &log_every, &model));
  check(cgf_model_save(model, o.out.c_str()));
  size_t in_dim = 0, out_dim = 0;
  check(cgf_model_input_dim(model, &in_dim));
  check(cgf_model_output_dim(model, &out_dim));
  cgf_model_free(model);
  cgf_triplets_free(triplets);
  for (auto* t : tables) cgf_histograms_free(t);

  RunManifest manifest("train", argv);
  manifest.input(o.triplets);
  for (const auto& path : o.histograms) manifest.input(path);
  if (!o.config_path.empty()) manifest.input(o.config_path);
  manifest.config(json{{"hidden_dims", hidden},
                       {"output_dim", params.output_dim},
                       {"margin", params.margin},
                       {"epochs", params.epochs},
                       {"batch_size", params.batch_size},
                       {"learning_rate", params.learning_rate},
                       {"beta1", params.beta1},
                       {"beta2", params.beta2},
                       {"epsilon", params.epsilon}});
  manifest.seed(o.seed);
  manifest.output(o.out);
  manifest.write_sidecar(o.out);
  std::cout << "trained " << in_dim << " -> " << out_dim << " model -> "
            << o.out << "\n";
}

// ---- embed -----------------------------------------------------------------

struct EmbedOpts {
  std::string model;
  std::string histograms;
  std::string out;
};

void run_embed(const EmbedOpts& o, const std::vector<std::string>& argv) {
  cgf_model* model = nullptr;
  check(cgf_model_load(o.model.c_str(), &model));
  cgf_histograms* histograms = nullptr;
  check(cgf_histograms_read(o.histograms.c_str(), &histograms));
  cgf_features* features = nullptr;
  check(cgf_embed(model, histograms, &features));
  check(cgf_features_write_csv(features, o.out.c_str()));
  size_t count = 0, dim = 0;
  check(cgf_features_count(features, &count));
  check(cgf_features_dim(features, &dim));
  cgf_features_free(features);
  cgf_histograms_free(histograms);
  cgf_model_free(model);

  RunManifest manifest("embed", argv);
  manifest.input(o.model);
  manifest.input(o.histograms);
  manifest.config(json::object());
  manifest.output(o.out);
  manifest.write_sidecar(o.out);
  std::cout << "embedded " << count << " descriptors of dim " << dim << " -> "
            << o.out << "\n";
}

// ---- match -----------------------------------------------------------------

struct MatchOpts {
  std::string src;
  std::string dst;
  std::string out;
};

void run_match(const MatchOpts& o, const std::vector<std::string>& argv) {
  cgf_features* src = nullptr;
  check(cgf_features_read_csv(o.src.c_str(), &src));
  cgf_features* dst = nullptr;
  check(cgf_features_read_csv(o.dst.c_str(), &dst));
  cgf_matches* matches = nullptr;
  check(cgf_match(src, dst, &matches));
  check(cgf_matches_write_csv(matches, o.out.c_str()));
  size_t count = 0;
  check(cgf_matches_count(matches, &count));
  cgf_matches_free(matches);
  cgf_features_free(dst);
  cgf_features_free(src);

  RunManifest manifest("match", argv);
  manifest.input(o.src);
  manifest.input(o.dst);
  manifest.config(json::object());
  manifest.output(o.out);
  manifest.write_sidecar(o.out);
  std::cout << "matched " << count << " correspondences -> " << o.out << "\n";
}

// ---- eval ------------------------------------------------------------------

struct EvalOpts {
  std::string manifest;
  std::string pair;
  std::string src_features;
  std::string dst_features;
  std::string out;
  std::string out_matches;
  std::string config_path;
  std::string units = "diameter";
  double tau = 0.0;
  double curve_max = 0.0;
  int curve_steps = 40;
};

void parse_pair(const std::string& text, size_t views, size_t* i, size_t* j) {
  auto comma = text.find(',');
  bool ok = comma != std::string::npos;
  if (ok) {
    try {
      size_t used_i = 0, used_j = 0;
      *i = std::stoull(text.substr(0, comma), &used_i);
      *j = std::stoull(text.substr(comma + 1), &used_j);
      ok = used_i == comma && comma + 1 + used_j == text.size();
    } catch (const std::exception&) {
      ok = false;
    }
  }
  if (!ok)
    fail(CGF_INVALID_ARGUMENT, "--pair expects \"i,j\", got: " + text);
  if (*i == *j || *i >= views || *j >= views)
    fail(CGF_PAIR_NOT_FOUND, "pair " + text + " not in an aligned set of " +
                                 std::to_string(views) + " views");
}

void run_eval(const EvalOpts& o, const CLI::App* cmd,
              const std::vector<std::string>& argv) {
  json cfg = load_config(o.config_path,
                         {"units", "tau", "curve_max", "curve_steps"});
  std::string units = pick(cmd, "--units", cfg, "units", o.units);
  double tau = pick(cmd, "--tau", cfg, "tau", o.tau);
  double curve_max = pick(cmd, "--curve-max", cfg, "curve_max", o.curve_max);
  int curve_steps = pick(cmd, "--curve-steps", cfg, "curve_steps",
                         o.curve_steps);
  if (curve_steps < 2)
    fail(CGF_INVALID_ARGUMENT, "--curve-steps must be at least 2");

  cgf_set* set = nullptr;
  check(cgf_set_read(o.manifest.c_str(), &set));
  size_t views = 0;
  check(cgf_set_size(set, &views));
  size_t i = 0, j = 0;
  parse_pair(o.pair, views, &i, &j);

  double diameter = 0.0;
  check(cgf_set_diameter(set, &diameter));
  double scale = units == "diameter" ? diameter : 1.0;
  double resolved_tau = tau > 0.0 ? tau * scale : 0.01 * diameter;
  double resolved_max = curve_max > 0.0 ? curve_max * scale : 0.03 * diameter;

  cgf_cloud* src_cloud = nullptr;
  check(cgf_set_cloud(set, i, &src_cloud));
  cgf_cloud* dst_cloud = nullptr;
  check(cgf_set_cloud(set, j, &dst_cloud));
  double src_to_world[16], dst_to_world[16];
  check(cgf_set_transform(set, i, src_to_world));
  check(cgf_set_transform(set, j, dst_to_world));
  cgf_set_free(set);

  cgf_features* src = nullptr;
  check(cgf_features_read_csv(o.src_features.c_str(), &src));
  cgf_features* dst = nullptr;
  check(cgf_features_read_csv(o.dst_features.c_str(), &dst));
  cgf_matches* matches = nullptr;
  check(cgf_match(src, dst, &matches));
  cgf_matches* retained = nullptr;
  check(cgf_prune_matches(matches, src_cloud, src_to_world, dst_cloud,
                          dst_to_world, resolved_tau, &retained));

  std::vector<double> thresholds(static_cast<size_t>(curve_steps));
  for (int k = 0; k < curve_steps; ++k)
    thresholds[static_cast<size_t>(k)] =
        resolved_max * static_cast<double>(k) /
        static_cast<double>(curve_steps - 1);
  std::vector<double> fractions(thresholds.size(), 0.0);
  check(cgf_precision_curve(retained, src_cloud, src_to_world, dst_cloud,
                            dst_to_world, thresholds.data(), thresholds.size(),
                            fractions.data()));
  double at_tau = 0.0;
  check(cgf_precision(retained, src_cloud, src_to_world, dst_cloud,
                      dst_to_world, resolved_tau, &at_tau));
  check(cgf_precision_csv_write(thresholds.data(), fractions.data(),
                                thresholds.size(), o.out.c_str()));

  if (!o.out_matches.empty()) {
    cgf_matches* residuals = nullptr;
    check(cgf_world_residuals(retained, src_cloud, src_to_world, dst_cloud,
                              dst_to_world, &residuals));
    check(cgf_matches_write_csv(residuals, o.out_matches.c_str()));
    cgf_matches_free(residuals);
  }

  size_t total = 0, kept = 0;
  check(cgf_matches_count(matches, &total));
  check(cgf_matches_count(retained, &kept));
  cgf_matches_free(retained);
  cgf_matches_free(matches);
  cgf_cloud_free(dst_cloud);
  cgf_cloud_free(src_cloud);
  cgf_features_free(dst);
  cgf_features_free(src);

  RunManifest manifest("eval", argv);
  manifest.input(o.manifest);
  manifest.input(o.src_features);
  manifest.input(o.dst_features);
  if (!o.config_path.empty()) manifest.input(o.config_path);
  manifest.config(json{{"pair", o.pair},
                       {"tau", resolved_tau},
                       {"curve_max", resolved_max},
                       {"curve_steps", curve_steps}});
  manifest.output(o.out);
  if (!o.out_matches.empty()) manifest.output(o.out_matches);
  manifest.write_sidecar(o.out);
  std::cout << "retained " << kept << "/" << total << " matches, precision@tau "
            << at_tau << " -> " << o.out << "\n";
}

// ---- register --------------------------------------------------------------

struct RegisterOpts {
  std::string src;
  std::string dst;
  std::string manifest;
  std::string pair;
  std::string model;
  std::string out;
  std::string config_path;
  HistogramFlags hist;
  int iterations = 1000;
  double inlier_threshold = std::nan("");
  double gt_tau = std::nan("");
  double success_rmse = std::nan("");
  uint64_t seed = 0;
};

void run_register(const RegisterOpts& o, const CLI::App* cmd,
                  const std::vector<std::string>& argv) {
  auto keys = HistogramFlags::config_keys();
  keys.insert(keys.end(), {"iterations", "inlier_threshold", "gt_tau",
                           "success_rmse"});
  json cfg = load_config(o.config_path, keys);

  bool from_manifest = !o.manifest.empty();
  cgf_cloud* src_cloud = nullptr;
  cgf_cloud* dst_cloud = nullptr;
  double src_to_world[16], dst_to_world[16];
  double diameter = 0.0;
  if (from_manifest) {
    if (o.pair.empty())
      fail(CGF_INVALID_ARGUMENT, "--manifest requires --pair");
    cgf_set* set = nullptr;
    check(cgf_set_read(o.manifest.c_str(), &set));
    size_t views = 0;
    check(cgf_set_size(set, &views));
    size_t i = 0, j = 0;
    parse_pair(o.pair, views, &i, &j);
    check(cgf_set_cloud(set, i, &src_cloud));
    check(cgf_set_cloud(set, j, &dst_cloud));
    check(cgf_set_transform(set, i, src_to_world));
    check(cgf_set_transform(set, j, dst_to_world));
    check(cgf_set_diameter(set, &diameter));
    cgf_set_free(set);
  } else {
    if (o.src.empty() || o.dst.empty())
      fail(CGF_INVALID_ARGUMENT,
           "register needs either --manifest with --pair or --src and --dst");
    src_cloud = read_cloud_or_fail(o.src);
    dst_cloud = read_cloud_or_fail(o.dst);
    double d1 = 0.0, d2 = 0.0;
    check(cgf_cloud_diameter(src_cloud, &d1));
    check(cgf_cloud_diameter(dst_cloud, &d2));
    diameter = d1 > d2 ? d1 : d2;
  }

  std::string units = pick(cmd, "--units", cfg, "units", o.hist.units);
  double scale = units == "diameter" ? diameter : 1.0;
  double inlier = pick(cmd, "--inlier-threshold", cfg, "inlier_threshold",
                       o.inlier_threshold);
  double gt_tau = pick(cmd, "--gt-tau", cfg, "gt_tau", o.gt_tau);
  double success = pick(cmd, "--success-rmse", cfg, "success_rmse",
                        o.success_rmse);
  if (std::isnan(inlier)) inlier = units == "diameter" ? 0.02 : 0.25;
  if (std::isnan(gt_tau)) gt_tau = units == "diameter" ? 0.01 : 0.25;
  if (std::isnan(success)) success = units == "diameter" ? 0.02 : 0.2;

  cgf_registration_params params;
  cgf_registration_params_default(&params);
  params.ransac.iterations =
      pick(cmd, "--iterations", cfg, "iterations", o.iterations);
  params.ransac.inlier_threshold = inlier * scale;
  params.ransac.seed = stage_seed(o.seed, "ransac");
  params.gt_tau = gt_tau * scale;
  params.success_rmse = success * scale;

  cgf_histogram_params hist = o.hist.resolve(cmd, cfg, diameter);

  cgf_model* model = nullptr;
  check(cgf_model_load(o.model.c_str(), &model));
  cgf_histograms* src_hist = nullptr;
  check(cgf_featurize(src_cloud, &hist, &src_hist));
  cgf_histograms* dst_hist = nullptr;
  check(cgf_featurize(dst_cloud, &hist, &dst_hist));
  cgf_features* src_features = nullptr;
  check(cgf_embed(model, src_hist, &src_features));
  cgf_features* dst_features = nullptr;
  check(cgf_embed(model, dst_hist, &dst_features));
  cgf_matches* matches = nullptr;
  check(cgf_match(src_features, dst_features, &matches));

  cgf_registration_result result;
  if (from_manifest) {
    check(cgf_register_pair(matches, src_cloud, src_to_world, dst_cloud,
                            dst_to_world, &params, &result));
  } else {
    check(cgf_ransac(matches, src_cloud, dst_cloud, &params.ransac, &result));
  }
  check(cgf_registration_write_json(&result, o.out.c_str()));

  cgf_matches_free(matches);
  cgf_features_free(dst_features);
  cgf_features_free(src_features);
  cgf_histograms_free(dst_hist);
  cgf_histograms_free(src_hist);
  cgf_model_free(model);
  cgf_cloud_free(dst_cloud);
  cgf_cloud_free(src_cloud);

  RunManifest manifest("register", argv);
  if (from_manifest)
    manifest.input(o.manifest);
  else {
    manifest.input(o.src);
    manifest.input(o.dst);
  }
  manifest.input(o.model);
  if (!o.config_path.empty()) manifest.input(o.config_path);
  json cfg_out = HistogramFlags::effective(hist);
  cfg_out["iterations"] = params.ransac.iterations;
  cfg_out["inlier_threshold"] = params.ransac.inlier_threshold;
  cfg_out["gt_tau"] = params.gt_tau;
  cfg_out["success_rmse"] = params.success_rmse;
  if (from_manifest) cfg_out["pair"] = o.pair;
  manifest.config(cfg_out);
  manifest.seed(o.seed);
  manifest.output(o.out);
  manifest.write_sidecar(o.out);
  std::cout << "registered: rmse " << result.rmse << ", inliers "
            << result.inliers << ", success " << (result.success ? "yes" : "no")
            << " -> " << o.out << "\n";
}

// ---- pca -------------------------------------------------------------------

struct PcaOpts {
  std::vector<std::string> histograms;
  int dim = 32;
  std::string out;
};

void run_pca(const PcaOpts& o, const std::vector<std::string>& argv) {
  std::vector<cgf_histograms*> tables(o.histograms.size(), nullptr);
  for (size_t k = 0; k < o.histograms.size(); ++k)
    check(cgf_histograms_read(o.histograms[k].c_str(), &tables[k]));
  std::vector<const cgf_histograms*> tables_const(tables.begin(), tables.end());
  cgf_model* model = nullptr;
  check(cgf_fit_pca(tables_const.data(), tables_const.size(), o.dim, &model));
  check(cgf_model_save(model, o.out.c_str()));
  size_t in_dim = 0;
  check(cgf_model_input_dim(model, &in_dim));
  cgf_model_free(model);
  for (auto* t : tables) cgf_histograms_free(t);

  RunManifest manifest("pca", argv);
  for (const auto& path : o.histograms) manifest.input(path);
  manifest.config(json{{"dim", o.dim}});
  manifest.output(o.out);
  manifest.write_sidecar(o.out);
  std::cout << "fit " << in_dim << " -> " << o.dim << " pca model -> " << o.out
            << "\n";
}

// ---- bench -----------------------------------------------------------------

struct BenchOpts {
  std::string src;
  std::string dst;
  int repeats = 1;
  std::string out;
};

void run_bench(const BenchOpts& o, const std::vector<std::string>& argv) {
  cgf_features* src = nullptr;
  check(cgf_features_read_csv(o.src.c_str(), &src));
  cgf_features* dst = nullptr;
  check(cgf_features_read_csv(o.dst.c_str(), &dst));
  double ms = 0.0;
  check(cgf_time_queries(src, dst, o.repeats, &ms));
  size_t queries = 0, targets = 0, dim = 0;
  check(cgf_features_count(src, &queries));
  check(cgf_features_count(dst, &targets));
  check(cgf_features_dim(src, &dim));
  cgf_features_free(dst);
  cgf_features_free(src);

  std::ofstream out(o.out);
  if (!out.good()) fail(CGF_IO, "cannot write: " + o.out);
  out << "query_count,target_count,dim,repeats,ms_per_query\n"
      << queries << "," << targets << "," << dim << "," << o.repeats << ","
      << ms << "\n";
  if (!out.good()) fail(CGF_IO, "write failed: " + o.out);

  RunManifest manifest("bench", argv);
  manifest.input(o.src);
  manifest.input(o.dst);
  manifest.config(json{{"repeats", o.repeats}});
  manifest.output(o.out);
  manifest.write_sidecar(o.out);
  std::cout << "mean query time " << ms << " ms -> " << o.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> raw_args(argv, argv + argc);
  CLI::App app{"compact geometric feature pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cgf_version()));

  auto synth_opts = std::make_shared<SynthOpts>();
  auto* synth = app.add_subcommand(
      "synth", "generate aligned synthetic views of an analytic surface");
  synth->add_option("--surface", synth_opts->surface,
                    "sphere, torus, supertoroid, or box_union");
  synth->add_option("--views", synth_opts->views, "view count (default 6)");
  synth->add_option("--samples", synth_opts->samples,
                    "base surface samples shared by the views (default 16000)");
  synth->add_option("--noise", synth_opts->noise,
                    "Gaussian sigma along normals, surface units (default 0)");
  synth->add_option("--seed", synth_opts->seed, "root seed");
  synth->add_option("--format", synth_opts->format, "cloud format: xyz or ply")
      ->check(CLI::IsMember({"xyz", "ply"}));
  synth->add_option("--config", synth_opts->config_path, "JSON config file");
  synth->add_option("-o,--out", synth_opts->out, "output directory")
      ->required();
  synth->callback([synth_opts, synth, &raw_args] {
    run_synth(*synth_opts, synth, raw_args);
  });

  auto feat_opts = std::make_shared<FeaturizeOpts>();
  auto* featurize = app.add_subcommand(
      "featurize", "compute per-point spherical histograms of a cloud");
  featurize->add_option("--cloud", feat_opts->cloud, "input .xyz/.ply cloud")
      ->required();
  featurize->add_option("--config", feat_opts->config_path, "JSON config file");
  featurize->add_option("-o,--out", feat_opts->out, "output histogram file")
      ->required();
  feat_opts->hist.add(featurize);
  featurize->callback([feat_opts, featurize, &raw_args] {
    run_featurize(*feat_opts, featurize, raw_args);
  });

  auto mine_opts = std::make_shared<MineOpts>();
  auto* mine = app.add_subcommand(
      "mine", "mine training triplets from aligned overlapping views");
  mine->add_option("--manifest", mine_opts->manifests,
                   "aligned-set manifest (repeatable)")
      ->required();
  mine->add_option("--histograms", mine_opts->histograms,
                   "histogram file per view, in manifest order (repeatable)")
      ->required();
  mine->add_option("--units", mine_opts->units,
                   "tau units: diameter or absolute")
      ->check(CLI::IsMember({"diameter", "absolute"}));
  mine->add_option("--tau", mine_opts->tau,
                   "positive radius (default 0.01 of the set diameter)");
  mine->add_option("--per-point", mine_opts->per_point,
                   "triplets per anchor (default 40)");
  mine->add_option("--hard", mine_opts->hard,
                   "hard negatives per anchor (default 15)");
  mine->add_option("--random", mine_opts->random,
                   "random negatives per anchor (default 25)");
  mine->add_option("--min-overlap", mine_opts->min_overlap,
                   "minimum mutual overlap fraction (default 0.3)");
  mine->add_option("--max-anchors", mine_opts->max_anchors,
                   "anchor cap per view pair (default 0: all)");
  mine->add_option("--seed", mine_opts->seed, "root seed");
  mine->add_option("--config", mine_opts->config_path, "JSON config file");
  mine->add_option("-o,--out", mine_opts->out, "output triplet cache")
      ->required();
  mine->callback([mine_opts, mine, &raw_args] {
    run_mine(*mine_opts, mine, raw_args);
  });

  auto train_opts = std::make_shared<TrainOpts>();
  auto* train = app.add_subcommand(
      "train", "train the embedding network on mined triplets");
  train->add_option("--triplets", train_opts->triplets, "triplet cache file")
      ->required();
  train->add_option("--histograms", train_opts->histograms,
                    "histogram files backing the cache, in mining order")
      ->required();
  train->add_option("--hidden", train_opts->hidden,
                    "hidden layer sizes (default 512 x5)");
  train->add_option("--dim", train_opts->dim, "descriptor size (default 32)");
  train->add_option("--margin", train_opts->margin,
                    "triplet margin (default 1.0)");
  train->add_option("--epochs", train_opts->epochs, "epochs (default 3)");
  train->add_option("--batch", train_opts->batch, "batch size (default 512)");
  train->add_option("--lr", train_opts->lr, "Adam learning rate (default 1e-4)");
  train->add_option("--beta1", train_opts->beta1, "Adam beta1 (default 0.9)");
  train->add_option("--beta2", train_opts->beta2, "Adam beta2 (default 0.999)");
  train->add_option("--epsilon", train_opts->adam_eps,
                    "Adam epsilon (default 1e-8)");
  train->add_option("--seed", train_opts->seed, "root seed");
  train->add_option("--log-every", train_opts->log_every,
                    "print loss every N batches (0: silent, default 100)");
  train->add_option("--config", train_opts->config_path, "JSON config file");
  train->add_option("-o,--out", train_opts->out, "output model file")
      ->required();
  train->callback([train_opts, train, &raw_args] {
    run_train(*train_opts, train, raw_args);
  });

  auto embed_opts = std::make_shared<EmbedOpts>();
  auto* embed = app.add_subcommand(
      "embed", "embed histograms into descriptors with a trained model");
  embed->add_option("--model", embed_opts->model,
                    "model file (network or pca)")
      ->required();
  embed->add_option("--histograms", embed_opts->histograms, "histogram file")
      ->required();
  embed->add_option("-o,--out", embed_opts->out, "output feature CSV")
      ->required();
  embed->callback(
      [embed_opts, &raw_args] { run_embed(*embed_opts, raw_args); });

  auto match_opts = std::make_shared<MatchOpts>();
  auto* match = app.add_subcommand(
      "match", "nearest-neighbor correspondences between two feature sets");
  match->add_option("--src", match_opts->src, "query feature CSV")->required();
  match->add_option("--dst", match_opts->dst, "target feature CSV")->required();
  match->add_option("-o,--out", match_opts->out, "output correspondence CSV")
      ->required();
  match->callback(
      [match_opts, &raw_args] { run_match(*match_opts, raw_args); });

  auto eval_opts = std::make_shared<EvalOpts>();
  auto* eval = app.add_subcommand(
      "eval", "precision of feature matches against the aligned ground truth");
  eval->add_option("--manifest", eval_opts->manifest, "aligned-set manifest")
      ->required();
  eval->add_option("--pair", eval_opts->pair, "view pair \"i,j\"")->required();
  eval->add_option("--src-features", eval_opts->src_features,
                   "query feature CSV")
      ->required();
  eval->add_option("--dst-features", eval_opts->dst_features,
                   "target feature CSV")
      ->required();
  eval->add_option("--units", eval_opts->units,
                   "tau units: diameter or absolute")
      ->check(CLI::IsMember({"diameter", "absolute"}));
  eval->add_option("--tau", eval_opts->tau,
                   "overlap radius (default 0.01 of the set diameter)");
  eval->add_option("--curve-max", eval_opts->curve_max,
                   "largest precision threshold (default 0.03 of the diameter)");
  eval->add_option("--curve-steps", eval_opts->curve_steps,
                   "evenly spaced thresholds from 0 to the max (default 40)");
  eval->add_option("--out-matches", eval_opts->out_matches,
                   "also write retained matches with world residuals");
  eval->add_option("--config", eval_opts->config_path, "JSON config file");
  eval->add_option("-o,--out", eval_opts->out, "output precision CSV")
      ->required();
  eval->callback([eval_opts, eval, &raw_args] {
    run_eval(*eval_opts, eval, raw_args);
  });

  auto register_opts = std::make_shared<RegisterOpts>();
  auto* register_cmd = app.add_subcommand(
      "register", "rigidly align two clouds from descriptor matches");
  register_cmd->add_option("--src", register_opts->src, "source cloud file");
  register_cmd->add_option("--dst", register_opts->dst, "target cloud file");
  register_cmd->add_option("--manifest", register_opts->manifest,
                           "aligned-set manifest (enables ground-truth rmse)");
  register_cmd->add_option("--pair", register_opts->pair,
                           "view pair \"i,j\" within the manifest");
  register_cmd->add_option("--model", register_opts->model, "model file")
      ->required();
  register_cmd->add_option("--iterations", register_opts->iterations,
                           "RANSAC iterations (default 1000)");
  register_cmd->add_option("--inlier-threshold",
                           register_opts->inlier_threshold,
                           "RANSAC inlier radius (default 0.02 diameter / "
                           "0.25)");
  register_cmd->add_option("--gt-tau", register_opts->gt_tau,
                           "ground-truth pairing radius (default 0.01 "
                           "diameter / 0.25)");
  register_cmd->add_option("--success-rmse", register_opts->success_rmse,
                           "success threshold (default 0.02 diameter / 0.2)");
  register_cmd->add_option("--seed", register_opts->seed, "root seed");
  register_cmd->add_option("--config", register_opts->config_path,
                           "JSON config file");
  register_cmd->add_option("-o,--out", register_opts->out,
                           "output registration JSON")
      ->required();
  register_opts->hist.add(register_cmd);
  register_cmd->callback([register_opts, register_cmd, &raw_args] {
    run_register(*register_opts, register_cmd, raw_args);
  });

  auto pca_opts = std::make_shared<PcaOpts>();
  auto* pca = app.add_subcommand(
      "pca", "fit the linear compression baseline to histogram sets");
  pca->add_option("--histograms", pca_opts->histograms,
                  "histogram files (repeatable)")
      ->required();
  pca->add_option("--dim", pca_opts->dim, "projection size (default 32)");
  pca->add_option("-o,--out", pca_opts->out, "output model file")->required();
  pca->callback([pca_opts, &raw_args] { run_pca(*pca_opts, raw_args); });

  auto bench_opts = std::make_shared<BenchOpts>();
  auto* bench = app.add_subcommand(
      "bench", "time exact nearest-neighbor descriptor queries");
  bench->add_option("--src", bench_opts->src, "query feature CSV")->required();
  bench->add_option("--dst", bench_opts->dst, "target feature CSV")
      ->required();
  bench->add_option("--repeats", bench_opts->repeats,
                    "repetitions of the query set (default 1)");
  bench->add_option("-o,--out", bench_opts->out, "output timing CSV")
      ->required();
  bench->callback(
      [bench_opts, &raw_args] { run_bench(*bench_opts, raw_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: INVALID_ARGUMENT: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
