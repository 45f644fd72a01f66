#include "qlab/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qlab {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad(const std::string& msg) { throw std::invalid_argument(msg); }

double want_number(const Json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number()) bad(std::string("missing numeric field: ") + key);
  return doc[key].get<double>();
}

}  // namespace

Json mdp_to_json(const Mdp& mdp, const FeatureMap* features) {
  Json doc;
  doc["n_states"] = mdp.n_states;
  doc["n_actions"] = mdp.n_actions;
  doc["gamma"] = mdp.gamma;
  Json trans = Json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    Json per_state = Json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      Json row = Json::array();
      for (int s2 = 0; s2 < mdp.n_states; ++s2) row.push_back(mdp.p(s, a, s2));
      per_state.push_back(std::move(row));
    }
    trans.push_back(std::move(per_state));
  }
  doc["transition"] = std::move(trans);
  Json reward = Json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    Json row = Json::array();
    for (int a = 0; a < mdp.n_actions; ++a) row.push_back(mdp.r(s, a));
    reward.push_back(std::move(row));
  }
  doc["reward"] = std::move(reward);
  doc["initial_dist"] = mdp.initial_dist;
  if (features) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < features->matrix.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index j = 0; j < features->matrix.cols(); ++j)
        row.push_back(features->matrix(i, j));
      rows.push_back(std::move(row));
    }
    doc["features"] = std::move(rows);
  }
  return doc;
}

LoadedMdp mdp_from_json(const Json& doc) {
  LoadedMdp loaded;
  Mdp& mdp = loaded.mdp;
  mdp.n_states = static_cast<int>(want_number(doc, "n_states"));
  mdp.n_actions = static_cast<int>(want_number(doc, "n_actions"));
  mdp.gamma = want_number(doc, "gamma");
  if (mdp.n_states < 1 || mdp.n_actions < 1) bad("mdp: counts must be >= 1");

  if (!doc.contains("transition") || !doc["transition"].is_array()) bad("mdp: missing transition");
  const Json& trans = doc["transition"];
  if (static_cast<int>(trans.size()) != mdp.n_states) bad("mdp: transition outer size != n_states");
  mdp.transition.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions * mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (static_cast<int>(trans[s].size()) != mdp.n_actions) bad("mdp: transition action size");
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (static_cast<int>(trans[s][a].size()) != mdp.n_states) bad("mdp: transition row size");
      for (int s2 = 0; s2 < mdp.n_states; ++s2) mdp.p(s, a, s2) = trans[s][a][s2].get<double>();
    }
  }

  if (!doc.contains("reward") || !doc["reward"].is_array()) bad("mdp: missing reward");
  const Json& reward = doc["reward"];
  if (static_cast<int>(reward.size()) != mdp.n_states) bad("mdp: reward outer size != n_states");
  mdp.reward.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (static_cast<int>(reward[s].size()) != mdp.n_actions) bad("mdp: reward row size");
    for (int a = 0; a < mdp.n_actions; ++a) mdp.r(s, a) = reward[s][a].get<double>();
  }

  if (!doc.contains("initial_dist") || !doc["initial_dist"].is_array()) bad("mdp: missing initial_dist");
  mdp.initial_dist = doc["initial_dist"].get<std::vector<double>>();

  MdpValidationReport report = validate_mdp(mdp);
  if (!report.ok)
    bad("mdp: invariant violated: " + report.violations.front().constraint + " at " +
        report.violations.front().location);

  if (doc.contains("features")) {
    const Json& rows = doc["features"];
    if (!rows.is_array() || static_cast<int>(rows.size()) != mdp.n_pairs())
      bad("mdp: features row count != |S||A|");
    FeatureMap features;
    features.dim = static_cast<int>(rows[0].size());
    features.matrix.resize(mdp.n_pairs(), features.dim);
    for (int i = 0; i < mdp.n_pairs(); ++i) {
      if (static_cast<int>(rows[i].size()) != features.dim) bad("mdp: ragged features");
      for (int j = 0; j < features.dim; ++j) features.matrix(i, j) = rows[i][j].get<double>();
    }
    loaded.features = std::move(features);
  }
  return loaded;
}

void save_mdp(const std::string& path, const Mdp& mdp, const FeatureMap* features) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << mdp_to_json(mdp, features).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

LoadedMdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  Json doc;
  try {
    in >> doc;
  } catch (const Json::parse_error& e) {
    bad("malformed JSON in " + path + ": " + e.what());
  }
  return mdp_from_json(doc);
}

Json policy_to_json(const PolicyMatrix& policy) {
  Json rows = Json::array();
  for (int s = 0; s < policy.n_states(); ++s) {
    Json row = Json::array();
    for (int a = 0; a < policy.n_actions(); ++a) row.push_back(policy.probs(s, a));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

const char* variant_name(Variant::Kind kind) {
  switch (kind) {
    case Variant::Kind::none: return "none";
    case Variant::Kind::target_network: return "target_network";
    case Variant::Kind::projection: return "projection";
    case Variant::Kind::ridge: return "ridge";
  }
  return "none";
}

}  // namespace

Json config_to_json(const ExperimentConfig& config) {
  Json doc;
  doc["name"] = config.name;

  Json source;
  switch (config.mdp_source.kind) {
    case MdpSource::Kind::baird:
      source["kind"] = "baird";
      break;
    case MdpSource::Kind::random:
      source["kind"] = "random";
      source["seed"] = config.mdp_source.seed;
      source["n_states"] = config.mdp_source.n_states;
      source["n_actions"] = config.mdp_source.n_actions;
      source["gamma"] = config.mdp_source.gamma;
      break;
    case MdpSource::Kind::file:
      source["kind"] = "file";
      source["path"] = config.mdp_source.path;
      break;
  }
  doc["mdp_source"] = std::move(source);

  Json learner;
  learner["kind"] = config.learner.kind == LearnerSpec::Kind::linear ? "linear" : "tabular";
  learner["behavior"] = {{"epsilon", config.learner.behavior.epsilon},
                         {"kappa0", config.learner.behavior.kappa0}};
  Json variant;
  variant["kind"] = variant_name(config.learner.variant.kind);
  switch (config.learner.variant.kind) {
    case Variant::Kind::target_network:
      variant["sync_period"] = config.learner.variant.sync_period;
      break;
    case Variant::Kind::projection:
      variant["radius"] = config.learner.variant.radius;
      break;
    case Variant::Kind::ridge:
      variant["eta"] = config.learner.variant.eta;
      break;
    case Variant::Kind::none:
      break;
  }
  learner["variant"] = std::move(variant);
  doc["learner"] = std::move(learner);

  Json schedule;
  schedule["mode"] =
      config.schedule.mode == LearningRateSchedule::Mode::constant ? "constant" : "polynomial";
  schedule["alpha"] = config.schedule.alpha;
  if (config.schedule.mode == LearningRateSchedule::Mode::polynomial) {
    schedule["t0"] = config.schedule.t0;
    schedule["eps_alpha"] = config.schedule.eps_alpha;
  }
  doc["schedule"] = std::move(schedule);

  doc["horizon"] = config.horizon;
  doc["n_runs"] = config.n_runs;
  doc["base_seed"] = config.base_seed;
  doc["metric"] =
      config.metric == MetricSpec::Kind::w_norm_sq ? "w_norm_sq" : "q_error_inf_sq";

  Json w0;
  switch (config.w0.kind) {
    case W0Spec::Kind::ones: w0["kind"] = "ones"; break;
    case W0Spec::Kind::zeros: w0["kind"] = "zeros"; break;
    case W0Spec::Kind::constant:
      w0["kind"] = "constant";
      w0["value"] = config.w0.value;
      break;
    case W0Spec::Kind::vector:
      w0["kind"] = "vector";
      w0["values"] = config.w0.values;
      break;
  }
  doc["w0"] = std::move(w0);
  return doc;
}

ExperimentConfig config_from_json(const Json& doc) {
  ExperimentConfig config;
  if (doc.contains("name")) config.name = doc["name"].get<std::string>();

  if (doc.contains("mdp_source")) {
    const Json& source = doc["mdp_source"];
    const std::string kind = source.value("kind", "baird");
    if (kind == "baird") {
      config.mdp_source.kind = MdpSource::Kind::baird;
    } else if (kind == "random") {
      config.mdp_source.kind = MdpSource::Kind::random;
      config.mdp_source.seed = source.value("seed", 0ull);
      config.mdp_source.n_states = source.value("n_states", 5);
      config.mdp_source.n_actions = source.value("n_actions", 2);
      config.mdp_source.gamma = source.value("gamma", 0.9);
    } else if (kind == "file") {
      config.mdp_source.kind = MdpSource::Kind::file;
      if (!source.contains("path")) bad("mdp_source: file kind needs path");
      config.mdp_source.path = source["path"].get<std::string>();
    } else {
      bad("mdp_source: unknown kind '" + kind + "'");
    }
  }

  if (doc.contains("learner")) {
    const Json& learner = doc["learner"];
    const std::string kind = learner.value("kind", "linear");
    if (kind == "linear")
      config.learner.kind = LearnerSpec::Kind::linear;
    else if (kind == "tabular")
      config.learner.kind = LearnerSpec::Kind::tabular;
    else
      bad("learner: unknown kind '" + kind + "'");
    if (learner.contains("behavior")) {
      config.learner.behavior.epsilon = learner["behavior"].value("epsilon", 0.1);
      config.learner.behavior.kappa0 = learner["behavior"].value("kappa0", 100.0);
    }
    if (learner.contains("variant")) {
      const Json& variant = learner["variant"];
      const std::string vkind = variant.value("kind", "none");
      if (vkind == "none")
        config.learner.variant = Variant::none();
      else if (vkind == "target_network")
        config.learner.variant = Variant::target_network(variant.value("sync_period", 10L));
      else if (vkind == "projection")
        config.learner.variant = Variant::projection(variant.value("radius", 10.0));
      else if (vkind == "ridge")
        config.learner.variant = Variant::ridge(variant.value("eta", 0.01));
      else
        bad("variant: unknown kind '" + vkind + "'");
    }
  }

  if (doc.contains("schedule")) {
    const Json& schedule = doc["schedule"];
    const std::string mode = schedule.value("mode", "constant");
    if (mode == "constant") {
      config.schedule = LearningRateSchedule::constant(schedule.value("alpha", 0.1));
    } else if (mode == "polynomial") {
      config.schedule = LearningRateSchedule::polynomial(schedule.value("alpha", 1.0),
                                                         schedule.value("t0", 1.0),
                                                         schedule.value("eps_alpha", 1.0));
    } else {
      bad("schedule: unknown mode '" + mode + "'");
    }
  }

  config.horizon = doc.value("horizon", 1500L);
  config.n_runs = doc.value("n_runs", 10);
  config.base_seed = doc.value("base_seed", 0ull);
  if (doc.contains("jobs")) config.jobs = doc["jobs"].get<int>();

  const std::string metric = doc.value("metric", "w_norm_sq");
  if (metric == "w_norm_sq")
    config.metric = MetricSpec::Kind::w_norm_sq;
  else if (metric == "q_error_inf_sq")
    config.metric = MetricSpec::Kind::q_error_inf_sq;
  else
    bad("metric: unknown kind '" + metric + "'");

  if (doc.contains("w0")) {
    const Json& w0 = doc["w0"];
    const std::string kind = w0.value("kind", "ones");
    if (kind == "ones")
      config.w0.kind = W0Spec::Kind::ones;
    else if (kind == "zeros")
      config.w0.kind = W0Spec::Kind::zeros;
    else if (kind == "constant") {
      config.w0.kind = W0Spec::Kind::constant;
      config.w0.value = w0.value("value", 1.0);
    } else if (kind == "vector") {
      config.w0.kind = W0Spec::Kind::vector;
      config.w0.values = w0.value("values", std::vector<double>{});
    } else {
      bad("w0: unknown kind '" + kind + "'");
    }
  } else if (config.learner.kind == LearnerSpec::Kind::tabular) {
    config.w0.kind = W0Spec::Kind::zeros;
  }

  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  Json doc;
  try {
    in >> doc;
  } catch (const Json::parse_error& e) {
    bad("malformed JSON in " + path + ": " + e.what());
  }
  return config_from_json(doc);
}

void write_stats_csv(const std::string& path, const EnsembleStats& stats) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,mean,min,max,var,n_alive\n";
  for (long t = 0; t < stats.rows(); ++t) {
    out << t << ',' << fmt17(stats.mean[t]) << ',' << fmt17(stats.min[t]) << ','
        << fmt17(stats.max[t]) << ',' << fmt17(stats.var[t]) << ',' << stats.n_alive[t] << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

EnsembleStats read_stats_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "t,mean,min,max,var,n_alive")
    throw std::runtime_error("bad csv header in " + path);
  EnsembleStats stats;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 6) throw std::runtime_error("bad csv row in " + path);
    stats.mean.push_back(std::stod(fields[1]));
    stats.min.push_back(std::stod(fields[2]));
    stats.max.push_back(std::stod(fields[3]));
    stats.var.push_back(std::stod(fields[4]));
    stats.n_alive.push_back(std::stoi(fields[5]));
  }
  return stats;
}

std::string build_stamp() {
#ifdef QLAB_BUILD_STAMP
  return QLAB_BUILD_STAMP;
#else
  return "unknown";
#endif
}

}  // namespace qlab
