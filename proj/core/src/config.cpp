#include "snarf/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "detail/json_convert.hpp"

namespace snarf {

using nlohmann::json;

namespace {

// Reads optional fields, reporting the full dotted path on type errors and
// rejecting keys that do not belong to the object.
class FieldReader {
 public:
  FieldReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + "expected an object");
  }
  ~FieldReader() = default;

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(where(key) + "unknown field");
    }
  }

  std::string where(const std::string& key) const {
    std::string p = key.empty() ? path_ : sub(key.c_str());
    return "config field '" + (p.empty() ? std::string("<root>") : p) + "': ";
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::hard_max: return "hard_max";
    case Aggregation::softmax: return "softmax";
    case Aggregation::weighted_softmax: return "weighted_softmax";
  }
  return "softmax";
}

template <typename Enum>
Enum parse_enum(const std::string& value, std::initializer_list<std::pair<const char*, Enum>> options,
                const std::string& where) {
  for (const auto& [name, e] : options) {
    if (value == name) return e;
  }
  std::string msg = where + "unknown value '" + value + "' (expected one of:";
  for (const auto& [name, e] : options) msg += std::string(" ") + name;
  throw ConfigError(msg + ")");
}

json encode(const NetShape& n) {
  return {{"hidden_widths", n.hidden_widths},
          {"activation", n.activation == HiddenActivation::relu ? "relu" : "softplus"},
          {"softplus_beta", n.softplus_beta}};
}

NetShape net_from_json(const json& j, const std::string& path) {
  NetShape n;
  FieldReader r(j, path);
  r.read("hidden_widths", n.hidden_widths);
  std::string act = n.activation == HiddenActivation::relu ? "relu" : "softplus";
  r.read("activation", act);
  n.activation = parse_enum<HiddenActivation>(
      act, {{"softplus", HiddenActivation::softplus}, {"relu", HiddenActivation::relu}}, r.where("activation"));
  r.read("softplus_beta", n.softplus_beta);
  r.finish();
  return n;
}

json encode(const TrainSettings& t) {
  return {{"learning_rate", t.learning_rate},
          {"adam_beta1", t.adam_beta1},
          {"adam_beta2", t.adam_beta2},
          {"adam_eps", t.adam_eps},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"bootstrap_epochs", t.bootstrap_epochs},
          {"bootstrap_bone_samples", t.bootstrap_bone_samples},
          {"bootstrap_bone_weight", t.bootstrap_bone_weight},
          {"bootstrap_joint_weight", t.bootstrap_joint_weight},
          {"seed", t.seed},
          {"validation_interval", t.validation_interval}};
}

TrainSettings train_from_json(const json& j, const std::string& path) {
  TrainSettings t;
  FieldReader r(j, path);
  r.read("learning_rate", t.learning_rate);
  r.read("adam_beta1", t.adam_beta1);
  r.read("adam_beta2", t.adam_beta2);
  r.read("adam_eps", t.adam_eps);
  r.read("batch_size", t.batch_size);
  r.read("epochs", t.epochs);
  r.read("bootstrap_epochs", t.bootstrap_epochs);
  r.read("bootstrap_bone_samples", t.bootstrap_bone_samples);
  r.read("bootstrap_bone_weight", t.bootstrap_bone_weight);
  r.read("bootstrap_joint_weight", t.bootstrap_joint_weight);
  r.read("seed", t.seed);
  r.read("validation_interval", t.validation_interval);
  r.finish();
  return t;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

json encode(const RigidObjectSpec& o) {
  std::vector<double> rotation(o.placement.rotation.data(), o.placement.rotation.data() + 4);
  const double angle = std::atan2(o.placement.rotation(1, 0), o.placement.rotation(0, 0));
  return {{"half_extents", vec_json(o.half_extents)},
          {"center", vec_json(o.placement.translation)},
          {"angle_deg", angle * 180.0 / std::numbers::pi},
          {"attached_bone", o.attached_bone}};
}

RigidObjectSpec object_from_json(const json& j, const std::string& path) {
  RigidObjectSpec o = StickGeometry::default_object();
  FieldReader r(j, path);
  std::vector<double> half(o.half_extents.data(), o.half_extents.data() + 2);
  std::vector<double> center(o.placement.translation.data(), o.placement.translation.data() + 2);
  double angle_deg = 0.0;
  r.read("half_extents", half);
  r.read("center", center);
  r.read("angle_deg", angle_deg);
  r.read("attached_bone", o.attached_bone);
  r.finish();
  if (half.size() != 2 || center.size() != 2) throw ConfigError(r.where("") + "half_extents and center need 2 values");
  o.half_extents = vec_from(half);
  o.placement = {rotation_2d(angle_deg * std::numbers::pi / 180.0), vec_from(center)};
  return o;
}

json encode(const StickGeometry& g) {
  json j = {{"bone_lengths", g.bone_lengths}, {"half_width", g.half_width}};
  j["rigid_object"] = g.rigid_object ? encode(*g.rigid_object) : json(nullptr);
  return j;
}

StickGeometry stick_from_json(const json& j, const std::string& path) {
  StickGeometry g;
  FieldReader r(j, path);
  r.read("bone_lengths", g.bone_lengths);
  r.read("half_width", g.half_width);
  if (const json* o = r.child("rigid_object"); o != nullptr && !o->is_null()) {
    g.rigid_object = object_from_json(*o, r.sub("rigid_object"));
  }
  r.finish();
  return g;
}

json encode(const CapsuleGeometry& g) {
  return {{"bone_lengths", g.bone_lengths}, {"radius", g.radius}, {"bend_axis", vec_json(g.bend_axis)}};
}

CapsuleGeometry capsule_from_json(const json& j, const std::string& path) {
  CapsuleGeometry g;
  FieldReader r(j, path);
  r.read("bone_lengths", g.bone_lengths);
  r.read("radius", g.radius);
  std::vector<double> axis(g.bend_axis.data(), g.bend_axis.data() + 3);
  r.read("bend_axis", axis);
  r.finish();
  if (axis.size() != 3) throw ConfigError(r.where("bend_axis") + "expected 3 values");
  g.bend_axis = vec_from(axis);
  return g;
}

json intervals_json(const std::vector<AngleInterval>& v) {
  json out = json::array();
  for (const auto& i : v) out.push_back({i.lo_deg, i.hi_deg});
  return out;
}

std::vector<AngleInterval> intervals_from(const json& j, const std::string& where) {
  std::vector<AngleInterval> out;
  if (!j.is_array()) throw ConfigError(where + "expected a list of [lo, hi] pairs");
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number()) {
      throw ConfigError(where + "expected a list of [lo, hi] pairs");
    }
    out.push_back({item[0].get<double>(), item[1].get<double>()});
  }
  return out;
}

}  // namespace

namespace detail {

json to_json(const SolverSettings& s) {
  return {{"epsilon", s.epsilon},
          {"max_iters", s.max_iters},
          {"divergence_radius", s.divergence_radius},
          {"domain_center", vec_json(s.domain_center)},
          {"dedup_radius", s.dedup_radius},
          {"jacobian_damping", s.jacobian_damping},
          {"update", s.update == BroydenUpdate::good ? "good" : "bad"}};
}

SolverSettings solver_from_json(const json& j, const std::string& path) {
  SolverSettings s;
  s.divergence_radius = 0.0;
  FieldReader r(j, path);
  r.read("epsilon", s.epsilon);
  r.read("max_iters", s.max_iters);
  r.read("divergence_radius", s.divergence_radius);
  std::vector<double> center;
  r.read("domain_center", center);
  s.domain_center = vec_from(center);
  r.read("dedup_radius", s.dedup_radius);
  r.read("jacobian_damping", s.jacobian_damping);
  std::string update = "good";
  r.read("update", update);
  s.update = parse_enum<BroydenUpdate>(update, {{"good", BroydenUpdate::good}, {"bad", BroydenUpdate::bad}},
                                       r.where("update"));
  r.finish();
  return s;
}

json to_json(const CompositionSettings& s) {
  return {{"aggregation", aggregation_name(s.aggregation)},
          {"softmax_scale", s.softmax_scale},
          {"differentiate_blend_weights", s.differentiate_blend_weights},
          {"fallback_residual_factor", s.fallback_residual_factor}};
}

CompositionSettings composition_from_json(const json& j, const std::string& path) {
  CompositionSettings s;
  FieldReader r(j, path);
  std::string agg = aggregation_name(s.aggregation);
  r.read("aggregation", agg);
  s.aggregation = parse_enum<Aggregation>(agg,
                                          {{"hard_max", Aggregation::hard_max},
                                           {"softmax", Aggregation::softmax},
                                           {"weighted_softmax", Aggregation::weighted_softmax}},
                                          r.where("aggregation"));
  r.read("softmax_scale", s.softmax_scale);
  r.read("differentiate_blend_weights", s.differentiate_blend_weights);
  r.read("fallback_residual_factor", s.fallback_residual_factor);
  r.finish();
  return s;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["regime"] = to_string(c.regime);
  j["shape"] = c.shape == ShapeKind::stick ? "stick" : "capsule3d";
  j["train_angle_range"] = intervals_json(c.train_angle_range);
  j["test_angle_range"] = intervals_json(c.test_angle_range);
  j["train_step_deg"] = c.train_step_deg;
  j["frames"] = c.frames;
  j["test_frames"] = c.test_frames;
  j["frames_per_train_pose"] = c.frames_per_train_pose;
  j["samples_per_frame"] = c.samples_per_frame;
  j["near_surface_sigma"] = c.near_surface_sigma;
  j["bbox_inflation"] = c.bbox_inflation;
  j["stick"] = encode(c.stick);
  j["capsule"] = encode(c.capsule);
  j["oracle_lattice_cells"] = c.oracle_lattice_cells;
  j["oracle_weight_eps"] = c.oracle_weight_eps;
  j["occupancy_net"] = encode(c.occupancy_net);
  j["skinning_net"] = encode(c.skinning_net);
  j["pose_conditioning"] = c.pose_conditioning;
  j["positional_encoding"] = c.positional_encoding;
  j["train"] = encode(c.train);
  j["solver"] = to_json(c.solver);
  j["composition"] = to_json(c.composition);
  j["sweep_steps_deg"] = c.sweep_steps_deg;
  j["sweep_seeds"] = c.sweep_seeds;
  j["gallery_poses_deg"] = c.gallery_poses_deg;
  j["seed"] = c.seed;
  return j;
}

}  // namespace detail

void TrainSettings::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("config field 'train.") + name + "': must be > 0");
  };
  positive(learning_rate, "learning_rate");
  positive(adam_beta1, "adam_beta1");
  positive(adam_beta2, "adam_beta2");
  positive(adam_eps, "adam_eps");
  if (adam_beta1 >= 1.0 || adam_beta2 >= 1.0) throw ConfigError("config field 'train.adam_beta': must be < 1");
  if (batch_size < 1) throw ConfigError("config field 'train.batch_size': must be >= 1");
  if (epochs < 0) throw ConfigError("config field 'train.epochs': must be >= 0");
  if (bootstrap_epochs < 0 || bootstrap_epochs > std::max(epochs, 1)) {
    throw ConfigError("config field 'train.bootstrap_epochs': must be in [0, epochs]");
  }
  if (bootstrap_bone_samples < 1) throw ConfigError("config field 'train.bootstrap_bone_samples': must be >= 1");
  if (bootstrap_bone_weight < 0.0 || bootstrap_joint_weight < 0.0) {
    throw ConfigError("config field 'train.bootstrap_*_weight': must be >= 0");
  }
  if (validation_interval < 0) throw ConfigError("config field 'train.validation_interval': must be >= 0");
}

int ExperimentConfig::bone_count() const {
  return shape == ShapeKind::stick ? stick.bone_count() : capsule.bone_count();
}

bool ExperimentConfig::has_rigid_object() const {
  return shape == ShapeKind::stick && effective_stick().rigid_object.has_value();
}

StickGeometry ExperimentConfig::effective_stick() const {
  StickGeometry g = stick;
  if (regime == Regime::topology && !g.rigid_object) g.rigid_object = StickGeometry::default_object();
  return g;
}

Aabb ExperimentConfig::canonical_bounds() const {
  return shape == ShapeKind::stick ? effective_stick().canonical_bounds() : capsule.canonical_bounds();
}

SolverSettings ExperimentConfig::resolved_solver() const {
  SolverSettings s = solver;
  const Aabb bounds = canonical_bounds();
  if (!(s.divergence_radius > 0.0)) s.divergence_radius = SolverSettings::for_bounds(bounds).divergence_radius;
  if (s.domain_center.size() == 0) s.domain_center = bounds.center();
  return s;
}

void ExperimentConfig::validate() const {
  const auto check_intervals = [](const std::vector<AngleInterval>& v, const char* field) {
    if (v.empty()) throw ConfigError(std::string("config field '") + field + "': needs at least one interval");
    for (const auto& i : v) {
      if (!(i.lo_deg <= i.hi_deg)) throw ConfigError(std::string("config field '") + field + "': lo > hi");
    }
  };
  check_intervals(train_angle_range, "train_angle_range");
  check_intervals(test_angle_range, "test_angle_range");
  if (!(train_step_deg > 0.0)) throw ConfigError("config field 'train_step_deg': must be > 0");
  if (frames < 0) throw ConfigError("config field 'frames': must be >= 0");
  if (test_frames < 0) throw ConfigError("config field 'test_frames': must be >= 0");
  if (frames_per_train_pose < 0) throw ConfigError("config field 'frames_per_train_pose': must be >= 0");
  if (samples_per_frame < 0) throw ConfigError("config field 'samples_per_frame': must be >= 0");
  if (!(near_surface_sigma > 0.0)) throw ConfigError("config field 'near_surface_sigma': must be > 0");
  if (!(bbox_inflation >= 1.0)) throw ConfigError("config field 'bbox_inflation': must be >= 1");
  if (oracle_lattice_cells < 10) throw ConfigError("config field 'oracle_lattice_cells': must be >= 10");
  if (!(oracle_weight_eps > 0.0)) throw ConfigError("config field 'oracle_weight_eps': must be > 0");
  if (positional_encoding) throw ConfigError("config field 'positional_encoding': not supported");
  for (double s : sweep_steps_deg) {
    if (!(s > 0.0)) throw ConfigError("config field 'sweep_steps_deg': steps must be > 0");
  }
  for (const auto& pose : gallery_poses_deg) {
    if (static_cast<int>(pose.size()) != joint_count()) {
      throw ConfigError("config field 'gallery_poses_deg': each pose needs one angle per joint");
    }
  }
  try {
    if (shape == ShapeKind::stick) {
      effective_stick().validate();
    } else {
      capsule.validate();
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config field '") + (shape == ShapeKind::stick ? "stick" : "capsule") +
                      "': " + e.what());
  }
  if (regime == Regime::topology && shape != ShapeKind::stick) {
    throw ConfigError("config field 'regime': topology requires the stick shape");
  }
  for (const NetShape* n : {&occupancy_net, &skinning_net}) {
    if (n->hidden_widths.empty()) throw ConfigError("config field '*_net.hidden_widths': must be non-empty");
    for (int w : n->hidden_widths) {
      if (w < 1) throw ConfigError("config field '*_net.hidden_widths': widths must be >= 1");
    }
    if (!(n->softplus_beta > 0.0)) throw ConfigError("config field '*_net.softplus_beta': must be > 0");
  }
  train.validate();
  try {
    resolved_solver().validate();
    composition.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config field 'solver/composition': ") + e.what());
  }
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::extrapolation: return "extrapolation";
    case Regime::interpolation: return "interpolation";
    case Regime::topology: return "topology";
  }
  return "extrapolation";
}

Regime regime_from_string(const std::string& s) {
  return parse_enum<Regime>(s,
                            {{"extrapolation", Regime::extrapolation},
                             {"interpolation", Regime::interpolation},
                             {"topology", Regime::topology}},
                            "config field 'regime': ");
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  FieldReader r(j, "");
  r.read("name", c.name);
  std::string regime = to_string(c.regime);
  r.read("regime", regime);
  c.regime = regime_from_string(regime);
  std::string shape = "stick";
  r.read("shape", shape);
  c.shape = parse_enum<ShapeKind>(shape, {{"stick", ShapeKind::stick}, {"capsule3d", ShapeKind::capsule3d}},
                                  r.where("shape"));
  if (const json* v = r.child("train_angle_range")) c.train_angle_range = intervals_from(*v, r.where("train_angle_range"));
  if (const json* v = r.child("test_angle_range")) c.test_angle_range = intervals_from(*v, r.where("test_angle_range"));
  r.read("train_step_deg", c.train_step_deg);
  r.read("frames", c.frames);
  r.read("test_frames", c.test_frames);
  r.read("frames_per_train_pose", c.frames_per_train_pose);
  r.read("samples_per_frame", c.samples_per_frame);
  r.read("near_surface_sigma", c.near_surface_sigma);
  r.read("bbox_inflation", c.bbox_inflation);
  if (const json* v = r.child("stick")) c.stick = stick_from_json(*v, "stick");
  if (const json* v = r.child("capsule")) c.capsule = capsule_from_json(*v, "capsule");
  r.read("oracle_lattice_cells", c.oracle_lattice_cells);
  r.read("oracle_weight_eps", c.oracle_weight_eps);
  if (const json* v = r.child("occupancy_net")) c.occupancy_net = net_from_json(*v, "occupancy_net");
  if (const json* v = r.child("skinning_net")) c.skinning_net = net_from_json(*v, "skinning_net");
  r.read("pose_conditioning", c.pose_conditioning);
  r.read("positional_encoding", c.positional_encoding);
  if (const json* v = r.child("train")) c.train = train_from_json(*v, "train");
  if (const json* v = r.child("solver")) {
    c.solver = detail::solver_from_json(*v, "solver");
  } else {
    c.solver.divergence_radius = 0.0;
  }
  if (const json* v = r.child("composition")) c.composition = detail::composition_from_json(*v, "composition");
  r.read("sweep_steps_deg", c.sweep_steps_deg);
  r.read("sweep_seeds", c.sweep_seeds);
  r.read("gallery_poses_deg", c.gallery_poses_deg);
  r.read("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json_text(buffer.str());
}

std::string config_to_json_text(const ExperimentConfig& config) { return detail::to_json(config).dump(2); }

}  // namespace snarf
