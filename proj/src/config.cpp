#include "rescene/config.hpp"

#include "rescene/error.hpp"
#include "rescene/io.hpp"

#include <set>

namespace rescene {

Json parse_json(std::string_view text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, origin + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

Json load_json(const fs::path& path) { return parse_json(read_file(path), path.string()); }

void save_json(const fs::path& path, const Json& j) { atomic_write(path, j.dump(2) + "\n"); }

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) bad(std::string("expected an object around '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) bad(std::string("missing field '") + key + "'");
  return *it;
}

template <class T>
T get_as(const Json& v, const char* key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    bad(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T req(const Json& j, const char* key) {
  return get_as<T>(field(j, key), key);
}

template <class T>
T opt(const Json& j, const char* key, T def) {
  if (!j.is_object()) bad(std::string("expected an object around '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return def;
  return get_as<T>(*it, key);
}

const Json* child(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

}  // namespace

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) bad("expected a 3-vector");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) bad("3-vector entries must be numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

namespace {

using rescene::to_json;

Json to_json(const Mat3& m) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

Mat3 mat3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) bad("expected a 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec3_from_json(j[r]).transpose();
  return m;
}

Json to_json(const RigidTransform& t) { return {{"rotation", to_json(t.rotation)}, {"translation", to_json(t.translation)}}; }

RigidTransform rigid_from_json(const Json& j) {
  RigidTransform t;
  t.rotation = mat3_from_json(field(j, "rotation"));
  t.translation = vec3_from_json(field(j, "translation"));
  t.validate();
  return t;
}

Json to_json(Rgb c) { return Json::array({c[0], c[1], c[2]}); }

Rgb rgb_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) bad("expected an RGB triple");
  Rgb c{};
  for (int i = 0; i < 3; ++i) {
    const int v = get_as<int>(j[i], "rgb");
    if (v < 0 || v > 255) bad("RGB values must lie in [0, 255]");
    c[i] = static_cast<std::uint8_t>(v);
  }
  return c;
}

Json to_json(const LossWeights& w) {
  return {{"w_sil", w.w_sil},           {"w_3d", w.w_3d},
          {"w_bbox", w.w_bbox},         {"lambda_dice", w.lambda_dice},
          {"lambda_focal", w.lambda_focal}, {"focal_alpha", w.focal_alpha},
          {"focal_gamma", w.focal_gamma}};
}

LossWeights weights_from_json(const Json& j) {
  LossWeights w;
  w.w_sil = opt(j, "w_sil", w.w_sil);
  w.w_3d = opt(j, "w_3d", w.w_3d);
  w.w_bbox = opt(j, "w_bbox", w.w_bbox);
  w.lambda_dice = opt(j, "lambda_dice", w.lambda_dice);
  w.lambda_focal = opt(j, "lambda_focal", w.lambda_focal);
  w.focal_alpha = opt(j, "focal_alpha", w.focal_alpha);
  w.focal_gamma = opt(j, "focal_gamma", w.focal_gamma);
  w.validate();
  return w;
}

Json to_json(const SoftRasterConfig& r) {
  return {{"sigma", r.sigma}, {"gamma_blend", r.gamma_blend}, {"max_faces_per_pixel", r.max_faces_per_pixel}};
}

SoftRasterConfig raster_from_json(const Json& j) {
  SoftRasterConfig r;
  r.sigma = opt(j, "sigma", r.sigma);
  r.gamma_blend = opt(j, "gamma_blend", r.gamma_blend);
  r.max_faces_per_pixel = opt(j, "max_faces_per_pixel", r.max_faces_per_pixel);
  r.validate();
  return r;
}

OptimizerConfig optimizer_from_json(const Json& j) {
  OptimizerConfig o;
  o.iterations = opt(j, "iterations", o.iterations);
  o.learning_rate = opt(j, "learning_rate", o.learning_rate);
  o.final_learning_rate = opt(j, "final_learning_rate", o.final_learning_rate);
  o.early_stop_eps = opt(j, "early_stop_eps", o.early_stop_eps);
  o.early_stop_patience = opt(j, "early_stop_patience", o.early_stop_patience);
  o.flip_restart = opt(j, "flip_restart", o.flip_restart);
  o.seed = opt<std::uint64_t>(j, "seed", o.seed);
  if (const Json* w = child(j, "weights")) o.weights = weights_from_json(*w);
  if (const Json* r = child(j, "raster")) o.raster = raster_from_json(*r);
  o.validate();
  return o;
}

Json to_json(const IcpConfig& c) {
  return {{"max_iterations", c.max_iterations},
          {"convergence_eps", c.convergence_eps},
          {"max_correspondence_dist", c.max_correspondence_dist},
          {"translation_only", c.translation_only},
          {"init_centroid", c.init_centroid}};
}

IcpConfig icp_from_json(const Json& j, IcpConfig c) {
  c.max_iterations = opt(j, "max_iterations", c.max_iterations);
  c.convergence_eps = opt(j, "convergence_eps", c.convergence_eps);
  c.max_correspondence_dist = opt(j, "max_correspondence_dist", c.max_correspondence_dist);
  c.translation_only = opt(j, "translation_only", c.translation_only);
  c.init_centroid = opt(j, "init_centroid", c.init_centroid);
  c.validate();
  return c;
}

Json to_json(const RansacConfig& c) {
  return {{"iterations", c.iterations},
          {"inlier_threshold", c.inlier_threshold},
          {"min_inlier_fraction", c.min_inlier_fraction},
          {"seed", c.seed}};
}

RansacConfig ransac_from_json(const Json& j) {
  RansacConfig c;
  c.iterations = opt(j, "iterations", c.iterations);
  c.inlier_threshold = opt(j, "inlier_threshold", c.inlier_threshold);
  c.min_inlier_fraction = opt(j, "min_inlier_fraction", c.min_inlier_fraction);
  c.seed = opt<std::uint64_t>(j, "seed", c.seed);
  if (const Json* u = child(j, "up_hint")) c.up_hint = vec3_from_json(*u);
  c.validate();
  return c;
}

MetricConfig metric_config_from_json(const Json& j) {
  MetricConfig m;
  m.samples_per_scene = opt<std::size_t>(j, "samples_per_scene", m.samples_per_scene);
  m.fscore_tau = opt(j, "fscore_tau", m.fscore_tau);
  if (const Json* p = child(j, "precision_tau")) m.precision_tau = get_as<double>(*p, "precision_tau");
  if (const Json* r = child(j, "recall_tau")) m.recall_tau = get_as<double>(*r, "recall_tau");
  m.shared_normalization = opt(j, "shared_normalization", m.shared_normalization);
  m.icp_align = opt(j, "icp_align", m.icp_align);
  m.seed = opt<std::uint64_t>(j, "seed", m.seed);
  if (const Json* i = child(j, "icp")) m.icp = icp_from_json(*i, m.icp);
  m.validate();
  return m;
}

Json to_json(const ServiceEndpoint& e) {
  return {{"backend", e.backend},
          {"base_url", e.base_url},
          {"auth_env", e.auth_env},
          {"timeout_s", e.timeout_s},
          {"retries", e.retries}};
}

ServiceEndpoint endpoint_from_json(const Json& j) {
  ServiceEndpoint e;
  e.backend = opt(j, "backend", e.backend);
  e.base_url = opt(j, "base_url", e.base_url);
  e.auth_env = opt(j, "auth_env", e.auth_env);
  e.timeout_s = opt(j, "timeout_s", e.timeout_s);
  e.retries = opt(j, "retries", e.retries);
  return e;
}

std::string to_string(MockMaskMode m) {
  switch (m) {
    case MockMaskMode::Render: return "render";
    case MockMaskMode::Rect: return "rect";
    case MockMaskMode::Empty: return "empty";
  }
  return "render";
}

MockMaskMode mask_mode_from_string(const std::string& s) {
  if (s == "render") return MockMaskMode::Render;
  if (s == "rect") return MockMaskMode::Rect;
  if (s == "empty") return MockMaskMode::Empty;
  bad("unknown mask_mode '" + s + "'");
}

Json to_json(const ServicesConfig& s) {
  return {{"segmenter", to_json(s.segmenter)},
          {"image_editor", to_json(s.image_editor)},
          {"asset_generator", to_json(s.asset_generator)},
          {"geometry_estimator", to_json(s.geometry_estimator)},
          {"mask_mode", to_string(s.mask_mode)}};
}

ServicesConfig services_from_json(const Json& j) {
  ServicesConfig s;
  if (const Json* e = child(j, "segmenter")) s.segmenter = endpoint_from_json(*e);
  if (const Json* e = child(j, "image_editor")) s.image_editor = endpoint_from_json(*e);
  if (const Json* e = child(j, "asset_generator")) s.asset_generator = endpoint_from_json(*e);
  if (const Json* e = child(j, "geometry_estimator")) s.geometry_estimator = endpoint_from_json(*e);
  s.mask_mode = mask_mode_from_string(opt<std::string>(j, "mask_mode", "render"));
  return s;
}

PromptSet prompts_from_json(const Json& j) {
  PromptSet p;
  if (const Json* t = child(j, "object_extraction")) p.object_extraction.text = get_as<std::string>(*t, "object_extraction");
  if (const Json* t = child(j, "background_removal")) p.background_removal.text = get_as<std::string>(*t, "background_removal");
  if (const Json* t = child(j, "segmentation_labels")) {
    if (t->is_array()) {
      std::string joined;
      for (const auto& l : *t) joined += get_as<std::string>(l, "segmentation_labels") + "\n";
      p.segmentation_labels.text = joined;
    } else {
      p.segmentation_labels.text = get_as<std::string>(*t, "segmentation_labels");
    }
  }
  p.object_extraction.validate();
  p.background_removal.validate();
  p.segmentation_labels.validate();
  return p;
}

PixelRect rect_from_json(const Json& j) {
  return {req<int>(j, "x"), req<int>(j, "y"), req<int>(j, "width"), req<int>(j, "height")};
}

AqLayout layout_from_json(const Json& j) {
  AqLayout l;
  l.canvas_width = opt(j, "canvas_width", l.canvas_width);
  l.canvas_height = opt(j, "canvas_height", l.canvas_height);
  if (const Json* r = child(j, "context")) l.context = rect_from_json(*r);
  if (const Json* r = child(j, "task")) l.task = rect_from_json(*r);
  if (const Json* c = child(j, "outline_color")) l.outline_color = rgb_from_json(*c);
  l.outline_thickness = opt(j, "outline_thickness", l.outline_thickness);
  l.validate();
  return l;
}

}  // namespace

Json to_json(const Camera& c) {
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height},
          {"pose", to_json(c.pose)}};
}

Camera camera_from_json(const Json& j) {
  Camera c;
  c.fx = req<double>(j, "fx");
  c.fy = req<double>(j, "fy");
  c.cx = req<double>(j, "cx");
  c.cy = req<double>(j, "cy");
  c.width = req<int>(j, "width");
  c.height = req<int>(j, "height");
  if (const Json* p = child(j, "pose")) c.pose = rigid_from_json(*p);
  c.validate();
  return c;
}

Json to_json(const Plane& p) { return {{"normal", to_json(p.normal)}, {"origin", to_json(p.origin)}}; }

Plane plane_from_json(const Json& j) {
  const Vec3 n = vec3_from_json(field(j, "normal"));
  if (!(n.norm() > 0)) bad("plane normal must be non-zero");
  return Plane::from_normal_point(n, vec3_from_json(field(j, "origin")));
}

Json to_json(const Aabb& b) { return {{"min", to_json(b.min)}, {"max", to_json(b.max)}}; }

Aabb aabb_from_json(const Json& j) { return {vec3_from_json(field(j, "min")), vec3_from_json(field(j, "max"))}; }

Json to_json(const LossBreakdown& l) {
  return {{"silhouette", l.silhouette}, {"geometric", l.geometric}, {"bbox", l.bbox}, {"total", l.total}};
}

LossBreakdown loss_from_json(const Json& j) {
  LossBreakdown l;
  l.silhouette = req<double>(j, "silhouette");
  l.geometric = req<double>(j, "geometric");
  l.bbox = req<double>(j, "bbox");
  l.total = req<double>(j, "total");
  return l;
}

Json to_json(const MetricReport& r) {
  return {{"chamfer", r.chamfer},     {"f_score", r.fscore},         {"iou", r.bbox_iou},
          {"precision", r.precision}, {"recall", r.recall},          {"hausdorff", r.hausdorff},
          {"icp_rms", r.icp_rms},     {"pred_samples", r.pred_samples}, {"gt_samples", r.gt_samples}};
}

MetricReport metric_report_from_json(const Json& j) {
  MetricReport r;
  r.chamfer = req<double>(j, "chamfer");
  r.fscore = req<double>(j, "f_score");
  r.bbox_iou = req<double>(j, "iou");
  r.precision = req<double>(j, "precision");
  r.recall = req<double>(j, "recall");
  r.hausdorff = req<double>(j, "hausdorff");
  r.icp_rms = opt(j, "icp_rms", 0.0);
  r.pred_samples = opt<std::size_t>(j, "pred_samples", 0);
  r.gt_samples = opt<std::size_t>(j, "gt_samples", 0);
  return r;
}

Json to_json(const MetricConfig& m) {
  Json j = {{"samples_per_scene", m.samples_per_scene}, {"fscore_tau", m.fscore_tau}};
  if (m.precision_tau) j["precision_tau"] = *m.precision_tau;
  if (m.recall_tau) j["recall_tau"] = *m.recall_tau;
  j["icp"] = to_json(m.icp);
  j["shared_normalization"] = m.shared_normalization;
  j["icp_align"] = m.icp_align;
  j["seed"] = m.seed;
  return j;
}

Json to_json(const OptimizerConfig& o) {
  return {{"iterations", o.iterations},
          {"learning_rate", o.learning_rate},
          {"final_learning_rate", o.final_learning_rate},
          {"early_stop_eps", o.early_stop_eps},
          {"early_stop_patience", o.early_stop_patience},
          {"flip_restart", o.flip_restart},
          {"seed", o.seed},
          {"weights", to_json(o.weights)},
          {"raster", to_json(o.raster)}};
}

Json to_json(const SceneFixture& f) {
  Json objects = Json::array();
  for (const auto& o : f.objects) {
    objects.push_back({{"id", o.id},
                       {"label", o.label},
                       {"box_size", to_json(o.box_size)},
                       {"pose", {{"t", to_json(o.pose.t)}, {"r_y", o.pose.r_y}, {"s", o.pose.s}}},
                       {"color", to_json(o.color)}});
  }
  return {{"camera", to_json(f.camera)},
          {"room",
           {{"x_min", f.room.x_min},
            {"x_max", f.room.x_max},
            {"z_min", f.room.z_min},
            {"z_max", f.room.z_max},
            {"height", f.room.height},
            {"floor_color", to_json(f.room.floor_color)},
            {"wall_color", to_json(f.room.wall_color)}}},
          {"objects", objects},
          {"empty_room_offset", to_json(f.empty_room_offset)},
          {"point_noise", f.point_noise},
          {"seed", f.seed}};
}

SceneFixture fixture_from_json(const Json& j) {
  SceneFixture f;
  f.camera = camera_from_json(field(j, "camera"));
  if (const Json* r = child(j, "room")) {
    f.room.x_min = opt(*r, "x_min", f.room.x_min);
    f.room.x_max = opt(*r, "x_max", f.room.x_max);
    f.room.z_min = opt(*r, "z_min", f.room.z_min);
    f.room.z_max = opt(*r, "z_max", f.room.z_max);
    f.room.height = opt(*r, "height", f.room.height);
    if (const Json* c = child(*r, "floor_color")) f.room.floor_color = rgb_from_json(*c);
    if (const Json* c = child(*r, "wall_color")) f.room.wall_color = rgb_from_json(*c);
  }
  for (const auto& o : field(j, "objects")) {
    FixtureObject obj;
    obj.id = req<std::string>(o, "id");
    obj.label = opt<std::string>(o, "label", obj.id);
    if (const Json* b = child(o, "box_size")) obj.box_size = vec3_from_json(*b);
    const Json& p = field(o, "pose");
    obj.pose.t = vec3_from_json(field(p, "t"));
    obj.pose.r_y = opt(p, "r_y", 0.0);
    obj.pose.s = opt(p, "s", 1.0);
    if (const Json* c = child(o, "color")) obj.color = rgb_from_json(*c);
    f.objects.push_back(std::move(obj));
  }
  if (const Json* v = child(j, "empty_room_offset")) f.empty_room_offset = vec3_from_json(*v);
  f.point_noise = opt(j, "point_noise", 0.0);
  f.seed = opt<std::uint64_t>(j, "seed", 0);
  f.validate();
  return f;
}

SceneFixture load_fixture(const fs::path& path) {
  try {
    return fixture_from_json(load_json(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Json to_json(const ObjectResult& r) {
  Json j = {{"id", r.id}, {"label", r.label}, {"status", r.status}};
  j["error"] = r.error.empty() ? Json(nullptr) : Json(r.error);
  j["model"] = std::string(to_string(r.model));
  if (r.model == PoseModel::Planar4) {
    j["pose"] = {{"t_x", r.planar.t_x}, {"t_z", r.planar.t_z}, {"r_y", r.planar.r_y}, {"s", r.planar.s}};
  } else {
    j["pose"] = {{"t", to_json(r.regular.t)}, {"r_y", r.regular.r_y}, {"s", r.regular.s}};
  }
  j["pivot"] = to_json(r.pivot);
  j["mesh"] = r.mesh.empty() ? Json(nullptr) : Json(r.mesh);
  j["loss"] = to_json(r.loss);
  j["initial_loss"] = to_json(r.initial_loss);
  j["iterations"] = r.iterations;
  j["best_iteration"] = r.best_iteration;
  j["improved"] = r.improved;
  j["non_finite"] = r.non_finite;
  j["ground_min"] = r.ground_min ? Json(*r.ground_min) : Json(nullptr);
  return j;
}

ObjectResult object_result_from_json(const Json& j) {
  ObjectResult r;
  r.id = req<std::string>(j, "id");
  r.label = opt<std::string>(j, "label", "");
  r.status = req<std::string>(j, "status");
  r.error = opt<std::string>(j, "error", "");
  r.model = pose_model_from_string(req<std::string>(j, "model"));
  const Json& p = field(j, "pose");
  if (r.model == PoseModel::Planar4) {
    r.planar = {req<double>(p, "t_x"), req<double>(p, "t_z"), req<double>(p, "r_y"), req<double>(p, "s")};
  } else {
    r.regular = {vec3_from_json(field(p, "t")), req<double>(p, "r_y"), req<double>(p, "s")};
  }
  r.pivot = vec3_from_json(field(j, "pivot"));
  r.mesh = opt<std::string>(j, "mesh", "");
  r.loss = loss_from_json(field(j, "loss"));
  r.initial_loss = loss_from_json(field(j, "initial_loss"));
  r.iterations = req<int>(j, "iterations");
  r.best_iteration = req<int>(j, "best_iteration");
  r.improved = req<bool>(j, "improved");
  r.non_finite = req<bool>(j, "non_finite");
  if (const Json* g = child(j, "ground_min")) r.ground_min = get_as<double>(*g, "ground_min");
  return r;
}

Json to_json(const SceneResult& r) {
  Json j = {{"version", 1}, {"status", r.status}, {"camera", to_json(r.camera)}};
  j["plane"] = r.plane ? to_json(*r.plane) : Json(nullptr);
  j["background_bounds"] = r.background_bounds ? to_json(*r.background_bounds) : Json(nullptr);
  j["background_shift"] = to_json(r.background_shift);
  Json objects = Json::array();
  for (const auto& o : r.objects) objects.push_back(to_json(o));
  j["objects"] = objects;
  j["metrics"] = r.metrics ? to_json(*r.metrics) : Json(nullptr);
  j["warnings"] = r.warnings;
  return j;
}

SceneResult scene_result_from_json(const Json& j) {
  SceneResult r;
  r.status = req<std::string>(j, "status");
  r.camera = camera_from_json(field(j, "camera"));
  if (const Json* p = child(j, "plane")) r.plane = plane_from_json(*p);
  if (const Json* b = child(j, "background_bounds")) r.background_bounds = aabb_from_json(*b);
  if (const Json* s = child(j, "background_shift")) r.background_shift = vec3_from_json(*s);
  for (const auto& o : field(j, "objects")) r.objects.push_back(object_result_from_json(o));
  if (const Json* m = child(j, "metrics")) r.metrics = metric_report_from_json(*m);
  if (const Json* w = child(j, "warnings")) r.warnings = get_as<std::vector<std::string>>(*w, "warnings");
  return r;
}

SceneConfig scene_config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) bad("scene config must be a JSON object");
  SceneConfig c;
  c.base_dir = base_dir;
  if (const Json* cam = child(j, "camera")) c.camera = camera_from_json(*cam);
  c.pointmap = opt<std::string>(j, "pointmap", "");
  c.background_pointmap = opt<std::string>(j, "background_pointmap", "");
  c.floor_mask = opt<std::string>(j, "floor_mask", "");
  std::set<std::string> ids;
  if (const Json* objs = child(j, "objects")) {
    if (!objs->is_array()) bad("'objects' must be an array");
    for (const auto& o : *objs) {
      ObjectConfig oc;
      oc.id = req<std::string>(o, "id");
      oc.label = opt<std::string>(o, "label", oc.id);
      oc.mask = req<std::string>(o, "mask");
      oc.asset = opt<std::string>(o, "asset", "");
      if (!ids.insert(oc.id).second) bad("duplicate object id '" + oc.id + "'");
      c.objects.push_back(std::move(oc));
    }
  }
  c.output_dir = opt<std::string>(j, "output_dir", c.output_dir.string());
  c.gt_dir = opt<std::string>(j, "gt_dir", "");
  c.image = opt<std::string>(j, "image", "");
  c.fixture = opt<std::string>(j, "fixture", "");
  c.work_dir = opt<std::string>(j, "work_dir", c.work_dir.string());
  if (const Json* s = child(j, "services")) c.services = services_from_json(*s);
  if (const Json* p = child(j, "prompts")) c.prompts = prompts_from_json(*p);
  if (const Json* l = child(j, "aq_layout")) c.layout = layout_from_json(*l);
  c.aq_cleanup = opt(j, "aq_cleanup", c.aq_cleanup);
  if (const Json* o = child(j, "optimizer")) c.optimizer = optimizer_from_json(*o);
  if (const Json* w = child(j, "loss")) c.optimizer.weights = weights_from_json(*w);
  if (const Json* r = child(j, "raster")) c.optimizer.raster = raster_from_json(*r);
  if (const Json* r = child(j, "ransac")) c.ransac = ransac_from_json(*r);
  if (const Json* i = child(j, "background_icp")) c.background_icp = icp_from_json(*i, c.background_icp);
  if (const Json* m = child(j, "metrics")) c.metrics = metric_config_from_json(*m);
  c.bg_percentile = opt(j, "bg_percentile", c.bg_percentile);
  c.dilation_px = opt(j, "dilation_px", c.dilation_px);
  c.min_confidence = opt(j, "min_confidence", c.min_confidence);
  c.disable_planar = opt(j, "disable_planar", c.disable_planar);
  c.disable_aq = opt(j, "disable_aq", c.disable_aq);
  c.workers = opt(j, "workers", c.workers);
  c.seed = opt<std::uint64_t>(j, "seed", c.seed);
  if (c.dilation_px < 0) bad("dilation_px must be >= 0");
  if (c.bg_percentile < 0 || c.bg_percentile >= 0.5) bad("bg_percentile must lie in [0, 0.5)");
  if (c.workers < 0) bad("workers must be >= 0");
  return c;
}

SceneConfig load_scene_config(const fs::path& path) {
  try {
    return scene_config_from_json(load_json(path), path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void SceneConfig::validate_fit() const {
  if (!camera) bad("fit needs a camera");
  if (pointmap.empty()) bad("fit needs a pointmap");
  auto exists = [this](const fs::path& p, const std::string& what) {
    if (!fs::exists(resolve(p))) bad(what + " not found: " + resolve(p).string());
  };
  exists(pointmap, "pointmap");
  if (!background_pointmap.empty()) exists(background_pointmap, "background_pointmap");
  if (!floor_mask.empty()) exists(floor_mask, "floor_mask");
  for (const auto& o : objects) {
    exists(o.mask, "mask of '" + o.id + "'");
    if (o.asset.empty()) bad("object '" + o.id + "' needs an asset mesh");
    exists(o.asset, "asset of '" + o.id + "'");
  }
  if (!gt_dir.empty()) exists(gt_dir, "gt_dir");
}

Json to_json(const SceneConfig& c) {
  Json j;
  if (c.camera) j["camera"] = to_json(*c.camera);
  if (!c.image.empty()) j["image"] = c.image.string();
  if (!c.fixture.empty()) j["fixture"] = c.fixture.string();
  if (!c.pointmap.empty()) j["pointmap"] = c.pointmap.string();
  if (!c.background_pointmap.empty()) j["background_pointmap"] = c.background_pointmap.string();
  if (!c.floor_mask.empty()) j["floor_mask"] = c.floor_mask.string();
  Json objects = Json::array();
  for (const auto& o : c.objects) {
    Json oj = {{"id", o.id}, {"label", o.label}, {"mask", o.mask.string()}};
    if (!o.asset.empty()) oj["asset"] = o.asset.string();
    objects.push_back(oj);
  }
  j["objects"] = objects;
  j["output_dir"] = c.output_dir.string();
  if (!c.gt_dir.empty()) j["gt_dir"] = c.gt_dir.string();
  j["work_dir"] = c.work_dir.string();
  j["services"] = to_json(c.services);
  j["optimizer"] = to_json(c.optimizer);
  j["ransac"] = to_json(c.ransac);
  j["background_icp"] = to_json(c.background_icp);
  j["metrics"] = to_json(c.metrics);
  j["bg_percentile"] = c.bg_percentile;
  j["dilation_px"] = c.dilation_px;
  j["min_confidence"] = c.min_confidence;
  j["disable_planar"] = c.disable_planar;
  j["disable_aq"] = c.disable_aq;
  j["aq_cleanup"] = c.aq_cleanup;
  j["workers"] = c.workers;
  j["seed"] = c.seed;
  return j;
}

}  // namespace rescene
