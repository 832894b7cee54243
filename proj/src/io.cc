#include "focuscal/io.h"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "focuscal/error.h"
#include "focuscal_builtin_presets.h"

namespace focuscal {

namespace {

std::string FormatDouble(double x) {
  if (!std::isfinite(x)) {
    Throw(ErrorCode::kInvalidArgument, "cannot serialize a non-finite number");
  }
  if (x == 0.0) x = 0.0;  // drop the sign of negative zero
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

bool IsScalar(const Json& v) {
  return !v.is_object() && !v.is_array();
}

void DumpValue(const Json& v, int indent, std::string& out) {
  const std::string pad(static_cast<size_t>(indent) + 2, ' ');
  const std::string close_pad(static_cast<size_t>(indent), ' ');
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        out += Json(it.key()).dump();
        out += ": ";
        DumpValue(it.value(), indent + 2, out);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      bool flat = true;
      for (const auto& e : v) flat = flat && IsScalar(e);
      if (flat) {
        out += "[";
        for (size_t i = 0; i < v.size(); ++i) {
          if (i > 0) out += ", ";
          DumpValue(v[i], indent + 2, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ",\n";
        out += pad;
        DumpValue(v[i], indent + 2, out);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += FormatDouble(v.get<double>());
      return;
    default:
      out += v.dump();
      return;
  }
}

[[noreturn]] void SchemaFail(const std::string& what) {
  Throw(ErrorCode::kSchemaError, what);
}

const Json& Field(const Json& j, const char* key) {
  if (!j.is_object()) SchemaFail(std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) SchemaFail(std::string("missing field '") + key + "'");
  return *it;
}

double Number(const Json& j, const char* key) {
  const Json& v = Field(j, key);
  if (!v.is_number()) SchemaFail(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

int Integer(const Json& j, const char* key) {
  const Json& v = Field(j, key);
  if (!v.is_number_integer()) {
    SchemaFail(std::string("field '") + key + "' must be an integer");
  }
  return v.get<int>();
}

std::string String(const Json& j, const char* key) {
  const Json& v = Field(j, key);
  if (!v.is_string()) SchemaFail(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

bool Boolean(const Json& j, const char* key) {
  const Json& v = Field(j, key);
  if (!v.is_boolean()) SchemaFail(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

const Json& Array(const Json& j, const char* key) {
  const Json& v = Field(j, key);
  if (!v.is_array()) SchemaFail(std::string("field '") + key + "' must be an array");
  return v;
}

Eigen::Vector3d Vector3(const Json& j, const char* key) {
  const Json& v = Array(j, key);
  if (v.size() != 3) SchemaFail(std::string("field '") + key + "' needs 3 entries");
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) SchemaFail(std::string("field '") + key + "' must hold numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

void CheckSchema(const Json& j) {
  if (Integer(j, "schema") != kSchemaVersion) {
    SchemaFail("unsupported schema version");
  }
}

Json VectorJson(const Eigen::Vector3d& v) { return Json::array({v[0], v[1], v[2]}); }

Json PoseJson(const Pose& pose) {
  return {{"rodrigues", VectorJson(pose.rotation)},
          {"t_mm", VectorJson(pose.translation)}};
}

Pose PoseFromJson(const Json& j) {
  Pose p;
  p.rotation = Vector3(j, "rodrigues");
  p.translation = Vector3(j, "t_mm");
  return p;
}

Json IntrinsicsJson(const Intrinsics& intr) {
  return {{"alpha_px", intr.alpha}, {"beta_px", intr.beta},
          {"gamma", intr.gamma},    {"u0_px", intr.u0},
          {"v0_px", intr.v0}};
}

Intrinsics IntrinsicsFromJson(const Json& j) {
  Intrinsics intr;
  intr.alpha = Number(j, "alpha_px");
  intr.beta = Number(j, "beta_px");
  intr.gamma = Number(j, "gamma");
  intr.u0 = Number(j, "u0_px");
  intr.v0 = Number(j, "v0_px");
  return intr;
}

Json DistortionJson(const Distortion& d) { return {{"k1", d.k1}, {"k2", d.k2}}; }

Distortion DistortionFromJson(const Json& j) {
  return {Number(j, "k1"), Number(j, "k2")};
}

Json StatsJson(const ReprojectionStats& s) {
  Json per_view = Json::array();
  for (const auto& v : s.per_view) {
    per_view.push_back({{"view_id", v.view_id},
                        {"points", v.points},
                        {"mean_px", v.mean_px},
                        {"std_px", v.stddev_px},
                        {"rms_px", v.rms_px}});
  }
  return {{"mean_px", s.mean_px}, {"median_px", s.median_px},
          {"std_px", s.stddev_px}, {"rms_px", s.rms_px},
          {"max_abs_px", s.max_abs_px}, {"per_view", per_view}};
}

ReprojectionStats StatsFromJson(const Json& j) {
  ReprojectionStats s;
  s.mean_px = Number(j, "mean_px");
  s.median_px = Number(j, "median_px");
  s.stddev_px = Number(j, "std_px");
  s.rms_px = Number(j, "rms_px");
  s.max_abs_px = Number(j, "max_abs_px");
  for (const Json& v : Array(j, "per_view")) {
    ViewReprojection vr;
    vr.view_id = Integer(v, "view_id");
    vr.points = Integer(v, "points");
    vr.mean_px = Number(v, "mean_px");
    vr.stddev_px = Number(v, "std_px");
    vr.rms_px = Number(v, "rms_px");
    s.per_view.push_back(vr);
  }
  return s;
}

Json ModelJson(const StoredModel& m, Method method) {
  Json out;
  const auto& intr = m.model.intrinsics;
  if (method == Method::kBaseline) {
    Json single = IntrinsicsJson(intr.front());
    single["kind"] = "single";
    out["intrinsics"] = single;
  } else {
    Json per_view = Json::array();
    for (size_t i = 0; i < intr.size(); ++i) {
      per_view.push_back({{"view_id", m.view_ids[i]},
                          {"distance_mm", m.distances_mm[i]},
                          {"alpha_px", intr[i].alpha},
                          {"beta_px", intr[i].beta}});
    }
    out["intrinsics"] = {{"kind", "per_distance"},
                         {"gamma", intr.front().gamma},
                         {"u0_px", intr.front().u0},
                         {"v0_px", intr.front().v0},
                         {"per_view", per_view}};
  }
  out["distortion"] = DistortionJson(m.model.distortion);
  Json poses = Json::array();
  for (size_t i = 0; i < m.model.poses.size(); ++i) {
    Json p = PoseJson(m.model.poses[i]);
    p["view_id"] = m.view_ids[i];
    p["distance_mm"] = m.distances_mm[i];
    poses.push_back(p);
  }
  out["poses"] = poses;
  out["stats"] = StatsJson(m.stats);
  return out;
}

StoredModel ModelFromJson(const Json& j, Method method) {
  StoredModel m;
  for (const Json& p : Array(j, "poses")) {
    m.model.poses.push_back(PoseFromJson(p));
    m.view_ids.push_back(Integer(p, "view_id"));
    m.distances_mm.push_back(Number(p, "distance_mm"));
  }
  const Json& intr = Field(j, "intrinsics");
  const std::string kind = String(intr, "kind");
  if (method == Method::kBaseline) {
    if (kind != "single") SchemaFail("baseline intrinsics must be 'single'");
    m.model.intrinsics.assign(m.model.poses.size(), IntrinsicsFromJson(intr));
  } else {
    if (kind != "per_distance") SchemaFail("proposed intrinsics must be 'per_distance'");
    const Json& per_view = Array(intr, "per_view");
    if (per_view.size() != m.model.poses.size()) {
      SchemaFail("per-view intrinsics do not match the pose list");
    }
    for (size_t i = 0; i < per_view.size(); ++i) {
      const Json& v = per_view[i];
      if (Integer(v, "view_id") != m.view_ids[i]) {
        SchemaFail("per-view intrinsics are not in pose order");
      }
      Intrinsics x;
      x.alpha = Number(v, "alpha_px");
      x.beta = Number(v, "beta_px");
      x.gamma = Number(intr, "gamma");
      x.u0 = Number(intr, "u0_px");
      x.v0 = Number(intr, "v0_px");
      m.model.intrinsics.push_back(x);
    }
  }
  m.model.distortion = DistortionFromJson(Field(j, "distortion"));
  m.stats = StatsFromJson(Field(j, "stats"));
  if (m.model.poses.empty()) SchemaFail("a calibration needs at least one pose");
  if (m.stats.per_view.size() != m.model.poses.size()) {
    SchemaFail("per-view statistics do not match the pose list");
  }
  for (size_t i = 0; i < m.view_ids.size(); ++i) {
    if (m.stats.per_view[i].view_id != m.view_ids[i]) {
      SchemaFail("per-view statistics are not in pose order");
    }
  }
  return m;
}

void RoundModel(CameraModel& model) {
  for (auto& intr : model.intrinsics) {
    intr.alpha = RoundStored(intr.alpha);
    intr.beta = RoundStored(intr.beta);
    intr.gamma = RoundStored(intr.gamma);
    intr.u0 = RoundStored(intr.u0);
    intr.v0 = RoundStored(intr.v0);
  }
  model.distortion.k1 = RoundStored(model.distortion.k1);
  model.distortion.k2 = RoundStored(model.distortion.k2);
  for (auto& pose : model.poses) {
    for (int i = 0; i < 3; ++i) {
      pose.rotation[i] = RoundStored(pose.rotation[i]);
      pose.translation[i] = RoundStored(pose.translation[i]);
    }
  }
}

StoredModel StoreModel(const CameraModel& model,
                       const std::vector<CalibrationView>& views) {
  StoredModel m;
  m.model = model;
  RoundModel(m.model);
  for (const auto& v : views) {
    m.view_ids.push_back(v.id);
    m.distances_mm.push_back(RoundStored(v.distance_mm));
  }
  m.stats = ComputeReprojectionStats(m.model, views);
  return m;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double ParseCsvNumber(const std::string& cell) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\r')) ++end;
  if (end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    SchemaFail("invalid number '" + cell + "' in CSV");
  }
  return v;
}

}  // namespace

std::string CanonicalDump(const Json& value) {
  std::string out;
  DumpValue(value, 0, out);
  out += "\n";
  return out;
}

double RoundStored(double x) {
  return std::strtod(FormatDouble(x).c_str(), nullptr);
}

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HashString(std::string_view bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(Fnv1a64(bytes)));
  return buf;
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Throw(ErrorCode::kIoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const std::string& path, std::string_view contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Throw(ErrorCode::kIoError, "cannot write '" + tmp + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) Throw(ErrorCode::kIoError, "write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    Throw(ErrorCode::kIoError,
          "cannot move output into place at '" + path + "': " + std::strerror(errno));
  }
}

Json ParseJson(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    SchemaFail(std::string("malformed JSON: ") + e.what());
  }
}

Json DatasetToJson(const Dataset& dataset) {
  Json views = Json::array();
  for (const auto& view : dataset.views) {
    Json points = Json::array();
    for (const auto& c : view.correspondences) {
      points.push_back({{"wx_mm", c.world.x},
                        {"wy_mm", c.world.y},
                        {"u_px", c.image.u},
                        {"v_px", c.image.v}});
    }
    Json v = {{"id", view.id},
              {"distance_mm", view.distance_mm},
              {"points", points}};
    if (view.ground_truth) v["gt_pose"] = PoseJson(*view.ground_truth);
    views.push_back(v);
  }
  Json out = {{"schema", kSchemaVersion},
              {"template",
               {{"rows", dataset.template_spec.rows},
                {"cols", dataset.template_spec.cols},
                {"pitch_mm", dataset.template_spec.pitch_mm}}},
              {"views", views},
              {"meta", dataset.meta}};
  if (dataset.image_size) {
    out["image"] = {{"width", dataset.image_size->width},
                    {"height", dataset.image_size->height}};
  }
  return out;
}

Dataset DatasetFromJson(const Json& j) {
  CheckSchema(j);
  Dataset d;
  const Json& t = Field(j, "template");
  d.template_spec.rows = Integer(t, "rows");
  d.template_spec.cols = Integer(t, "cols");
  d.template_spec.pitch_mm = Number(t, "pitch_mm");
  try {
    d.template_spec.Validate();
  } catch (const Error& e) {
    SchemaFail(std::string("template: ") + e.what());
  }
  if (j.contains("image")) {
    const Json& img = j["image"];
    d.image_size = ImageSize{Integer(img, "width"), Integer(img, "height")};
    if (d.image_size->width <= 0 || d.image_size->height <= 0) {
      SchemaFail("image size must be positive");
    }
  }
  if (j.contains("meta")) {
    if (!j["meta"].is_object()) SchemaFail("'meta' must be an object");
    d.meta = j["meta"];
  }
  for (const Json& v : Array(j, "views")) {
    CalibrationView view;
    view.id = Integer(v, "id");
    view.distance_mm = Number(v, "distance_mm");
    for (const Json& p : Array(v, "points")) {
      Correspondence c;
      c.world = {Number(p, "wx_mm"), Number(p, "wy_mm"), 0.0};
      c.image = {Number(p, "u_px"), Number(p, "v_px")};
      view.correspondences.push_back(c);
    }
    if (v.contains("gt_pose")) view.ground_truth = PoseFromJson(v["gt_pose"]);
    try {
      view.Validate();
    } catch (const Error& e) {
      SchemaFail(e.what());
    }
    d.views.push_back(std::move(view));
  }
  return d;
}

std::string_view MethodName(Method method) {
  return method == Method::kBaseline ? "baseline" : "proposed";
}

CalibrationFile MakeCalibrationFile(const CalibrationResult& result,
                                    const std::vector<CalibrationView>& views,
                                    Json provenance) {
  CalibrationFile f;
  f.method = result.method;
  f.converged = result.converged();
  f.refined = StoreModel(result.refined, views);
  f.algebraic = StoreModel(result.algebraic, views);
  f.termination = std::string(TerminationName(result.summary.termination));
  f.iterations = result.summary.iterations;
  f.accepted_steps = result.summary.accepted_steps;
  f.initial_objective = RoundStored(result.summary.initial_objective);
  f.final_objective = RoundStored(result.summary.final_objective);
  f.provenance = std::move(provenance);
  return f;
}

Json CalibrationToJson(const CalibrationFile& file) {
  Json out = ModelJson(file.refined, file.method);
  out["schema"] = kSchemaVersion;
  out["method"] = MethodName(file.method);
  out["converged"] = file.converged;
  out["algebraic"] = ModelJson(file.algebraic, file.method);
  out["solver"] = {{"termination", file.termination},
                   {"iterations", file.iterations},
                   {"accepted_steps", file.accepted_steps},
                   {"initial_objective", file.initial_objective},
                   {"final_objective", file.final_objective}};
  out["provenance"] = file.provenance;
  return out;
}

CalibrationFile CalibrationFromJson(const Json& j) {
  CheckSchema(j);
  CalibrationFile f;
  const std::string method = String(j, "method");
  if (method == "baseline") {
    f.method = Method::kBaseline;
  } else if (method == "proposed") {
    f.method = Method::kProposed;
  } else {
    SchemaFail("unknown method '" + method + "'");
  }
  f.converged = Boolean(j, "converged");
  f.refined = ModelFromJson(j, f.method);
  f.algebraic = ModelFromJson(Field(j, "algebraic"), f.method);
  const Json& solver = Field(j, "solver");
  f.termination = String(solver, "termination");
  f.iterations = Integer(solver, "iterations");
  f.accepted_steps = Integer(solver, "accepted_steps");
  f.initial_objective = Number(solver, "initial_objective");
  f.final_objective = Number(solver, "final_objective");
  f.provenance = Field(j, "provenance");
  if (!f.provenance.is_object()) SchemaFail("'provenance' must be an object");
  return f;
}

Json PresetToJson(const CameraPreset& preset) {
  const Point2 ppm = preset.PixelsPerMm();
  return {{"schema", kSchemaVersion},
          {"name", preset.name},
          {"image", {{"width", preset.image_size.width},
                     {"height", preset.image_size.height}}},
          {"intrinsics", IntrinsicsJson(preset.intrinsics)},
          {"lens", {{"radius_mm", preset.lens.radius_mm},
                    {"angle_ratio", preset.lens.angle_ratio},
                    {"probe_offset_mm", preset.lens.probe_offset_mm}}},
          {"distortion", DistortionJson(preset.distortion)},
          {"pixels_per_mm", {{"u", ppm.u}, {"v", ppm.v}}},
          {"hyperfocal_mm", preset.hyperfocal_mm},
          {"resolution_limit_mm", preset.resolution_limit_mm}};
}

CameraPreset PresetFromJson(const Json& j) {
  CheckSchema(j);
  CameraPreset p;
  p.name = String(j, "name");
  const Json& img = Field(j, "image");
  p.image_size = {Integer(img, "width"), Integer(img, "height")};
  p.intrinsics = IntrinsicsFromJson(Field(j, "intrinsics"));
  const Json& lens = Field(j, "lens");
  p.lens.radius_mm = Number(lens, "radius_mm");
  p.lens.angle_ratio = Number(lens, "angle_ratio");
  p.lens.probe_offset_mm = Number(lens, "probe_offset_mm");
  p.distortion = DistortionFromJson(Field(j, "distortion"));
  p.hyperfocal_mm = Number(j, "hyperfocal_mm");
  p.resolution_limit_mm = Number(j, "resolution_limit_mm");
  try {
    p.Validate();
  } catch (const Error& e) {
    SchemaFail(std::string("preset: ") + e.what());
  }
  if (j.contains("pixels_per_mm")) {
    const Json& ppm = j["pixels_per_mm"];
    const Point2 derived = p.PixelsPerMm();
    const double u = Number(ppm, "u");
    const double v = Number(ppm, "v");
    if (std::abs(u - derived.u) > 1e-9 * derived.u ||
        std::abs(v - derived.v) > 1e-9 * derived.v) {
      SchemaFail("pixels_per_mm disagrees with the plateau intrinsics and lens");
    }
  }
  return p;
}

CameraPreset BuiltinPreset(std::string_view name) {
  for (const auto& [preset_name, text] : kBuiltinPresets) {
    if (preset_name == name) return PresetFromJson(ParseJson(text));
  }
  Throw(ErrorCode::kInvalidArgument, "unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> BuiltinPresetNames() {
  std::vector<std::string> names;
  for (const auto& entry : kBuiltinPresets) names.emplace_back(entry.first);
  return names;
}

std::string ScaleTableToCsv(const ScaleTable& table) {
  std::string out = "distance_mm,alpha_px,beta_px\n";
  for (const auto& row : table.rows) {
    out += FormatDouble(row.distance_mm) + "," + FormatDouble(row.alpha_px) +
           "," + FormatDouble(row.beta_px) + "\n";
  }
  return out;
}

ScaleTable ScaleTableFromCsv(std::string_view text) {
  std::stringstream ss{std::string(text)};
  std::string line;
  if (!std::getline(ss, line) || line.rfind("distance_mm,alpha_px,beta_px", 0) != 0) {
    SchemaFail("scale table CSV needs the header distance_mm,alpha_px,beta_px");
  }
  ScaleTable table;
  while (std::getline(ss, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != 3) SchemaFail("scale table rows need 3 columns");
    table.rows.push_back(
        {ParseCsvNumber(cells[0]), ParseCsvNumber(cells[1]), ParseCsvNumber(cells[2])});
  }
  return table;
}

Json ZonesToJson(const ZoneSegmentation& zones) {
  return {{"schema", kSchemaVersion},
          {"zone1_end_mm", zones.zone1_end_mm},
          {"zone2_end_mm", zones.zone2_end_mm},
          {"plateau_alpha_px", zones.plateau_alpha_px},
          {"plateau_beta_px", zones.plateau_beta_px},
          {"has_zone3", zones.has_zone3}};
}

ZoneSegmentation ZonesFromJson(const Json& j) {
  CheckSchema(j);
  ZoneSegmentation z;
  z.zone1_end_mm = Number(j, "zone1_end_mm");
  z.zone2_end_mm = Number(j, "zone2_end_mm");
  z.plateau_alpha_px = Number(j, "plateau_alpha_px");
  z.plateau_beta_px = Number(j, "plateau_beta_px");
  z.has_zone3 = Boolean(j, "has_zone3");
  return z;
}

Json ScaleCurveToJson(const ScaleCurve& curve) {
  return {{"schema", kSchemaVersion},
          {"alpha", {{"k_f", curve.alpha.k_f}, {"value0", curve.alpha.value0}}},
          {"beta", {{"k_f", curve.beta.k_f}, {"value0", curve.beta.value0}}}};
}

ScaleCurve ScaleCurveFromJson(const Json& j) {
  CheckSchema(j);
  ScaleCurve c;
  const Json& a = Field(j, "alpha");
  const Json& b = Field(j, "beta");
  c.alpha = {Number(a, "k_f"), Number(a, "value0")};
  c.beta = {Number(b, "k_f"), Number(b, "value0")};
  return c;
}

std::string BiasReportToCsv(const BiasReport& report) {
  std::string out = "view_id,dx_mm,dy_mm,dz_mm,rot_err_rad\n";
  for (const auto& v : report.views) {
    out += std::to_string(v.view_id) + "," +
           FormatDouble(v.translation_error.x()) + "," +
           FormatDouble(v.translation_error.y()) + "," +
           FormatDouble(v.translation_error.z()) + "," +
           FormatDouble(v.rotation_error_rad) + "\n";
  }
  return out;
}

}  // namespace focuscal
