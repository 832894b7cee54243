#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "focuscal/calibration.h"
#include "focuscal/lens_model.h"
#include "focuscal/scale_estimation.h"
#include "focuscal/synthetic.h"

namespace focuscal {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

// Canonical text: sorted keys, two-space indent, floats with 12 significant
// digits, trailing newline. Throws InvalidArgument on non-finite numbers.
std::string CanonicalDump(const Json& value);

// Value obtained by writing and re-reading `x` at 12 significant digits.
double RoundStored(double x);

uint64_t Fnv1a64(std::string_view bytes);
std::string HashString(std::string_view bytes);

std::string ReadTextFile(const std::string& path);
// Writes via a sibling temporary file and rename.
void WriteFileAtomic(const std::string& path, std::string_view contents);

Json ParseJson(std::string_view text);

// Dataset files.
struct Dataset {
  TemplateSpec template_spec;
  std::optional<ImageSize> image_size;
  std::vector<CalibrationView> views;
  Json meta = Json::object();
};

Json DatasetToJson(const Dataset& dataset);
Dataset DatasetFromJson(const Json& j);

// Calibration files.
struct StoredModel {
  CameraModel model;
  std::vector<int> view_ids;
  std::vector<double> distances_mm;
  ReprojectionStats stats;
};

struct CalibrationFile {
  Method method = Method::kBaseline;
  bool converged = true;
  StoredModel refined;
  StoredModel algebraic;
  std::string termination;
  int iterations = 0;
  int accepted_steps = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  Json provenance = Json::object();
};

// Rounds every stored parameter to its on-disk value and recomputes the
// statistics from the rounded model, so the file is self-consistent.
CalibrationFile MakeCalibrationFile(const CalibrationResult& result,
                                    const std::vector<CalibrationView>& views,
                                    Json provenance);

Json CalibrationToJson(const CalibrationFile& file);
CalibrationFile CalibrationFromJson(const Json& j);

std::string_view MethodName(Method method);

// Camera presets.
Json PresetToJson(const CameraPreset& preset);
CameraPreset PresetFromJson(const Json& j);
// Bundled presets by name; throws InvalidArgument for unknown names.
CameraPreset BuiltinPreset(std::string_view name);
std::vector<std::string> BuiltinPresetNames();

// Scale tables and zone files.
std::string ScaleTableToCsv(const ScaleTable& table);
ScaleTable ScaleTableFromCsv(std::string_view text);
Json ZonesToJson(const ZoneSegmentation& zones);
ZoneSegmentation ZonesFromJson(const Json& j);

struct ScaleCurve {
  FocalCurveFit alpha;
  FocalCurveFit beta;
};
Json ScaleCurveToJson(const ScaleCurve& curve);
ScaleCurve ScaleCurveFromJson(const Json& j);

std::string BiasReportToCsv(const BiasReport& report);

}  // namespace focuscal
