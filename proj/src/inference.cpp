#include "raisdr/inference.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "raisdr/codec.hpp"
#include "raisdr/error.hpp"
#include "raisdr/image_io.hpp"

namespace raisdr {

using nlohmann::json;

std::string_view to_string(ModelId m) {
  switch (m) {
    case ModelId::MQ: return "MQ";
    case ModelId::MA: return "MA";
    case ModelId::M1: return "M1";
    case ModelId::M2: return "M2";
    case ModelId::M3: return "M3";
  }
  return "?";
}

ModelId parse_model_id(std::string_view text) {
  for (ModelId m : kAllModels) {
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorCode::ValueError,
              "unknown model id '" + std::string(text) + "'");
}

void ModelThresholds::set(ModelId m, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidPolicy,
                "threshold for " + std::string(to_string(m)) +
                    " must lie in [0, 1]");
  }
  values_[static_cast<std::size_t>(m)] = threshold;
}

namespace {

bool unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

void validate_detection(const Detection& d, double threshold,
                        std::string_view what) {
  if (!unit_interval(d.score)) {
    throw Error(ErrorCode::InvalidOutput,
                std::string(what) + " score outside [0, 1]");
  }
  if (d.present && d.score < threshold) {
    throw Error(ErrorCode::InvalidOutput,
                std::string(what) + " flagged present with score " +
                    std::to_string(d.score) + " below threshold " +
                    std::to_string(threshold));
  }
}

double score_field(const json& j, std::string_view context) {
  const auto it = j.find("score");
  if (it == j.end() || !it->is_number()) {
    throw Error(ErrorCode::InvalidOutput,
                std::string(context) + ": missing numeric score");
  }
  return it->get<double>();
}

}  // namespace

void validate_output(const ClassifierOutput& out, double threshold) {
  if (!unit_interval(out.score)) {
    throw Error(ErrorCode::InvalidOutput,
                "score " + std::to_string(out.score) + " outside [0, 1]");
  }
  if (out.label != 0 && out.label != 1) {
    throw Error(ErrorCode::InvalidOutput, "label must be 0 or 1");
  }
  if (out.label != (out.score >= threshold ? 1 : 0)) {
    throw Error(ErrorCode::InvalidOutput,
                "label " + std::to_string(out.label) +
                    " disagrees with score " + std::to_string(out.score) +
                    " at threshold " + std::to_string(threshold));
  }
}

void validate_output(const AnatomyOutput& out, double threshold) {
  validate_detection(out.macula, threshold, "macula");
  validate_detection(out.optic_nerve, threshold, "optic nerve");
}

json to_json(const ClassifierOutput& out) {
  return {{"label", out.label}, {"score", out.score}};
}

json to_json(const AnatomyOutput& out) {
  const auto detection = [](const Detection& d) {
    json j = {{"present", d.present}, {"score", d.score}};
    if (d.box) j["box"] = {d.box->x0, d.box->y0, d.box->x1, d.box->y1};
    return j;
  };
  return {{"macula", detection(out.macula)},
          {"optic_nerve", detection(out.optic_nerve)}};
}

ClassifierOutput classifier_output_from_json(const json& j, double threshold) {
  if (!j.is_object()) {
    throw Error(ErrorCode::InvalidOutput, "classifier output must be an object");
  }
  ClassifierOutput out;
  out.score = score_field(j, "classifier output");
  const auto label = j.find("label");
  if (label == j.end()) {
    out.label = out.score >= threshold ? 1 : 0;
  } else if (label->is_number_integer() &&
             (label->get<long long>() == 0 || label->get<long long>() == 1)) {
    out.label = label->get<int>();
  } else {
    throw Error(ErrorCode::InvalidOutput, "label must be 0 or 1");
  }
  validate_output(out, threshold);
  return out;
}

AnatomyOutput anatomy_output_from_json(const json& j, double threshold) {
  const auto detection = [&](std::string_view key) {
    const auto it = j.find(key);
    if (!j.is_object() || it == j.end() || !it->is_object()) {
      throw Error(ErrorCode::InvalidOutput,
                  "anatomy output lacks '" + std::string(key) + "'");
    }
    Detection d;
    d.score = score_field(*it, key);
    const auto present = it->find("present");
    if (present == it->end()) {
      d.present = d.score >= threshold;
    } else if (present->is_boolean()) {
      d.present = present->get<bool>();
    } else {
      throw Error(ErrorCode::InvalidOutput, "'present' must be boolean");
    }
    if (const auto box = it->find("box"); box != it->end()) {
      if (!box->is_array() || box->size() != 4) {
        throw Error(ErrorCode::InvalidOutput, "box must be [x0,y0,x1,y1]");
      }
      try {
        d.box = PixelBox{(*box)[0].get<int>(), (*box)[1].get<int>(),
                         (*box)[2].get<int>(), (*box)[3].get<int>()};
      } catch (const json::exception&) {
        throw Error(ErrorCode::InvalidOutput, "box entries must be integers");
      }
    }
    return d;
  };
  AnatomyOutput out{detection("macula"), detection("optic_nerve")};
  validate_output(out, threshold);
  return out;
}

void BackendManifest::insert(std::string image_id, ModelId model,
                             ManifestOutput output,
                             const ModelThresholds& thresholds) {
  const bool anatomy = std::holds_alternative<AnatomyOutput>(output);
  if (anatomy != (model == ModelId::MA)) {
    throw Error(ErrorCode::InvalidOutput,
                "output kind does not match model " +
                    std::string(to_string(model)));
  }
  std::visit([&](const auto& o) { validate_output(o, thresholds.of(model)); },
             output);
  Key key{std::move(image_id), model};
  if (entries_.contains(key)) {
    throw Error(ErrorCode::DuplicateKey,
                "(" + key.first + ", " + std::string(to_string(model)) +
                    ") appears twice");
  }
  entries_.emplace(std::move(key), std::move(output));
}

const ManifestOutput* BackendManifest::find(std::string_view image_id,
                                            ModelId model) const {
  const auto it = entries_.find(Key{std::string(image_id), model});
  return it == entries_.end() ? nullptr : &it->second;
}

json BackendManifest::to_json() const {
  json arr = json::array();
  for (const auto& [key, output] : entries_) {
    arr.push_back({{"image_id", key.first},
                   {"model", to_string(key.second)},
                   {"output", std::visit(
                                  [](const auto& o) { return raisdr::to_json(o); },
                                  output)}});
  }
  return arr;
}

BackendManifest parse_manifest(std::string_view text,
                               const ModelThresholds& thresholds) {
  BackendManifest manifest;
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    return manifest;
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorCode::ParseError, "manifest must be a JSON array");
  }
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("image_id") ||
        !entry.contains("model") || !entry.contains("output") ||
        !entry["image_id"].is_string() || !entry["model"].is_string()) {
      throw Error(ErrorCode::ParseError,
                  "manifest entries need image_id, model and output");
    }
    ModelId model;
    try {
      model = parse_model_id(entry["model"].get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, e.detail());
    }
    const double threshold = thresholds.of(model);
    ManifestOutput output =
        model == ModelId::MA
            ? ManifestOutput(anatomy_output_from_json(entry["output"], threshold))
            : ManifestOutput(
                  classifier_output_from_json(entry["output"], threshold));
    manifest.insert(entry["image_id"].get<std::string>(), model,
                    std::move(output), thresholds);
  }
  return manifest;
}

BackendManifest load_manifest(const std::filesystem::path& path,
                              const ModelThresholds& thresholds) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str(), thresholds);
}

ClassifierOutput StubBackend::classify(ModelId model,
                                       const ImageRef& image) const {
  if (model == ModelId::MA) {
    throw Error(ErrorCode::InvalidOutput, "MA is not a classifier");
  }
  const auto* entry = manifest_.find(image.image_id, model);
  if (entry == nullptr) {
    throw Error(ErrorCode::MissingPrediction,
                "no " + std::string(to_string(model)) + " output for " +
                    image.image_id);
  }
  ClassifierOutput out = std::get<ClassifierOutput>(*entry);
  out.label = out.score >= thresholds_.of(model) ? 1 : 0;
  return out;
}

AnatomyOutput StubBackend::detect_anatomy(const ImageRef& image) const {
  const auto* entry = manifest_.find(image.image_id, ModelId::MA);
  if (entry == nullptr) {
    throw Error(ErrorCode::MissingPrediction,
                "no MA output for " + image.image_id);
  }
  const auto& out = std::get<AnatomyOutput>(*entry);
  validate_output(out, thresholds_.of(ModelId::MA));
  return out;
}

HttpBackend::HttpBackend(std::string base_url, ModelThresholds thresholds,
                         HttpBackendOptions options)
    : base_url_(std::move(base_url)),
      thresholds_(thresholds),
      options_(options) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

json HttpBackend::post_infer(ModelId model, const ImageRef& image) const {
  json request = {{"model", to_string(model)},
                  {"image_id", image.image_id},
                  {"image_png_base64",
                   image.image ? base64_encode(encode_png(*image.image))
                               : std::string()}};
  httplib::Client client(base_url_);
  client.set_connection_timeout(options_.connect_timeout);
  client.set_read_timeout(options_.read_timeout);
  const auto res =
      client.Post("/v1/infer", request.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::BackendUnavailable,
                base_url_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::BackendUnavailable,
                base_url_ + " replied HTTP " + std::to_string(res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidOutput,
                std::string("malformed reply: ") + e.what());
  }
}

ClassifierOutput HttpBackend::classify(ModelId model,
                                       const ImageRef& image) const {
  if (model == ModelId::MA) {
    throw Error(ErrorCode::InvalidOutput, "MA is not a classifier");
  }
  return classifier_output_from_json(post_infer(model, image),
                                     thresholds_.of(model));
}

AnatomyOutput HttpBackend::detect_anatomy(const ImageRef& image) const {
  return anatomy_output_from_json(post_infer(ModelId::MA, image),
                                  thresholds_.of(ModelId::MA));
}

}  // namespace raisdr
