#include "raisdr/service.hpp"

#include <chrono>
#include <ctime>

#include <boost/uuid/uuid.hpp>
#include <boost/uuid/uuid_generators.hpp>
#include <boost/uuid/uuid_io.hpp>

#include "raisdr/error.hpp"
#include "raisdr/evaluation.hpp"
#include "raisdr/fixtures.hpp"
#include "raisdr/image_io.hpp"

namespace raisdr {

using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::function<std::string()> uuid_source() {
  auto gen = std::make_shared<boost::uuids::random_generator>();
  auto mu = std::make_shared<std::mutex>();
  return [gen, mu] {
    std::lock_guard lock(*mu);
    return boost::uuids::to_string((*gen)());
  };
}

ClassifierOutput stored_classifier(const json& j) {
  return {j.at("label").get<int>(), j.at("score").get<double>()};
}

std::string_view status_name(SubmitStatus s) {
  return s == SubmitStatus::Complete ? "complete" : "awaiting_md_decision";
}

}  // namespace

json to_json(const QualityAssessment& a) {
  json failures = json::array();
  for (auto f : a.verdict.failures) failures.push_back(to_string(f));
  return {{"mq", to_json(a.mq)},
          {"anatomy", to_json(a.anatomy)},
          {"failures", std::move(failures)}};
}

QualityAssessment quality_assessment_from_json(const json& j) {
  try {
    QualityAssessment a;
    a.mq = stored_classifier(j.at("mq"));
    a.anatomy = anatomy_output_from_json(j.at("anatomy"), 0.0);
    for (const auto& f : j.at("failures")) {
      a.verdict.failures.push_back(parse_gate_failure(f.get<std::string>()));
    }
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

json to_json(const SubmitOutcome& o) {
  json j = {{"status", status_name(o.status)},
            {"image_id", o.image_id},
            {"prior_retakes", o.prior_retakes}};
  if (o.result) j["result"] = to_json(*o.result);
  if (o.assessment) j["quality"] = to_json(*o.assessment);
  return j;
}

json to_json(const FeedbackEntry& e) {
  return {{"feedback_id", e.feedback_id}, {"study_id", e.study_id},
          {"image_id", e.image_id},       {"reviewer", e.reviewer},
          {"quality", e.quality},         {"grade", to_string(e.grade)},
          {"note", e.note},               {"timestamp", e.timestamp}};
}

FeedbackEntry feedback_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ValueError, "feedback must be an object");
  const auto text = [&](const char* key, bool required) -> std::string {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) {
        throw Error(ErrorCode::ValueError, std::string("missing '") + key + "'");
      }
      return {};
    }
    if (!it->is_string()) {
      throw Error(ErrorCode::ValueError, std::string("'") + key + "' must be a string");
    }
    return it->get<std::string>();
  };
  FeedbackEntry e;
  e.study_id = text("study_id", true);
  e.image_id = text("image_id", true);
  e.reviewer = text("reviewer", true);
  if (e.reviewer.empty()) throw Error(ErrorCode::ValueError, "empty reviewer");
  e.grade = parse_grade(text("grade", true));
  e.quality = text("quality", false);
  if (!e.quality.empty() && e.quality != "pass") parse_gate_failure(e.quality);
  e.note = text("note", false);
  return e;
}

namespace {

FeedbackEntry stored_feedback(const json& j) {
  FeedbackEntry e = feedback_from_json(j);
  e.feedback_id = j.at("feedback_id").get<std::string>();
  e.timestamp = j.at("timestamp").get<std::string>();
  return e;
}

json stored_json(const StoredScreening& s) {
  return {{"study_id", s.study_id},
          {"image_id", s.image_id},
          {"capture_id", s.capture_id},
          {"prior_retakes", s.prior_retakes},
          {"md_decision", s.md_decision ? json(std::string(to_string(*s.md_decision)))
                                        : json(nullptr)},
          {"result", to_json(s.result)}};
}

StoredScreening stored_from_json(const json& j) {
  StoredScreening s;
  s.study_id = j.at("study_id").get<std::string>();
  s.image_id = j.at("image_id").get<std::string>();
  s.capture_id = j.at("capture_id").get<std::string>();
  s.prior_retakes = j.at("prior_retakes").get<int>();
  if (!j.at("md_decision").is_null()) {
    s.md_decision = parse_md_decision(j.at("md_decision").get<std::string>());
  }
  s.result = screening_result_from_json(j.at("result"));
  return s;
}

}  // namespace

ScreeningResult replay(const StoredScreening& stored,
                       const InferenceBackend& backend,
                       const ScreeningPolicy& policy) {
  const ImageRef ref{stored.capture_id, nullptr};
  const auto assessment = assess_quality(backend, ref, policy);
  ScreeningResult r;
  if (assessment.verdict.passed()) {
    r = grade_image(backend, ref, assessment, policy, stored.prior_retakes);
  } else {
    if (!stored.md_decision) {
      throw Error(ErrorCode::InvalidState,
                  "stored screening of " + stored.image_id + " lacks its MD decision");
    }
    r = resolve_md_decision(ref.image_id, assessment, *stored.md_decision,
                            policy, stored.prior_retakes);
  }
  r.image_id = stored.image_id;
  return r;
}

ScreeningService::ScreeningService(
    std::shared_ptr<const InferenceBackend> backend, ServiceConfig config)
    : backend_(std::move(backend)),
      config_(std::move(config)),
      store_(config_.store_dir) {
  config_.policy.validate();
  if (!config_.clock) config_.clock = utc_now;
  if (!config_.id_generator) config_.id_generator = uuid_source();
  const auto& fx = per_patient_fixture();
  datasets_.emplace(std::string(kDefaultDataset),
                    std::make_shared<const Dataset>(
                        Dataset{fx.cohort, fx.predictions}));
  for (const auto& event : store_.load()) apply(event);
}

ScreeningService::~ScreeningService() = default;

void ScreeningService::apply(const json& e) {
  try {
    const auto type = e.at("type").get<std::string>();
    if (type == "study_created") {
      auto s = std::make_shared<Study>();
      s->study_id = e.at("study_id").get<std::string>();
      s->created_at = e.at("created_at").get<std::string>();
      studies_[s->study_id] = s;
    } else if (type == "study_closed") {
      study(e.at("study_id").get<std::string>())->closed = true;
    } else if (type == "screening_pending") {
      auto s = study(e.at("study_id").get<std::string>());
      const auto id = e.at("image_id").get<std::string>();
      if (!s->images.contains(id)) s->order.push_back(id);
      s->images[id].pending =
          Pending{e.at("capture_id").get<std::string>(),
                  e.at("prior_retakes").get<int>(),
                  quality_assessment_from_json(e.at("assessment"))};
    } else if (type == "screening_completed") {
      auto stored = stored_from_json(e);
      auto s = study(stored.study_id);
      if (!s->images.contains(stored.image_id)) s->order.push_back(stored.image_id);
      auto& img = s->images[stored.image_id];
      img.pending.reset();
      img.attempts.push_back(std::move(stored));
    } else if (type == "feedback") {
      feedback_.push_back(stored_feedback(e.at("entry")));
    } else {
      throw Error(ErrorCode::ParseError, "unknown event type '" + type + "'");
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("bad stored event: ") + ex.what());
  }
}

std::shared_ptr<ScreeningService::Study> ScreeningService::study(
    const std::string& study_id) const {
  std::lock_guard lock(mu_);
  const auto it = studies_.find(study_id);
  if (it == studies_.end()) {
    throw Error(ErrorCode::UnknownStudy, "no study '" + study_id + "'");
  }
  return it->second;
}

std::string ScreeningService::create_study() {
  const std::string id = config_.id_generator();
  json event = {{"type", "study_created"},
                {"study_id", id},
                {"created_at", config_.clock()}};
  store_.append(event);
  std::lock_guard lock(mu_);
  auto s = std::make_shared<Study>();
  s->study_id = id;
  s->created_at = event["created_at"];
  studies_[id] = s;
  return id;
}

void ScreeningService::close_study(const std::string& study_id) {
  auto s = study(study_id);
  std::lock_guard lock(s->mu);
  if (s->closed) return;
  store_.append({{"type", "study_closed"}, {"study_id", study_id}});
  s->closed = true;
}

ScreeningResult ScreeningService::complete(Study& s, const std::string& image_id,
                                           const std::string& capture_id,
                                           int prior_retakes,
                                           std::optional<MdDecision> decision,
                                           ScreeningResult result) {
  result.image_id = image_id;
  StoredScreening stored{s.study_id, image_id, capture_id, prior_retakes,
                         decision, result};
  json event = stored_json(stored);
  event["type"] = "screening_completed";
  store_.append(event);
  if (!s.images.contains(image_id)) s.order.push_back(image_id);
  auto& img = s.images[image_id];
  img.pending.reset();
  img.attempts.push_back(std::move(stored));
  return result;
}

SubmitOutcome ScreeningService::submit_image(const std::string& study_id,
                                             std::span<const std::uint8_t> bytes,
                                             ImageMetadata meta) {
  if (meta.image_id.empty()) {
    throw Error(ErrorCode::ValueError, "image_id is required");
  }
  if (meta.capture_id.empty()) meta.capture_id = meta.image_id;
  auto s = study(study_id);
  std::lock_guard lock(s->mu);
  if (s->closed) throw Error(ErrorCode::StudyClosed, "study " + study_id + " is closed");

  int prior_retakes = 0;
  if (const auto it = s->images.find(meta.image_id); it != s->images.end()) {
    if (it->second.pending) {
      throw Error(ErrorCode::InvalidState,
                  meta.image_id + " is awaiting an MD decision");
    }
    const auto& last = it->second.attempts.back().result;
    if (last.disposition != Disposition::Retake) {
      throw Error(ErrorCode::DuplicateImage,
                  meta.image_id + " was already screened in this study");
    }
    prior_retakes = static_cast<int>(it->second.attempts.size());
  }

  const RawImage raw = decode_image(bytes);
  const StandardImage standard = preprocess(raw, config_.preprocess, meta.image_id);
  const ImageRef ref{meta.capture_id, &standard};
  const auto assessment = assess_quality(*backend_, ref, config_.policy);

  SubmitOutcome out;
  out.image_id = meta.image_id;
  out.prior_retakes = prior_retakes;
  if (assessment.verdict.passed()) {
    auto result = grade_image(*backend_, ref, assessment, config_.policy, prior_retakes);
    out.result = complete(*s, meta.image_id, meta.capture_id, prior_retakes,
                          std::nullopt, std::move(result));
    return out;
  }
  store_.append({{"type", "screening_pending"},
                 {"study_id", study_id},
                 {"image_id", meta.image_id},
                 {"capture_id", meta.capture_id},
                 {"prior_retakes", prior_retakes},
                 {"assessment", to_json(assessment)}});
  if (!s->images.contains(meta.image_id)) s->order.push_back(meta.image_id);
  s->images[meta.image_id].pending = Pending{meta.capture_id, prior_retakes, assessment};
  out.status = SubmitStatus::AwaitingMdDecision;
  out.assessment = assessment;
  return out;
}

ScreeningResult ScreeningService::md_decision(const std::string& study_id,
                                              const std::string& image_id,
                                              MdDecision decision) {
  auto s = study(study_id);
  std::lock_guard lock(s->mu);
  const auto it = s->images.find(image_id);
  if (it == s->images.end()) {
    throw Error(ErrorCode::UnknownImage,
                "no image '" + image_id + "' in study " + study_id);
  }
  if (!it->second.pending) {
    throw Error(ErrorCode::InvalidState,
                image_id + " has no pending MD decision");
  }
  const Pending p = *it->second.pending;
  auto result = resolve_md_decision(image_id, p.assessment, decision,
                                    config_.policy, p.prior_retakes);
  return complete(*s, image_id, p.capture_id, p.prior_retakes, decision,
                  std::move(result));
}

json ScreeningService::results(const std::string& study_id) const {
  auto s = study(study_id);
  std::lock_guard lock(s->mu);
  json images = json::array();
  for (const auto& id : s->order) {
    const auto& img = s->images.at(id);
    json attempts = json::array();
    for (const auto& a : img.attempts) attempts.push_back(to_json(a.result));
    std::string status = "complete";
    if (img.pending) status = "awaiting_md_decision";
    else if (img.attempts.back().result.disposition == Disposition::Retake) {
      status = "retake_requested";
    }
    json entry = {{"image_id", id},
                  {"status", status},
                  {"result", img.attempts.empty() ? json(nullptr)
                                                  : to_json(img.attempts.back().result)},
                  {"attempts", std::move(attempts)}};
    if (img.pending) entry["quality"] = to_json(img.pending->assessment);
    images.push_back(std::move(entry));
  }
  return {{"study_id", s->study_id},
          {"created_at", s->created_at},
          {"status", s->closed ? "closed" : "open"},
          {"images", std::move(images)}};
}

FeedbackEntry ScreeningService::submit_feedback(FeedbackEntry entry) {
  {
    auto s = study(entry.study_id);
    std::lock_guard lock(s->mu);
    const auto it = s->images.find(entry.image_id);
    if (it == s->images.end() || it->second.attempts.empty()) {
      throw Error(ErrorCode::UnknownImage,
                  "no screened image '" + entry.image_id + "' in study " +
                      entry.study_id);
    }
  }
  entry.feedback_id = config_.id_generator();
  entry.timestamp = config_.clock();
  store_.append({{"type", "feedback"}, {"entry", to_json(entry)}});
  std::lock_guard lock(mu_);
  feedback_.push_back(entry);
  return entry;
}

std::vector<FeedbackEntry> ScreeningService::feedback(
    const std::string& study_id, const std::string& image_id) const {
  std::lock_guard lock(mu_);
  std::vector<FeedbackEntry> out;
  for (const auto& e : feedback_) {
    if (!study_id.empty() && e.study_id != study_id) continue;
    if (!image_id.empty() && e.image_id != image_id) continue;
    out.push_back(e);
  }
  return out;
}

void ScreeningService::add_dataset(const std::string& name, Dataset dataset) {
  std::lock_guard lock(mu_);
  datasets_[name] = std::make_shared<const Dataset>(std::move(dataset));
}

json ScreeningService::evaluation_report(const std::string& scenario,
                                         const std::string& dataset) const {
  std::shared_ptr<const Dataset> data;
  {
    std::lock_guard lock(mu_);
    const auto it = datasets_.find(dataset);
    if (it == datasets_.end()) {
      throw Error(ErrorCode::ValueError, "unknown dataset '" + dataset + "'");
    }
    data = it->second;
  }
  const auto report =
      evaluate(data->cohort, data->predictions, resolve_scenario(scenario));
  json j = to_json(report);
  j["dataset"] = dataset;
  return j;
}

std::vector<StoredScreening> ScreeningService::stored_screenings() const {
  std::vector<std::shared_ptr<Study>> studies;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : studies_) studies.push_back(s);
  }
  std::vector<StoredScreening> out;
  for (const auto& s : studies) {
    std::lock_guard lock(s->mu);
    for (const auto& id : s->order) {
      for (const auto& a : s->images.at(id).attempts) out.push_back(a);
    }
  }
  return out;
}

void ScreeningService::flush() { store_.compact(); }

}  // namespace raisdr
