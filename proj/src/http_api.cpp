#include "raisdr/http_api.hpp"

#include "httplib.h"
#include "raisdr/codec.hpp"

namespace raisdr {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownStudy:
    case ErrorCode::UnknownImage:
      return 404;
    case ErrorCode::StudyClosed:
    case ErrorCode::InvalidState:
    case ErrorCode::DuplicateImage:
      return 409;
    case ErrorCode::NoFundusDetected:
    case ErrorCode::EmptyInput:
    case ErrorCode::EmptyMatrix:
    case ErrorCode::DegenerateLabels:
    case ErrorCode::EmptyGroup:
      return 422;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::InvalidOutput:
    case ErrorCode::MissingPrediction:
      return 502;
    case ErrorCode::IoError:
      return 500;
    default:
      return 400;
  }
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view code,
                 const std::string& detail) {
  reply(res, status, {{"error", code}, {"detail", detail}});
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("request body: ") + e.what());
  }
}

std::string string_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) {
    throw Error(ErrorCode::ValueError, std::string("'") + key + "' must be a string");
  }
  return it->get<std::string>();
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

}  // namespace

void install_routes(httplib::Server& server, ScreeningService& service,
                    std::optional<std::string> bearer_token) {
  const auto guarded = [bearer_token](Handler h) -> Handler {
    return [bearer_token, h = std::move(h)](const httplib::Request& req,
                                            httplib::Response& res) {
      if (bearer_token &&
          req.get_header_value("Authorization") != "Bearer " + *bearer_token) {
        reply_error(res, 401, "Unauthorized", "missing or wrong bearer token");
        return;
      }
      try {
        h(req, res);
      } catch (const Error& e) {
        reply_error(res, http_status(e.code()), to_string(e.code()), e.detail());
      } catch (const std::exception& e) {
        reply_error(res, 500, "InternalError", e.what());
      }
    };
  };

  server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}});
  });

  server.Post("/v1/studies", guarded([&service](const auto&, auto& res) {
    const auto id = service.create_study();
    reply(res, 201, service.results(id));
  }));

  server.Get(R"(/v1/studies/([^/]+))", guarded([&service](const auto& req, auto& res) {
    reply(res, 200, service.results(req.matches[1]));
  }));

  server.Post(R"(/v1/studies/([^/]+)/close)",
              guarded([&service](const auto& req, auto& res) {
                service.close_study(req.matches[1]);
                reply(res, 200, service.results(req.matches[1]));
              }));

  server.Post(
      R"(/v1/studies/([^/]+)/images)",
      guarded([&service](const httplib::Request& req, httplib::Response& res) {
        ImageMetadata meta;
        std::vector<std::uint8_t> bytes;
        if (req.is_multipart_form_data()) {
          if (!req.has_file("image")) {
            throw Error(ErrorCode::ValueError, "multipart upload needs an 'image' part");
          }
          const auto& content = req.get_file_value("image").content;
          bytes.assign(content.begin(), content.end());
          if (req.has_file("image_id")) meta.image_id = req.get_file_value("image_id").content;
          if (req.has_file("capture_id")) {
            meta.capture_id = req.get_file_value("capture_id").content;
          }
          if (meta.image_id.empty()) meta.image_id = req.get_file_value("image").filename;
        } else {
          const json body = parse_body(req);
          meta.image_id = string_field(body, "image_id");
          meta.capture_id = string_field(body, "capture_id");
          std::string encoded = string_field(body, "image_base64");
          if (encoded.empty()) encoded = string_field(body, "image_png_base64");
          if (encoded.empty()) {
            throw Error(ErrorCode::ValueError, "missing 'image_base64'");
          }
          bytes = base64_decode(encoded);
        }
        const auto outcome = service.submit_image(
            req.matches[1], bytes, meta);
        reply(res, outcome.status == SubmitStatus::Complete ? 200 : 202,
              to_json(outcome));
      }));

  server.Post(R"(/v1/studies/([^/]+)/images/([^/]+)/md-decision)",
              guarded([&service](const auto& req, auto& res) {
                const json body = parse_body(req);
                const auto decision = parse_md_decision(string_field(body, "decision"));
                const auto result =
                    service.md_decision(req.matches[1], req.matches[2], decision);
                reply(res, 200,
                      {{"status", "complete"},
                       {"image_id", result.image_id},
                       {"result", to_json(result)}});
              }));

  server.Get(R"(/v1/studies/([^/]+)/results)",
             guarded([&service](const auto& req, auto& res) {
               reply(res, 200, service.results(req.matches[1]));
             }));

  server.Post("/v1/feedback", guarded([&service](const auto& req, auto& res) {
    const auto stored = service.submit_feedback(feedback_from_json(parse_body(req)));
    reply(res, 201, to_json(stored));
  }));

  server.Get("/v1/feedback", guarded([&service](const auto& req, auto& res) {
    json out = json::array();
    for (const auto& e : service.feedback(req.get_param_value("study_id"),
                                          req.get_param_value("image_id"))) {
      out.push_back(to_json(e));
    }
    reply(res, 200, {{"feedback", std::move(out)}});
  }));

  server.Get("/v1/reports/evaluation", guarded([&service](const auto& req, auto& res) {
    std::string scenario = req.get_param_value("scenario");
    if (scenario.empty()) scenario = "experiment-1";
    std::string dataset = req.get_param_value("dataset");
    if (dataset.empty()) dataset = std::string(ScreeningService::kDefaultDataset);
    reply(res, 200, service.evaluation_report(scenario, dataset));
  }));
}

}  // namespace raisdr
