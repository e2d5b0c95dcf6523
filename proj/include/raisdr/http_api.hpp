#pragma once

#include <optional>
#include <string>

#include "raisdr/error.hpp"
#include "raisdr/service.hpp"

namespace httplib {
class Server;
}

namespace raisdr {

/// HTTP status for an error code.
int http_status(ErrorCode code);

/// Installs the /v1 routes. With a token, every route except /v1/health
/// requires `Authorization: Bearer <token>`.
void install_routes(httplib::Server& server, ScreeningService& service,
                    std::optional<std::string> bearer_token = std::nullopt);

}  // namespace raisdr
