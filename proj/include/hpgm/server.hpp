#pragma once

#include <map>
#include <memory>
#include <string>

#include "hpgm/service.hpp"
#include "json.hpp"

namespace hpgm::svc {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
  std::map<std::string, std::string> headers;
};

/// Request handlers without the socket layer. `models` is null until the
/// snapshot is loaded.
ApiResponse api_parse(const Models* models, const std::string& body);
ApiResponse api_generate(const Models* models, const std::string& body);
ApiResponse api_vocab(const Models* models);
ApiResponse api_health(const Models* models);

/// Full generation payload: SVG inline, textures as base64 PNG. Stage timings
/// travel in the X-Stage-Timing header so equal requests get equal bodies.
nlohmann::json result_payload(const GenerationResult& r, const Models& models, std::uint64_t seed);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
};

/// HTTP JSON API. Models are installed once and then only read.
class ApiServer {
 public:
  explicit ApiServer(ServerOptions options = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  void set_models(std::shared_ptr<const Models> models);
  /// Binds to options.port (0 picks a free port) and returns the port.
  int bind();
  /// Serves until stop(); call after bind().
  void serve();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hpgm::svc
