#include "hpgm/server.hpp"

#include <mutex>

#include "hpgm/serialize.hpp"
#include "httplib.h"

namespace hpgm::svc {

namespace {

using Json = nlohmann::json;

ApiResponse error(int status, const std::string& code, const std::string& message, Json detail = Json::object()) {
  return {status, {{"code", code}, {"message", message}, {"detail", std::move(detail)}}};
}

ApiResponse not_ready() { return error(503, "not_ready", "models are not loaded yet"); }

// Reads {"text": ..., "seed": ...} into text and seed, or returns the error response.
std::optional<ApiResponse> read_request(const std::string& body, std::string& text, std::uint64_t* seed) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::parse_error& e) {
    return error(400, "bad_request", "request body is not valid JSON", {{"reason", e.what()}});
  }
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
    return error(400, "bad_request", "request needs a string field 'text'");
  text = j["text"].get<std::string>();
  if (seed && j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) return error(400, "bad_request", "'seed' must be a non-negative integer");
    *seed = j["seed"].get<std::uint64_t>();
  }
  return std::nullopt;
}

ApiResponse parse_failure(const text::ParseError& e) {
  Json detail{{"type", "ParseError"}};
  if (const auto* u = dynamic_cast<const text::UnparsableSentence*>(&e)) {
    detail = {{"type", "UnparsableSentence"}, {"sentence_index", u->index()}, {"sentence", u->sentence()}};
  } else if (const auto* m = dynamic_cast<const text::MissingAttribute*>(&e)) {
    detail = {{"type", "MissingAttribute"}, {"room", m->room()}, {"attribute", m->kind()}};
  } else if (const auto* w = dynamic_cast<const text::UnknownWord*>(&e)) {
    detail = {{"type", "UnknownWord"}, {"word", w->word()}};
  } else if (dynamic_cast<const text::ConflictingAttribute*>(&e)) {
    detail = {{"type", "ConflictingAttribute"}};
  }
  return error(400, "parse_error", e.what(), detail);
}

template <typename F>
ApiResponse guarded(F&& f) {
  try {
    return f();
  } catch (const text::ParseError& e) {
    return parse_failure(e);
  } catch (const post::NoLivingRoom& e) {
    return error(422, "unprocessable_spec", e.what(), {{"type", "NoLivingRoom"}});
  } catch (const post::SharedWallTooShort& e) {
    return error(422, "unprocessable_spec", e.what(), {{"type", "SharedWallTooShort"}});
  } catch (const post::DegenerateLayout& e) {
    return error(422, "unprocessable_spec", e.what(), {{"type", "DegenerateLayout"}});
  } catch (const std::exception& e) {
    return error(500, "internal", e.what());
  }
}

}  // namespace

ApiResponse api_parse(const Models* models, const std::string& body) {
  if (!models) return not_ready();
  std::string text;
  if (auto err = read_request(body, text, nullptr)) return *err;
  return guarded([&] {
    const auto spec = text::parse_house(text, models->vocab);
    return ApiResponse{200, house_spec_to_json(spec, models->vocab)};
  });
}

Json result_payload(const GenerationResult& r, const Models& models, std::uint64_t seed) {
  Json textures = Json::array();
  for (const auto& t : r.textures) {
    Json j = texture_json(t, models.vocab);
    const auto png = encode_png(t.image);
    j["png_base64"] = httplib::detail::base64_encode(std::string(png.begin(), png.end()));
    textures.push_back(std::move(j));
  }
  return {{"seed", seed},
          {"spec", house_spec_to_json(r.spec, models.vocab)},
          {"boxes", boxes_to_json(r.boxes)},
          {"plan", Json::parse(r.plan_json)},
          {"plan_json", r.plan_json},
          {"svg", r.plan_svg},
          {"textures", textures},
          {"obj", r.obj},
          {"mtl", r.mtl},
          {"notes", r.notes},
          {"checksums", models.checksums()}};
}

ApiResponse api_generate(const Models* models, const std::string& body) {
  if (!models) return not_ready();
  std::string text;
  GenerateOptions opt;
  if (auto err = read_request(body, text, &opt.seed)) return *err;
  return guarded([&] {
    const auto r = generate(*models, text, opt);
    std::string timing;
    for (const auto& [stage, ms] : r.timing_ms.items())
      timing += (timing.empty() ? "" : ", ") + stage + "=" + std::to_string(ms.get<double>());
    return ApiResponse{200, result_payload(r, *models, opt.seed), {{"X-Stage-Timing", timing}}};
  });
}

ApiResponse api_vocab(const Models* models) {
  if (!models) return not_ready();
  return {200, vocab_to_json(models->vocab)};
}

ApiResponse api_health(const Models* models) {
  if (!models) return error(503, "not_ready", "models are not loaded yet", {{"status", "loading"}});
  return {200, {{"status", "ok"}, {"checksums", models->checksums()}}};
}

struct ApiServer::Impl {
  ServerOptions options;
  httplib::Server http;
  mutable std::mutex mu;
  std::shared_ptr<const Models> models;

  std::shared_ptr<const Models> snapshot() const {
    std::lock_guard<std::mutex> lock(mu);
    return models;
  }
};

ApiServer::ApiServer(ServerOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  Impl* s = impl_.get();
  s->http.set_default_headers({{"Access-Control-Allow-Origin", s->options.cors_origin},
                               {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                               {"Access-Control-Allow-Headers", "Content-Type"},
                               {"Access-Control-Expose-Headers", "X-Stage-Timing"}});
  const auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body.dump(), "application/json");
  };
  s->http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  s->http.Post("/api/parse", [s, reply](const httplib::Request& req, httplib::Response& res) {
    const auto m = s->snapshot();
    reply(res, api_parse(m.get(), req.body));
  });
  s->http.Post("/api/generate", [s, reply](const httplib::Request& req, httplib::Response& res) {
    const auto m = s->snapshot();
    reply(res, api_generate(m.get(), req.body));
  });
  s->http.Get("/api/vocab", [s, reply](const httplib::Request&, httplib::Response& res) {
    const auto m = s->snapshot();
    reply(res, api_vocab(m.get()));
  });
  s->http.Get("/api/health", [s, reply](const httplib::Request&, httplib::Response& res) {
    const auto m = s->snapshot();
    reply(res, api_health(m.get()));
  });
  s->http.set_error_handler([reply](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404) reply(res, error(404, "not_found", "no such endpoint"));
  });
  s->http.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    reply(res, error(500, "internal", what));
  });
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::set_models(std::shared_ptr<const Models> models) {
  std::lock_guard<std::mutex> lock(impl_->mu);
  if (impl_->models) throw std::logic_error("models are already loaded");
  impl_->models = std::move(models);
}

int ApiServer::bind() {
  if (impl_->options.port == 0) return impl_->http.bind_to_any_port(impl_->options.host);
  if (!impl_->http.bind_to_port(impl_->options.host, impl_->options.port))
    throw std::runtime_error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  return impl_->options.port;
}

void ApiServer::serve() { impl_->http.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_->http.is_running()) impl_->http.stop();
}

bool ApiServer::running() const { return impl_->http.is_running(); }

}  // namespace hpgm::svc
