#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "hpgm/dataset.hpp"
#include "hpgm/numcore/optim.hpp"
#include "hpgm/server.hpp"
#include "hpgm/service.hpp"
#include "httplib.h"
#include "support/obj_reference.hpp"
#include "support/texts.hpp"

using namespace hpgm;
using namespace hpgm::svc;
namespace fs = std::filesystem;

namespace {

// Small but trained layout model and an untrained narrow texture model.
const Models& models() {
  static const Models m = [] {
    Models out;
    out.vocab = text::Vocabularies::defaults();
    std::vector<text::HouseSpec> specs;
    std::vector<std::vector<BBox>> boxes;
    for (int i = 0; i < 24; ++i) {
      const auto h = data::generate_layout(4 + i % 4, static_cast<std::uint64_t>(100 + i), out.vocab);
      specs.push_back(h.spec);
      boxes.push_back(h.gt_boxes);
    }
    layout::GcLpnConfig cfg;
    cfg.hidden = 16;
    cfg.epochs = 15;
    out.layout.config = cfg;
    out.layout.params = layout::train_gclpn(layout::training_set(specs, boxes, out.vocab, cfg), cfg).params;
    tex::LctGanConfig tc;
    tc.base_width = 2;
    tc.noise_dim = 4;
    out.texture = tex::LctGanModel::init(tc);
    return out;
  }();
  return m;
}

fs::path checkpoint_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "hpgm_service_ckpt";
    fs::remove_all(d);
    models().layout.save(d / "layout");
    models().texture.save(d / "texture");
    return d;
  }();
  return dir;
}

std::string read(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

nlohmann::json body_of(const std::string& text, std::optional<std::uint64_t> seed = std::nullopt) {
  nlohmann::json j{{"text", text}};
  if (seed) j["seed"] = *seed;
  return j;
}

constexpr const char* kNoLiving =
    "The building contains one washroom and one bedroom. washroom1 has 5 squares in northeast. bedroom1 has 14 "
    "square meters in east. bedroom1 is next to washroom1.";

#ifdef HPGM_CLI
int run_cli(const std::string& args) {
  const int rc = std::system((std::string(HPGM_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}
#endif

}  // namespace

TEST(Pipeline, TextOneProducesPlanTexturesAndMesh) {
  const auto r = generate(models(), hpgm::testkit::kText1);
  EXPECT_EQ(r.spec.rooms.size(), 4u);
  EXPECT_EQ(r.textures.size(), 8u);
  EXPECT_FALSE(r.plan.rooms.empty());
  for (const auto& t : r.textures) {
    EXPECT_TRUE(t.assumed);
    EXPECT_EQ(t.image.width, 32);
    EXPECT_EQ(t.file.rfind("textures/", 0), 0u);
  }
  EXPECT_GE(r.notes.size(), 8u);
  const auto obj = ::testkit::obj::parse(r.obj);
  EXPECT_GT(obj.faces.size(), 0u);
  EXPECT_NE(r.plan_svg.find("<svg"), std::string::npos);
  for (const char* stage : {"parse", "layout", "postprocess", "textures", "scene"})
    EXPECT_TRUE(r.timing_ms.contains(stage)) << stage;
}

TEST(Pipeline, DeterministicPerSeed) {
  const auto a = generate(models(), hpgm::testkit::kText1, {.seed = 3});
  const auto b = generate(models(), hpgm::testkit::kText1, {.seed = 3});
  const auto c = generate(models(), hpgm::testkit::kText1, {.seed = 4});
  EXPECT_EQ(a.plan_json, b.plan_json);
  EXPECT_EQ(a.plan_svg, b.plan_svg);
  EXPECT_EQ(a.obj, b.obj);
  EXPECT_EQ(a.mtl, b.mtl);
  for (std::size_t i = 0; i < a.textures.size(); ++i) EXPECT_EQ(a.textures[i].image, b.textures[i].image);
  bool differs = false;
  for (std::size_t i = 0; i < a.textures.size(); ++i) differs |= !(a.textures[i].image == c.textures[i].image);
  EXPECT_TRUE(differs);
}

TEST(Pipeline, StatedTexturesAreUsed) {
  const auto house = data::generate_layout(5, 9, models().vocab);
  const auto r = generate(models(), house.spec);
  ASSERT_EQ(r.textures.size(), 10u);
  const auto& room = house.spec.rooms[0];
  EXPECT_FALSE(r.textures[0].assumed);
  EXPECT_EQ(r.textures[0].material, *room.floor_material);
  EXPECT_EQ(r.textures[1].colour, *room.wall_colour);
}

TEST(Pipeline, WriteResultLayout) {
  const fs::path dir = fs::temp_directory_path() / "hpgm_service_out";
  fs::remove_all(dir);
  const auto r = generate(models(), hpgm::testkit::kText1);
  write_result(r, models().vocab, dir);
  for (const char* f : {"plan.json", "plan.svg", "house.obj", "house.mtl", "spec.json", "timing.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  int pngs = 0, sidecars = 0;
  for (const auto& e : fs::directory_iterator(dir / "textures")) {
    pngs += e.path().extension() == ".png";
    sidecars += e.path().extension() == ".json";
  }
  EXPECT_GE(pngs, 8);
  EXPECT_EQ(pngs, sidecars);
  EXPECT_EQ(read(dir / "plan.json"), r.plan_json);
  const auto mtl = read(dir / "house.mtl");
  std::istringstream ls(mtl);
  for (std::string line; std::getline(ls, line);)
    if (line.rfind("map_Kd ", 0) == 0) EXPECT_TRUE(fs::exists(dir / line.substr(7))) << line;
  fs::remove_all(dir);
}

TEST(Api, NotReadyBeforeLoad) {
  for (const auto& r : {api_health(nullptr), api_vocab(nullptr), api_parse(nullptr, "{}"), api_generate(nullptr, "{}")}) {
    EXPECT_EQ(r.status, 503);
    EXPECT_EQ(r.body["code"], "not_ready");
    EXPECT_TRUE(r.body.contains("message"));
    EXPECT_TRUE(r.body.contains("detail"));
  }
}

TEST(Api, ParseTextOne) {
  const auto r = api_parse(&models(), body_of(hpgm::testkit::kText1).dump());
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["rooms"].size(), 4u);
}

TEST(Api, ParseErrorsAreSentenceIndexed) {
  const auto r = api_parse(&models(), body_of("hello world").dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["code"], "parse_error");
  EXPECT_EQ(r.body["detail"]["type"], "UnparsableSentence");
  EXPECT_EQ(r.body["detail"]["sentence_index"], 0);
}

TEST(Api, MalformedRequests) {
  EXPECT_EQ(api_parse(&models(), "{not json").status, 400);
  EXPECT_EQ(api_parse(&models(), "{}").body["code"], "bad_request");
  EXPECT_EQ(api_generate(&models(), R"({"text": "x", "seed": -1})").status, 400);
}

TEST(Api, NoLivingRoomIs422) {
  const auto r = api_generate(&models(), body_of(kNoLiving).dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["detail"]["type"], "NoLivingRoom");
}

TEST(Api, GenerateMatchesPipeline) {
  const auto r = api_generate(&models(), body_of(hpgm::testkit::kText1, 11).dump());
  ASSERT_EQ(r.status, 200);
  const auto direct = generate(models(), hpgm::testkit::kText1, {.seed = 11});
  EXPECT_EQ(r.body["plan_json"], direct.plan_json);
  EXPECT_EQ(r.body["svg"], direct.plan_svg);
  EXPECT_EQ(r.body["obj"], direct.obj);
  EXPECT_EQ(r.body["textures"].size(), 8u);
  EXPECT_FALSE(r.body["textures"][0]["png_base64"].get<std::string>().empty());
  EXPECT_FALSE(r.body.contains("timing_ms"));
  EXPECT_TRUE(r.headers.count("X-Stage-Timing"));
  EXPECT_EQ(api_generate(&models(), body_of(hpgm::testkit::kText1, 11).dump()).body, r.body);
}

TEST(Api, HealthAndVocab) {
  const auto before = api_health(&models());
  EXPECT_EQ(before.status, 200);
  EXPECT_EQ(before.body["status"], "ok");
  api_generate(&models(), body_of(hpgm::testkit::kText1).dump());
  EXPECT_EQ(api_health(&models()).body["checksums"], before.body["checksums"]);
  const auto v = api_vocab(&models());
  EXPECT_EQ(v.status, 200);
  EXPECT_FALSE(v.body.empty());
}

TEST(Http, LifecycleCorsAndConcurrency) {
  ApiServer server({"127.0.0.1", 0, "*"});
  const int port = server.bind();
  std::thread t([&] { server.serve(); });
  while (!server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 503);
  EXPECT_EQ(nlohmann::json::parse(health->body)["code"], "not_ready");

  server.set_models(std::shared_ptr<const Models>(&models(), [](const Models*) {}));
  health = cli.Get("/api/health");
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

  const auto pre = cli.Options("/api/generate");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);

  const auto missing = cli.Get("/api/nothing");
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(nlohmann::json::parse(missing->body)["code"], "not_found");

  const auto bad = cli.Post("/api/parse", body_of("hello world").dump(), "application/json");
  EXPECT_EQ(bad->status, 400);

  std::vector<std::string> bodies(3);
  std::vector<std::thread> clients;
  for (std::size_t i = 0; i < bodies.size(); ++i)
    clients.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(120, 0);
      const auto res = c.Post("/api/generate", body_of(hpgm::testkit::kText1, 5).dump(), "application/json");
      if (res && res->status == 200) bodies[i] = res->body;
    });
  for (auto& c : clients) c.join();
  EXPECT_FALSE(bodies[0].empty());
  EXPECT_EQ(bodies[0], bodies[1]);
  EXPECT_EQ(bodies[1], bodies[2]);

  server.stop();
  t.join();
}

#ifdef HPGM_CLI
TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("no-such-command"), 1);
  EXPECT_EQ(run_cli("generate --out /tmp/x"), 1);
  EXPECT_EQ(run_cli("generate --text hi --checkpoints /nonexistent/dir --out /tmp/hpgm_cli_x"), 2);
}

TEST(Cli, GenerateTwiceIsByteIdentical) {
  const fs::path base = fs::temp_directory_path() / "hpgm_cli_gen";
  fs::remove_all(base);
  fs::create_directories(base);
  { std::ofstream(base / "text1.txt") << hpgm::testkit::kText1; }
  for (const char* run : {"run1", "run2"})
    ASSERT_EQ(run_cli("generate --text-file " + (base / "text1.txt").string() + " --checkpoints " +
                      checkpoint_dir().string() + " --seed 3 --out " + (base / run).string()),
              0);
  for (const char* f : {"plan.json", "plan.svg", "house.obj", "house.mtl"}) {
    EXPECT_EQ(read(base / "run1" / f), read(base / "run2" / f)) << f;
    EXPECT_FALSE(read(base / "run1" / f).empty()) << f;
  }
  const auto direct = generate(models(), hpgm::testkit::kText1, {.seed = 3});
  EXPECT_EQ(read(base / "run1" / "plan.json"), direct.plan_json);
  fs::remove_all(base);
}

TEST(Cli, CorpusToTrainedModelsToGenerate) {
  const fs::path base = fs::temp_directory_path() / "hpgm_cli_chain";
  fs::remove_all(base);
  const std::string data = (base / "data").string(), ckpt = (base / "ckpt").string();
  ASSERT_EQ(run_cli("gen-data --out " + data + " --train 12 --test 4 --textures 8"), 0);
  ASSERT_EQ(run_cli("train-layout --data " + data + " --checkpoints " + ckpt + " --epochs 40"), 0);
  ASSERT_EQ(run_cli("train-texture --data " + data + " --checkpoints " + ckpt + " --iterations 2 --base-width 2"), 0);
  EXPECT_TRUE(fs::exists(base / "ckpt" / "layout" / "loss.csv"));
  EXPECT_TRUE(fs::exists(base / "ckpt" / "texture" / "loss.csv"));
  ASSERT_EQ(run_cli("generate --text \"" + std::string(hpgm::testkit::kText1) + "\" --checkpoints " + ckpt +
                    " --out " + (base / "out").string()),
            0);
  EXPECT_TRUE(fs::exists(base / "out" / "house.obj"));
  EXPECT_EQ(run_cli("evaluate --data " + data + " --checkpoints " + ckpt + " --probe-epochs 1 --out " +
                    (base / "report.json").string()),
            0);
  EXPECT_TRUE(fs::exists(base / "report.json"));
  fs::remove_all(base);
}
#endif
