#include "hpgm/service.hpp"

#include <chrono>
#include <fstream>
#include <random>

#include "hpgm/numcore/optim.hpp"
#include "hpgm/scene3d.hpp"
#include "hpgm/serialize.hpp"

namespace hpgm::svc {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

int seeded_index(std::uint64_t seed, const std::string& label, std::size_t n) {
  std::mt19937_64 rng(nc::derive_seed(seed, label));
  return static_cast<int>(rng() % n);
}

}  // namespace

Models Models::load(const std::filesystem::path& dir) {
  Models m;
  m.vocab = std::filesystem::exists(dir / "vocab.txt") ? text::Vocabularies::load(dir / "vocab.txt")
                                                       : text::Vocabularies::defaults();
  m.layout = layout::LayoutModel::load(dir / "layout");
  m.texture = tex::LctGanModel::load(dir / "texture");
  return m;
}

nlohmann::json Models::checksums() const {
  return {{"layout", nc::checksum(layout.params.named())}, {"texture", texture.checksum()}};
}

GenerationResult generate(const Models& models, std::string_view text, const GenerateOptions& options) {
  const auto t0 = Clock::now();
  const text::HouseSpec spec = text::parse_house(text, models.vocab);
  const double parse_ms = ms_since(t0);
  GenerationResult r = generate(models, spec, options);
  r.timing_ms["parse"] = parse_ms;
  return r;
}

GenerationResult generate(const Models& models, const text::HouseSpec& spec, const GenerateOptions& options) {
  const text::Vocabularies& vocab = models.vocab;
  GenerationResult r;
  r.spec = spec;

  auto t = Clock::now();
  r.boxes = models.layout.predict(spec, vocab);
  r.timing_ms["layout"] = ms_since(t);

  t = Clock::now();
  post::PostprocConfig pc = options.postproc;
  const post::PostprocResult pp = post::postprocess(r.boxes, spec, vocab, pc);
  r.plan = pp.plan;
  r.plan_json = post::plan_to_json(r.plan, vocab).dump(2) + "\n";
  r.timing_ms["postprocess"] = ms_since(t);

  t = Clock::now();
  const std::size_t n_mat = vocab.materials.size(), n_col = vocab.colours.size();
  std::map<std::string, scene::RoomTextures> room_textures;
  for (const text::RoomSpec& room : spec.rooms) {
    scene::RoomTextures rt;
    for (const char* surface : {"floor", "wall"}) {
      const bool floor = surface[0] == 'f';
      const auto& mat = floor ? room.floor_material : room.wall_material;
      const auto& col = floor ? room.floor_colour : room.wall_colour;
      TextureArtifact a;
      a.room_id = room.id;
      a.surface = surface;
      const std::string label = room.id + "/" + surface;
      a.assumed = !mat || !col;
      a.material = mat ? *mat : seeded_index(options.seed, label + "/material", n_mat);
      a.colour = col ? *col : seeded_index(options.seed, label + "/colour", n_col);
      if (a.assumed)
        r.notes.push_back(label + " has no stated texture; using " + vocab.materials[static_cast<std::size_t>(a.material)] +
                          " " + vocab.colours[static_cast<std::size_t>(a.colour)]);
      const auto cond = text::make_condition(vocab, a.material, a.colour);
      const auto novel = tex::generate_novel(models.texture, cond, options.texture_cells, options.texture_cells,
                                             nc::derive_seed(options.seed, "texture/" + label));
      a.image = novel.image;
      a.out_of_distribution = novel.out_of_distribution;
      post::PlanRoom probe;
      probe.id = room.id;
      a.file = "textures/" + (floor ? scene::floor_material(probe) : scene::wall_material(probe)) + ".png";
      (floor ? rt.floor : rt.wall) = a.image;
      r.textures.push_back(std::move(a));
    }
    room_textures[room.id] = rt;
  }
  r.timing_ms["textures"] = ms_since(t);

  t = Clock::now();
  const auto walls = scene::build_walls(r.plan);
  const scene::Mesh mesh = scene::extrude(walls, r.plan);
  const scene::ObjExport ex = scene::export_obj(mesh, scene::house_materials(r.plan, room_textures));
  r.obj = ex.obj;
  r.mtl = ex.mtl;
  std::map<std::string, std::string> hrefs;
  for (const auto& a : r.textures)
    if (a.surface == "floor") hrefs[a.room_id] = a.file;
  r.plan_svg = scene::render_topview_svg(r.plan, vocab, hrefs);
  r.timing_ms["scene"] = ms_since(t);

  r.notes.insert(r.notes.end(), r.plan.notes.begin(), r.plan.notes.end());
  return r;
}

nlohmann::json texture_json(const TextureArtifact& t, const text::Vocabularies& vocab) {
  return {{"room", t.room_id},
          {"surface", t.surface},
          {"material", vocab.materials.at(static_cast<std::size_t>(t.material))},
          {"colour", vocab.colours.at(static_cast<std::size_t>(t.colour))},
          {"assumed", t.assumed},
          {"out_of_distribution", t.out_of_distribution},
          {"file", t.file},
          {"width", t.image.width},
          {"height", t.image.height}};
}

void write_result(const GenerationResult& result, const text::Vocabularies& vocab, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "textures");
  write_text(dir / "plan.json", result.plan_json);
  write_text(dir / "plan.svg", result.plan_svg);
  write_text(dir / "house.obj", result.obj);
  write_text(dir / "house.mtl", result.mtl);
  write_text(dir / "spec.json", house_spec_to_json(result.spec, vocab).dump(2) + "\n");
  write_text(dir / "boxes.json", boxes_to_json(result.boxes).dump(2) + "\n");
  for (const auto& t : result.textures) {
    write_png(dir / t.file, t.image);
    fs::path sidecar = dir / t.file;
    sidecar.replace_extension(".json");
    write_text(sidecar, texture_json(t, vocab).dump(2) + "\n");
  }
  write_text(dir / "notes.json", nlohmann::json(result.notes).dump(2) + "\n");
  write_text(dir / "timing.json", result.timing_ms.dump(2) + "\n");
}

}  // namespace hpgm::svc
