#include "hpgm/serialize.hpp"

#include <stdexcept>

namespace hpgm {

namespace {

int lookup(std::optional<int> idx, const std::string& word, const char* kind) {
  if (!idx) throw std::invalid_argument(std::string("unknown ") + kind + " \"" + word + "\"");
  return *idx;
}

Json surface_json(const text::Vocabularies& v, std::optional<int> material, std::optional<int> colour) {
  Json s = Json::object();
  s["material"] = material ? Json(v.materials[static_cast<std::size_t>(*material)]) : Json(nullptr);
  s["colour"] = colour ? Json(v.colours[static_cast<std::size_t>(*colour)]) : Json(nullptr);
  return s;
}

}  // namespace

Json house_spec_to_json(const text::HouseSpec& spec, const text::Vocabularies& vocab) {
  Json rooms = Json::array();
  for (const auto& r : spec.rooms) {
    Json room;
    room["id"] = r.id;
    room["type"] = vocab.room_types[static_cast<std::size_t>(r.room_type)];
    room["position"] = vocab.positions[static_cast<std::size_t>(r.position)];
    room["size_sqm"] = r.size_sqm;
    room["floor"] = surface_json(vocab, r.floor_material, r.floor_colour);
    room["wall"] = surface_json(vocab, r.wall_material, r.wall_colour);
    rooms.push_back(std::move(room));
  }
  Json adjacency = Json::array();
  for (auto [a, b] : spec.adjacency) adjacency.push_back({a, b});
  return Json{{"rooms", rooms}, {"adjacency", adjacency}};
}

text::HouseSpec house_spec_from_json(const Json& j, const text::Vocabularies& vocab) {
  text::HouseSpec spec;
  for (const auto& room : j.at("rooms")) {
    text::RoomSpec r;
    r.id = room.at("id").get<std::string>();
    const auto type = room.at("type").get<std::string>();
    const auto pos = room.at("position").get<std::string>();
    r.room_type = lookup(vocab.room_type_index(type), type, "room type");
    r.position = lookup(vocab.position_index(pos), pos, "position");
    r.size_sqm = room.at("size_sqm").get<double>();
    auto read_surface = [&](const char* key, std::optional<int>& material, std::optional<int>& colour) {
      if (!room.contains(key)) return;
      const auto& s = room.at(key);
      if (s.contains("material") && !s.at("material").is_null()) {
        const auto w = s.at("material").get<std::string>();
        material = lookup(vocab.material_index(w), w, "material");
      }
      if (s.contains("colour") && !s.at("colour").is_null()) {
        const auto w = s.at("colour").get<std::string>();
        colour = lookup(vocab.colour_index(w), w, "colour");
      }
    };
    read_surface("floor", r.floor_material, r.floor_colour);
    read_surface("wall", r.wall_material, r.wall_colour);
    spec.rooms.push_back(std::move(r));
  }
  for (const auto& p : j.at("adjacency")) spec.adjacency.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  spec.adjacency = text::normalize_pairs(std::move(spec.adjacency));
  spec.validate(vocab);
  return spec;
}

Json bbox_to_json(const BBox& b) { return Json::array({b.x0, b.y0, b.x1, b.y1}); }

BBox bbox_from_json(const Json& j) {
  return BBox{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

Json boxes_to_json(const std::vector<BBox>& boxes) {
  Json out = Json::array();
  for (const auto& b : boxes) out.push_back(bbox_to_json(b));
  return out;
}

std::vector<BBox> boxes_from_json(const Json& j) {
  std::vector<BBox> out;
  for (const auto& b : j) out.push_back(bbox_from_json(b));
  return out;
}

Json vocab_to_json(const text::Vocabularies& vocab) {
  return Json{{"room_types", vocab.room_types},
              {"positions", vocab.positions},
              {"materials", vocab.materials},
              {"colours", vocab.colours}};
}

}  // namespace hpgm
