#pragma once

#include <vector>

#include "hpgm/textparse.hpp"
#include "hpgm/types.hpp"
#include "json.hpp"

namespace hpgm {

using Json = nlohmann::json;

/// Rooms carry vocabulary words rather than indices so documents stay
/// readable and survive vocabulary reordering.
Json house_spec_to_json(const text::HouseSpec& spec, const text::Vocabularies& vocab);
text::HouseSpec house_spec_from_json(const Json& j, const text::Vocabularies& vocab);

Json bbox_to_json(const BBox& b);
BBox bbox_from_json(const Json& j);
Json boxes_to_json(const std::vector<BBox>& boxes);
std::vector<BBox> boxes_from_json(const Json& j);

Json vocab_to_json(const text::Vocabularies& vocab);

}  // namespace hpgm
