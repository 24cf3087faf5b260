#pragma once

namespace hpgm::testkit {

inline constexpr const char* kText1 =
    "The building contains one washroom, one bedroom, one livingroom, and one kitchen. Specifically, washroom1 "
    "has 5 squares in northeast. bedroom1 has 14 square meters in east. Besides, livingroom1 covers 25 square "
    "meters located in center. kitchen1 has 12 squares in west. bedroom1, kitchen1, washroom1 and livingroom1 "
    "are connected. bedroom1 is next to washroom1.";

inline constexpr const char* kText2 =
    "The house has three bedrooms, one washroom, one balcony, one livingroom, and one kitchen. In practice, "
    "bedroom1 has 13 squares in south. bedroom2 has 9 squares in north. bedroom3 covers 5 square meters located "
    "in west. washroom1 has 4 squares in west. balcony1 is in south with 6 square meters. livingroom1 covers 30 "
    "square meters located in center. kitchen1 is in north with 6 square meters. livingroom1 is adjacent to "
    "bedroom1, bedroom2, balcony1, kitchen1, bedroom3, washroom1. balcony1, bedroom3 and bedroom1 are connected. "
    "bedroom2 is next to kitchen1, washroom1. bedroom3 is adjacent to washroom1.";

}  // namespace hpgm::testkit
