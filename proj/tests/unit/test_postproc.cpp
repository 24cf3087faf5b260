#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hpgm/dataset.hpp"
#include "hpgm/postproc.hpp"
#include "support/plan_checks.hpp"

using namespace hpgm;
using namespace hpgm::post;

namespace {

const text::Vocabularies& vocab() {
  static const text::Vocabularies v = text::Vocabularies::defaults();
  return v;
}

RectiPolygon rect_poly(double x0, double y0, double x1, double y1) {
  return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

Segment hseg(double y, double lo, double hi) { return {Axis::kHorizontal, y, lo, hi, {}}; }
Segment vseg(double x, double lo, double hi) { return {Axis::kVertical, x, lo, hi, {}}; }

BBox px_box(double x0, double y0, double x1, double y1) { return {x0 / 512, y0 / 512, x1 / 512, y1 / 512}; }

text::RoomSpec room(const std::string& id, const std::string& type) {
  text::RoomSpec r;
  r.id = id;
  r.room_type = *vocab().room_type_index(type);
  r.size_sqm = 10;
  return r;
}

double monte_carlo_weight(const GaussianWeightSpec& g, const RectiPolygon& poly, int samples, std::uint64_t seed) {
  double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
  for (const auto& p : poly.vertices) x0 = std::min(x0, p.x), y0 = std::min(y0, p.y), x1 = std::max(x1, p.x), y1 = std::max(y1, p.y);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  double sum = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = ux(rng), y = uy(rng);
    if (!testkit::inside(poly, x, y)) continue;
    sum += std::exp(-std::pow((x - g.cx) / g.w, 2) - std::pow((y - g.cy) / g.h, 2));
  }
  return sum / samples * (x1 - x0) * (y1 - y0) / (g.w * g.h);
}

}  // namespace

TEST(Polygon, AreaAndValidity) {
  const auto sq = rect_poly(0, 0, 10, 5);
  EXPECT_DOUBLE_EQ(sq.signed_area(), 50);
  EXPECT_TRUE(sq.is_valid());
  RectiPolygon reversed{{sq.vertices.rbegin(), sq.vertices.rend()}};
  EXPECT_FALSE(reversed.is_valid());
  const RectiPolygon ell{{{0, 0}, {10, 0}, {10, 4}, {4, 4}, {4, 10}, {0, 10}}};
  EXPECT_TRUE(ell.is_valid());
  EXPECT_DOUBLE_EQ(ell.area(), 64);
  const RectiPolygon diagonal{{{0, 0}, {10, 0}, {10, 10}, {0, 0}}};
  EXPECT_FALSE(diagonal.is_valid());
  // Two squares touching at one corner, traced as a single loop.
  const RectiPolygon pinch{{{0, 0}, {5, 0}, {5, 5}, {10, 5}, {10, 10}, {5, 10}, {5, 5}, {0, 5}}};
  EXPECT_FALSE(pinch.is_valid());
}

TEST(Polygon, DecomposeCoversArea) {
  const RectiPolygon u{{{0, 0}, {3, 0}, {3, 8}, {6, 8}, {6, 0}, {9, 0}, {9, 10}, {0, 10}}};
  ASSERT_TRUE(u.is_valid());
  double total = 0;
  for (const Rect& r : decompose(u)) total += r.area();
  EXPECT_DOUBLE_EQ(total, u.area());
}

TEST(PolygonWeight, SelfBoxIsPiErfOneSquared) {
  const GaussianWeightSpec g{100, 200, 30, 10};
  const double expected = std::numbers::pi * std::pow(std::erf(1.0), 2);
  EXPECT_NEAR(polygon_weight(g, rect_poly(70, 190, 130, 210)), expected, 1e-12);
  EXPECT_NEAR(expected, 2.2310, 1e-4);
}

TEST(PolygonWeight, MatchesMonteCarloOnLShape) {
  const RectiPolygon ell{{{50, 50}, {150, 50}, {150, 90}, {90, 90}, {90, 160}, {50, 160}}};
  const GaussianWeightSpec g{100, 100, 40, 30};
  const double mc = monte_carlo_weight(g, ell, 200000, 3);
  EXPECT_NEAR(polygon_weight(g, ell) / mc, 1.0, 0.02);
}

TEST(PolygonWeight, AdditiveOverSplit) {
  const GaussianWeightSpec g{10, 20, 7, 3};
  const double whole = rect_weight(g, {0, 0, 40, 40});
  EXPECT_NEAR(rect_weight(g, {0, 0, 13, 40}) + rect_weight(g, {13, 0, 40, 40}), whole, 1e-12);
}

TEST(Assign, ArgmaxWithLowIndexTieBreak) {
  const std::vector<GaussianWeightSpec> rooms{{50, 50, 20, 20}, {150, 50, 20, 20}, {50, 50, 20, 20}};
  EXPECT_EQ(assign_polygon(rect_poly(120, 30, 180, 70), rooms), 1);
  EXPECT_EQ(assign_polygon(rect_poly(30, 30, 70, 70), rooms), 0);
  // Equidistant cell between two identical rooms.
  const std::vector<GaussianWeightSpec> twins{{50, 50, 20, 20}, {150, 50, 20, 20}};
  EXPECT_EQ(assign_polygon(rect_poly(90, 40, 110, 60), twins), 0);
}

TEST(Segments, ExtractFourPerBox) {
  const auto segs = extract_boundaries({px_box(10, 20, 110, 220)});
  ASSERT_EQ(segs.size(), 4u);
  EXPECT_EQ(segs[0].axis, Axis::kVertical);
  EXPECT_EQ(segs[0].fixed, 10);
  EXPECT_EQ(segs[0].lo, 20);
  EXPECT_EQ(segs[0].hi, 220);
  EXPECT_EQ(segs[3].fixed, 220);
}

TEST(Segments, MergeWithinTolerance) {
  const auto merged = merge_segments({hseg(100, 0, 50), hseg(103, 40, 90)}, 4);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_DOUBLE_EQ(merged[0].lo, 0);
  EXPECT_DOUBLE_EQ(merged[0].hi, 90);
  EXPECT_DOUBLE_EQ(merged[0].fixed, (100 * 50 + 103 * 50) / 100.0);
  // Touching spans merge, separated spans and distant lines do not.
  EXPECT_EQ(merge_segments({hseg(10, 0, 5), hseg(10, 5, 9)}, 0).size(), 1u);
  EXPECT_EQ(merge_segments({hseg(10, 0, 5), hseg(10, 6, 9)}, 4).size(), 2u);
  EXPECT_EQ(merge_segments({hseg(10, 0, 5), hseg(15, 0, 5)}, 4).size(), 2u);
  EXPECT_EQ(merge_segments({hseg(10, 0, 5), vseg(10, 0, 5)}, 4).size(), 2u);
}

TEST(Segments, MergeIsAFixpoint) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> c(0, 200), len(1, 60);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Segment> segs;
    for (int i = 0; i < 30; ++i) {
      const int lo = c(rng);
      segs.push_back(i % 2 ? hseg(c(rng), lo, lo + len(rng)) : vseg(c(rng), lo, lo + len(rng)));
    }
    const auto once = merge_segments(segs, 4);
    const auto twice = merge_segments(once, 4);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_TRUE(once[i].same_geometry(twice[i]));
  }
}

TEST(Segments, AlignSnapsToWeightedMean) {
  const auto out = align_segments({vseg(100, 0, 50), vseg(102, 60, 110)}, 4);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_DOUBLE_EQ(out[0].fixed, 101);
  EXPECT_DOUBLE_EQ(out[1].fixed, 101);
  const auto weighted = align_segments({vseg(100, 0, 30), vseg(104, 60, 70)}, 8);
  EXPECT_DOUBLE_EQ(weighted[0].fixed, (100 * 30 + 104 * 10) / 40.0);
}

TEST(Segments, AlignMovesEndpointsOntoSnappedLines) {
  // Horizontal wall ending at x = 98 next to a vertical line at x = 100.
  const auto out = align_segments({hseg(10, 0, 98), vseg(100, 0, 50)}, 4);
  ASSERT_EQ(out.size(), 2u);
  const Segment& h = out[0].axis == Axis::kHorizontal ? out[0] : out[1];
  EXPECT_DOUBLE_EQ(h.hi, 100);
}

TEST(Segments, AlignIsAFixpoint) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> c(0, 300), len(5, 80);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Segment> segs;
    for (int i = 0; i < 24; ++i) {
      const int lo = c(rng);
      segs.push_back(i % 2 ? hseg(c(rng), lo, lo + len(rng)) : vseg(c(rng), lo, lo + len(rng)));
    }
    const auto once = align_segments(segs, 8);
    const auto twice = align_segments(once, 8);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_TRUE(once[i].same_geometry(twice[i]));
  }
}

TEST(Segments, CollapsingRoomIsDegenerate) {
  const auto segs = extract_boundaries({px_box(0, 0, 100, 100), px_box(100, 0, 105, 100)});
  EXPECT_THROW(align_segments(segs, 8, 2), DegenerateLayout);
  EXPECT_NO_THROW(align_segments(segs, 2, 2));
}

TEST(Arrangement, TwoAdjacentBoxesGiveTwoFaces) {
  const auto segs = align_segments(merge_segments(extract_boundaries({px_box(0, 0, 100, 100), px_box(100, 0, 200, 100)}), 4), 8);
  const auto arr = build_arrangement(segs);
  ASSERT_EQ(arr.faces.size(), 2u);
  for (const auto& f : arr.faces) {
    double a = 0;
    for (const Rect& r : f) a += r.area();
    EXPECT_DOUBLE_EQ(a, 10000);
  }
}

TEST(Arrangement, OverlapCreatesSharedFace) {
  const auto segs = extract_boundaries({px_box(0, 0, 100, 100), px_box(50, 50, 150, 150)});
  const auto arr = build_arrangement(segs);
  EXPECT_EQ(arr.faces.size(), 3u);
}

TEST(Postprocess, TwoRoomsGetDoorWindowsEntrance) {
  text::HouseSpec spec;
  spec.rooms = {room("livingroom1", "livingroom"), room("bedroom1", "bedroom")};
  spec.adjacency = {{0, 1}};
  const auto res = postprocess({px_box(100, 100, 300, 300), px_box(300, 100, 400, 300)}, spec, vocab());
  const auto& plan = res.plan;
  ASSERT_EQ(plan.rooms.size(), 2u);
  EXPECT_DOUBLE_EQ(plan.rooms[0].polygon.area(), 40000);
  ASSERT_EQ(plan.doors.size(), 1u);
  EXPECT_EQ(plan.doors[0].kind, OpeningKind::kDoor);
  EXPECT_DOUBLE_EQ(plan.doors[0].width_mm, 900);
  EXPECT_DOUBLE_EQ(plan.doors[0].wall.fixed, 300);
  EXPECT_DOUBLE_EQ(plan.doors[0].center, 200);
  ASSERT_EQ(plan.windows.size(), 2u);
  EXPECT_NEAR(plan.windows[0].width_px(), 0.3 * 200, 1e-9);
  ASSERT_TRUE(plan.entrance.has_value());
  EXPECT_EQ(plan.entrance->room_a, 0);
  EXPECT_TRUE(testkit::plan_violations(res, vocab()).empty());
}

TEST(Postprocess, GapBetweenBoxesIsAbsorbed) {
  text::HouseSpec spec;
  spec.rooms = {room("livingroom1", "livingroom"), room("bedroom1", "bedroom")};
  const auto res = postprocess({px_box(100, 100, 300, 300), px_box(305, 100, 400, 300)}, spec, vocab());
  EXPECT_EQ(res.plan.doors.size(), 1u);
  EXPECT_TRUE(testkit::plan_violations(res, vocab()).empty());
}

TEST(Postprocess, NoLivingRoomThrows) {
  text::HouseSpec spec;
  spec.rooms = {room("bedroom1", "bedroom"), room("bedroom2", "bedroom")};
  EXPECT_THROW(postprocess({px_box(0, 0, 100, 100), px_box(100, 0, 200, 100)}, spec, vocab()), NoLivingRoom);
}

TEST(Postprocess, ShortSharedWall) {
  text::HouseSpec spec;
  spec.rooms = {room("livingroom1", "livingroom"), room("bedroom1", "bedroom")};
  // Rooms share 20 px (about 0.7 m) of wall.
  const std::vector<BBox> boxes{px_box(100, 100, 300, 300), px_box(300, 280, 400, 400)};
  PostprocConfig strict;
  strict.strict_doors = true;
  EXPECT_THROW(postprocess(boxes, spec, vocab(), strict), SharedWallTooShort);
  const auto res = postprocess(boxes, spec, vocab());
  ASSERT_EQ(res.plan.doors.size(), 1u);
  EXPECT_EQ(res.plan.doors[0].kind, OpeningKind::kOpenWall);
  EXPECT_NEAR(res.plan.doors[0].width_px(), 20, 1e-9);
}

TEST(Postprocess, BoxCountMustMatch) {
  text::HouseSpec spec;
  spec.rooms = {room("livingroom1", "livingroom")};
  EXPECT_THROW(postprocess({}, spec, vocab()), std::invalid_argument);
}

TEST(Postprocess, GroundTruthLayoutsAreSound) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto house = data::generate_layout(3 + static_cast<int>(seed % 8), seed, vocab());
    const auto res = postprocess(house.gt_boxes, house.spec, vocab());
    EXPECT_EQ(res.plan.rooms.size(), house.spec.rooms.size()) << seed;
    const auto v = testkit::plan_violations(res, vocab());
    EXPECT_TRUE(v.empty()) << "seed " << seed << ": " << v.front();
  }
}

TEST(Postprocess, NoisyLayoutsAreSound) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.04);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto house = data::generate_layout(4 + static_cast<int>(seed % 5), 1000 + seed, vocab());
    for (BBox& b : house.gt_boxes) b = {b.x0 + noise(rng), b.y0 + noise(rng), b.x1 + noise(rng), b.y1 + noise(rng)};
    const auto res = postprocess(house.gt_boxes, house.spec, vocab());
    const auto v = testkit::plan_violations(res, vocab());
    EXPECT_TRUE(v.empty()) << "seed " << seed << ": " << v.front();
  }
}

TEST(Postprocess, OutputsAreDeterministic) {
  const auto house = data::generate_layout(6, 3, vocab());
  const auto a = postprocess(house.gt_boxes, house.spec, vocab());
  const auto b = postprocess(house.gt_boxes, house.spec, vocab());
  EXPECT_EQ(plan_to_json(a.plan, vocab()).dump(), plan_to_json(b.plan, vocab()).dump());
  EXPECT_EQ(plan_to_svg(a.plan, vocab()), plan_to_svg(b.plan, vocab()));
}

TEST(Postprocess, JsonAndSvgShape) {
  const auto house = data::generate_layout(5, 8, vocab());
  const auto res = postprocess(house.gt_boxes, house.spec, vocab());
  const auto j = plan_to_json(res.plan, vocab());
  EXPECT_EQ(j["rooms"].size(), res.plan.rooms.size());
  EXPECT_TRUE(j["entrance"].is_object());
  double total = 0;
  for (const auto& r : j["rooms"]) total += r["area_sqm"].get<double>();
  EXPECT_NEAR(total, 324.0, 1e-6);
  const std::string svg = plan_to_svg(res.plan, vocab());
  EXPECT_NE(svg.find("viewBox=\"0 0 512 512\""), std::string::npos);
  std::size_t paths = 0;
  for (std::size_t p = svg.find("<path"); p != std::string::npos; p = svg.find("<path", p + 1)) ++paths;
  EXPECT_EQ(paths, res.plan.rooms.size());
}
