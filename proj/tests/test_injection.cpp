#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fakeseg/error.hpp"
#include "fakeseg/injection.hpp"
#include "fakeseg/rng.hpp"

using namespace fakeseg;

namespace {

bool in_menu(std::size_t len) {
  return len == 125 || len == 150 || len == 175;
}

void check_one(const SegmentPlan& p, std::size_t t) {
  REQUIRE(p.segments.size() == 1);
  const auto& s = p.segments[0];
  CHECK(s.start < t / 2);
  CHECK(s.end() <= t);
  CHECK(in_menu(s.length));
}

void check_two(const SegmentPlan& p, std::size_t t) {
  REQUIRE(p.segments.size() == 2);
  const auto& a = p.segments[0];
  const auto& b = p.segments[1];
  CHECK(a.start < 125);
  CHECK(b.start >= t / 2);
  CHECK(b.start < t / 2 + 75);
  CHECK(a.end() < b.start);
  CHECK(b.end() <= t);
  CHECK(in_menu(a.length));
  CHECK(in_menu(b.length));
}

std::string id_of(std::size_t i) { return "v" + std::to_string(i); }

}  // namespace

TEST_CASE("one-segment plans") {
  check_one(plan_one_segment({"df-001", 668}, 1), 668);
  for (std::uint64_t seed = 0; seed < 200; ++seed) check_one(plan_one_segment({"edge", 250}, seed), 250);
  CHECK_THROWS_AS(plan_one_segment({"short", 249}, 1), DomainError);
  try {
    plan_one_segment({"short", 100}, 1);
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("250") != std::string::npos);
  }
}

TEST_CASE("two-segment plans") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) check_two(plan_two_segments({"x", 668}, seed), 668);
  CHECK_NOTHROW(validate_plan({"x", {{0, 125}, {334, 125}}}, 668));
  CHECK_THROWS_AS(plan_two_segments({"short", 499}, 1), DomainError);
}

TEST_CASE("plans are deterministic and keyed by id and seed") {
  CHECK(plan_one_segment({"a", 600}, 5) == plan_one_segment({"a", 600}, 5));
  CHECK(plan_two_segments({"a", 600}, 5) == plan_two_segments({"a", 600}, 5));
  int differ = 0;
  for (std::uint64_t s = 0; s < 20; ++s) differ += plan_one_segment({"a", 600}, s) != plan_one_segment({"b", 600}, s);
  CHECK(differ > 10);
}

TEST_CASE("fuzzed plan invariants") {
  Pcg32 rng(17);
  for (std::size_t i = 0; i < 5000; ++i) {
    const std::size_t t1 = 250 + rng.below(1500);
    check_one(plan_one_segment({id_of(i), t1}, rng.next_u64()), t1);
    const std::size_t t2 = 500 + rng.below(1500);
    check_two(plan_two_segments({id_of(i), t2}, rng.next_u64()), t2);
  }
}

TEST_CASE("length menu is uniform") {
  std::map<std::size_t, int> counts;
  for (std::size_t i = 0; i < 10000; ++i) counts[plan_one_segment({id_of(i), 634}, 99).segments[0].length]++;
  REQUIRE(counts.size() == 3);
  double chi2 = 0.0;
  const double expected = 10000.0 / 3.0;
  for (const auto& [len, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 9.21);  // df = 2, p = 0.01
}

TEST_CASE("mean fake ratio at T = 634") {
  double one = 0.0, two = 0.0;
  for (std::size_t i = 0; i < 10000; ++i) {
    one += render_map(plan_one_segment({id_of(i), 634}, 3), 634).fake_ratio();
    two += render_map(plan_two_segments({id_of(i), 634}, 3), 634).fake_ratio();
  }
  CHECK(std::abs(one / 10000.0 - 150.0 / 634.0) < 0.005);
  CHECK(std::abs(two / 10000.0 - 300.0 / 634.0) < 0.005);
}

TEST_CASE("render_map") {
  CHECK(render_map({"v", {}}, 5).to_string() == "RRRRR");
  CHECK(render_map({"v", {{2, 3}}}, 7).to_string() == "RRFFFRR");
  CHECK(render_map({"v", {{0, 2}, {4, 2}}}, 6).to_string() == "FFRRFF");
  CHECK_THROWS_AS(render_map({"v", {{5, 3}}}, 7), DomainError);
  CHECK_THROWS_AS(render_map({"v", {{0, 0}}}, 7), DomainError);
  CHECK_THROWS_AS(render_map({"v", {{0, 3}, {2, 2}}}, 7), DomainError);
  CHECK_THROWS_AS(render_map({"v", {{0, 2}, {2, 2}}}, 7), DomainError);
  CHECK_THROWS_AS(render_map({"v", {{4, 2}, {0, 2}}}, 7), DomainError);
  const SegmentPlan p{"v", {{3, 4}, {10, 2}}};
  const auto once = render_map(p, 15);
  CHECK(render_map({"v", segments_of(once)}, 15) == once);
}

TEST_CASE("dataset stats") {
  const auto s = dataset_stats({{"a", {{0, 50}}}}, {{"a", 100}});
  CHECK(s.fake_ratio_one_seg == 0.5);
  CHECK_FALSE(s.fake_ratio_two_seg.has_value());
  CHECK(s.avg_length == 100.0);
  CHECK_THROWS_AS(dataset_stats({{"zz", {{0, 5}}}}, {{"a", 100}}), DomainError);

  Pcg32 rng(5);
  std::vector<VideoSpec> videos;
  std::vector<SegmentPlan> plans;
  for (std::size_t i = 0; i < 100; ++i) {
    videos.push_back({id_of(i), 500 + rng.below(201)});
    plans.push_back(plan_video(videos.back(), i % 2 ? PlanMode::TwoSegments : PlanMode::OneSegment, 8));
  }
  // brute force over rendered frames
  double r1 = 0, r2 = 0, len = 0;
  int n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    std::size_t fake = 0;
    for (const auto& seg : plans[i].segments) fake += seg.length;
    const double r = static_cast<double>(fake) / static_cast<double>(videos[i].length_frames);
    if (plans[i].segments.size() == 1) r1 += r, ++n1;
    else r2 += r, ++n2;
    len += static_cast<double>(videos[i].length_frames);
  }
  const auto st = dataset_stats(plans, videos);
  CHECK(*st.fake_ratio_one_seg == doctest::Approx(r1 / n1).epsilon(1e-12));
  CHECK(*st.fake_ratio_two_seg == doctest::Approx(r2 / n2).epsilon(1e-12));
  CHECK(st.avg_length == doctest::Approx(len / 100.0).epsilon(1e-12));
}

TEST_CASE("published dataset statistics fixture") {
  std::ifstream is(std::string(FAKESEG_TEST_DATA) + "/published_stats.json");
  REQUIRE(is);
  std::stringstream ss;
  ss << is.rdbuf();
  const auto st = stats_from_json(ss.str());
  CHECK(*st.fake_ratio_one_seg == 0.243);
  CHECK(*st.fake_ratio_two_seg == 0.411);
  CHECK(st.avg_length == 633.9);
  CHECK(stats_from_json(stats_to_json(st)) == st);
}

TEST_CASE("plan file round trip") {
  const auto path = (std::filesystem::temp_directory_path() / "fakeseg_plans_test.jsonl").string();
  std::vector<PlannedVideo> plans;
  for (std::size_t i = 0; i < 20; ++i) {
    const VideoSpec v{id_of(i), 600 + i};
    plans.push_back({v, plan_video(v, i % 2 ? PlanMode::TwoSegments : PlanMode::OneSegment, 1)});
  }
  write_plan_file(path, plans);
  const auto back = read_plan_file(path);
  REQUIRE(back.size() == plans.size());
  for (std::size_t i = 0; i < plans.size(); ++i) {
    CHECK(back[i].video == plans[i].video);
    CHECK(back[i].plan == plans[i].plan);
  }
  CHECK(plan_to_json_line(plans[0]) == plan_to_json_line(back[0]));
  CHECK_THROWS_AS(plan_from_json_line(R"({"id":"a","length":10,"segments":[[8,5]]})"), DomainError);
  CHECK_THROWS_AS(plan_from_json_line(R"({"id":"a","length":10})"), FormatError);
  CHECK_THROWS_AS(plan_from_json_line("not json"), FormatError);
  std::filesystem::remove(path);
}
