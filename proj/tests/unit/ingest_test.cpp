#include <doctest.h>

#include <map>
#include <sstream>

#include "streamrec/ingest.hpp"
#include "streamrec/random.hpp"

using namespace streamrec;

TEST_CASE("parse sorts by timestamp and densifies ids") {
  std::istringstream in("10,7,5,300\n20,8,3,100\n10,8,1,200\n");
  const auto log = parse_interactions(in);
  REQUIRE(log.events.size() == 3);
  CHECK(log.events[0].timestamp == 100);
  CHECK(log.events[1].timestamp == 200);
  CHECK(log.events[2].timestamp == 300);
  for (std::size_t i = 0; i < 3; ++i) CHECK(log.events[i].seq_no == i);
  // First appearance in time order: user 20 -> 0, user 10 -> 1.
  CHECK(log.users.raw(0) == 20);
  CHECK(log.users.raw(1) == 10);
  CHECK(log.events[0].user == 0);
  CHECK(log.events[2].user == 1);
  CHECK(log.items.raw(log.events[2].item) == 7);
}

TEST_CASE("parse keeps input order on timestamp ties") {
  std::istringstream in("1,1,5,50\n2,2,5,50\n3,3,5,50\n");
  const auto log = parse_interactions(in);
  CHECK(log.users.raw(log.events[0].user) == 1);
  CHECK(log.users.raw(log.events[1].user) == 2);
  CHECK(log.users.raw(log.events[2].user) == 3);
}

TEST_CASE("parse of an empty source is empty") {
  std::istringstream in("");
  CHECK(parse_interactions(in).events.empty());
}

TEST_CASE("parse reports the line of a malformed record") {
  std::istringstream in("1,2,3,4\n\nabc,2,3,4\n");
  try {
    parse_interactions(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream short_row("1,2,3\n");
  CHECK_THROWS_AS(parse_interactions(short_row), ParseError);
}

TEST_CASE("movielens delimiter") {
  std::istringstream in("1::1193::5::978300760\n1::661::3::978302109\n");
  const auto log = parse_interactions(in, ParseOptions{"::", false});
  REQUIRE(log.events.size() == 2);
  CHECK(log.items.raw(log.events[0].item) == 1193);
  CHECK(log.events[1].rating == 3.0);
}

TEST_CASE("header row can be skipped") {
  std::istringstream in("user,item,rating,ts\n1,2,3,4\n");
  CHECK(parse_interactions(in, ParseOptions{",", true}).events.size() == 1);
}

namespace {

std::vector<RatedEvent> events_for(const std::vector<std::pair<UserId, int>>& per_user) {
  std::vector<RatedEvent> out;
  std::uint64_t seq = 0;
  for (auto [u, n] : per_user) {
    for (int i = 0; i < n; ++i) out.push_back(RatedEvent{u, static_cast<ItemId>(i), seq++, 4.0, 0});
  }
  return out;
}

}  // namespace

TEST_CASE("filter keeps users with strictly more than min_count events") {
  const auto events = events_for({{5, 11}, {9, 10}});
  const auto kept = filter_min_interactions<RatedEvent>(events, 10);
  CHECK(kept.size() == 11);
  for (const auto& e : kept) CHECK(e.user == 0);
}

TEST_CASE("filter with min_count 0 is the identity up to densification") {
  const auto events = events_for({{0, 3}, {1, 2}});
  const auto kept = filter_min_interactions<RatedEvent>(events, 0);
  REQUIRE(kept.size() == events.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    CHECK(kept[i].user == events[i].user);
    CHECK(kept[i].item == events[i].item);
  }
}

TEST_CASE("filter property: every surviving user has more than m events") {
  std::vector<RatedEvent> events;
  Rng rng(3);
  std::uniform_int_distribution<UserId> u(0, 40);
  std::uniform_int_distribution<ItemId> v(0, 30);
  for (std::uint64_t k = 0; k < 2000; ++k) events.push_back(RatedEvent{u(rng), v(rng), k, 1.0, 0});
  for (std::size_t m : {0, 20, 45, 60}) {
    const auto kept = filter_min_interactions<RatedEvent>(events, m);
    std::map<UserId, std::size_t> counts;
    for (const auto& e : kept) ++counts[e.user];
    for (auto [user, n] : counts) CHECK(n > m);
    // Dense indices.
    if (!counts.empty()) CHECK(counts.rbegin()->first == counts.size() - 1);
    for (std::size_t i = 0; i < kept.size(); ++i) CHECK(kept[i].seq_no == i);
  }
}

TEST_CASE("filter remaps id maps consistently") {
  std::istringstream data("7,70,1,1\n8,80,1,2\n8,81,1,3\n");
  auto log = parse_interactions(data);
  const auto kept = filter_min_interactions<RatedEvent>(log.events, 1, &log.users, &log.items);
  REQUIRE(kept.size() == 2);
  CHECK(log.users.size() == 1);
  CHECK(log.users.raw(0) == 8);
  CHECK(log.items.raw(kept[0].item) == 80);
  CHECK(log.items.raw(kept[1].item) == 81);
}

TEST_CASE("binarize labels every rating as positive and keeps duplicates") {
  std::vector<RatedEvent> events{{0, 0, 0, 1.0, 0}, {0, 1, 1, 3.0, 0}, {0, 0, 2, 5.0, 0}};
  const auto list = binarize(events);
  REQUIRE(list.size() == 3);
  for (const auto& x : list) CHECK(x.label == 1);
  CHECK(list[0].item == list[2].item);
  CHECK(binarize(std::vector<RatedEvent>{}).empty());
}

TEST_CASE("chronological split uses floor and never shuffles") {
  InteractionList ten;
  for (std::uint64_t k = 0; k < 10; ++k) ten.push_back(Interaction{0, 0, k, 1});
  auto [train, test] = chronological_split(ten, 0.9);
  CHECK(train.size() == 9);
  CHECK(test.size() == 1);
  CHECK(test[0].seq_no == 9);

  InteractionList one{Interaction{0, 0, 0, 1}};
  auto [tr1, te1] = chronological_split(one, 0.5);
  CHECK(tr1.empty());
  CHECK(te1.size() == 1);

  CHECK_THROWS_AS(chronological_split(ten, 0.0), ConfigError);
  CHECK_THROWS_AS(chronological_split(ten, 1.0), ConfigError);
}

TEST_CASE("stream chunks") {
  InteractionList list;
  for (std::uint64_t k = 0; k < 1000; ++k) list.push_back(Interaction{0, 0, k, 1});
  auto chunks = stream_chunks(list, 512);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].size() == 512);
  CHECK(chunks[1].size() == 488);

  CHECK(stream_chunks(list, 5000).size() == 1);
  CHECK(stream_chunks(list, 5000)[0].size() == 1000);
  CHECK_THROWS_AS(stream_chunks(list, 0), ConfigError);

  // Concatenation reproduces the input.
  for (std::size_t s_r : {1, 7, 128, 999, 1000}) {
    InteractionList joined;
    for (auto c : stream_chunks(list, s_r)) joined.insert(joined.end(), c.begin(), c.end());
    CHECK(joined == list);
  }
}

TEST_CASE("workload classification") {
  CHECK(StreamConfig{256, 128, 0.9}.workload() == Workload::kUnderload);
  CHECK(StreamConfig{256, 256, 0.9}.workload() == Workload::kBalanced);
  CHECK(StreamConfig{256, 512, 0.9}.workload() == Workload::kOverload);
  CHECK_THROWS_AS((StreamConfig{0, 1, 0.9}.validate()), ConfigError);
}

TEST_CASE("pipeline is deterministic") {
  const std::string text = "3,1,4,10\n3,2,4,11\n1,1,2,9\n3,3,1,12\n1,4,5,13\n2,1,1,9\n";
  DatasetOptions opts;
  opts.min_interactions = 1;
  std::istringstream a(text);
  std::istringstream b(text);
  const auto da = load_dataset(a, opts);
  const auto db = load_dataset(b, opts);
  CHECK(da.interactions == db.interactions);
  CHECK(da.users.raw_ids() == db.users.raw_ids());
  CHECK(da.n_users() == 2);  // user 2 has a single event
  CHECK(da.raw_events == 6);
}

TEST_CASE("user sampling keeps whole users") {
  std::ostringstream text;
  for (int u = 0; u < 50; ++u) {
    for (int i = 0; i < 3; ++i) text << u << ',' << i << ",1," << (u * 3 + i) << '\n';
  }
  std::istringstream in(text.str());
  const auto log = parse_interactions(in);
  const auto sampled = sample_users(log, 10, 99);
  CHECK(sampled.users.size() == 10);
  CHECK(sampled.events.size() == 30);
  const auto again = sample_users(log, 10, 99);
  CHECK(again.users.raw_ids() == sampled.users.raw_ids());
}

TEST_CASE("id map dump is two columns") {
  IdMap m;
  m.intern(42);
  m.intern(7);
  std::ostringstream out;
  m.dump(out);
  CHECK(out.str() == "0\t42\n1\t7\n");
}
