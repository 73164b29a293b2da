#include <algorithm>
#include <map>
#include <random>

#include "doctest.h"
#include "mrolab/ho_events.hpp"

using namespace mrolab;
using namespace mrolab::events;

namespace {

constexpr CellPair kPair{1, 2};

HoRecord success(std::uint64_t ue, double t, int from, int to) {
  HoRecord r;
  r.ue = ue;
  r.time_s = t;
  r.source = from;
  r.target = to;
  return r;
}

HoRecord failure(std::uint64_t ue, double t, int from, int to, HoOutcome o, int re) {
  HoRecord r = success(ue, t, from, to);
  r.outcome = o;
  r.reestablish_cell = re;
  return r;
}

// Naive per-type count kept apart from aggregate().
HoCounters count_oracle(const std::vector<LabeledRecord>& labels) {
  std::map<HoEventType, int> n;
  for (const auto& l : labels) ++n[l.type];
  HoCounters c;
  c.n_suc = n[HoEventType::kSuc] + n[HoEventType::kSe];
  c.n_fte = n[HoEventType::kFte];
  c.n_ftl = n[HoEventType::kFtl];
  c.n_pp = n[HoEventType::kPp];
  c.n_se = n[HoEventType::kSe];
  c.n_sl = n[HoEventType::kSl];
  c.n_stf = n[HoEventType::kStf];
  c.n_wc = n[HoEventType::kWc];
  c.n_rc = n[HoEventType::kRc];
  c.n_f = c.n_fte + c.n_ftl + c.n_wc + c.n_rc;
  return c;
}

std::vector<HoRecord> random_stream(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> cell(1, 4), ue(0, 5), kind(0, 3);
  std::uniform_real_distribution<double> dt(0.0, 0.8);
  std::vector<HoRecord> out;
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    t += dt(rng);
    const int from = cell(rng);
    int to = cell(rng);
    if (to == from) to = from % 4 + 1;
    switch (kind(rng)) {
      case 0:
      case 1: out.push_back(success(ue(rng), t, from, to)); break;
      case 2: out.push_back(failure(ue(rng), t, from, to, HoOutcome::kRlfDuringExecution, cell(rng))); break;
      default: out.push_back(failure(ue(rng), t, from, to, HoOutcome::kRlfBeforeCommand, cell(rng))); break;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("ho_events") {

TEST_CASE("ping-pong within the window") {
  const std::vector<HoRecord> rs{success(7, 0.0, 1, 2), success(7, 0.5, 2, 1)};
  const auto l = classify(rs, kPair, 1.0);
  REQUIRE(l.size() == 2);
  CHECK(l[0].type == HoEventType::kPp);
  CHECK(l[1].type == HoEventType::kOther);
  // Outside the window the return is unrelated.
  const std::vector<HoRecord> slow{success(7, 0.0, 1, 2), success(7, 1.5, 2, 1)};
  CHECK(classify(slow, kPair, 1.0)[0].type == HoEventType::kSuc);
}

TEST_CASE("lone success is SUC") {
  const std::vector<HoRecord> rs{success(1, 3.0, 1, 2)};
  const auto l = classify(rs, kPair, 1.0);
  CHECK(l[0].type == HoEventType::kSuc);
  CHECK(aggregate(l).n_suc == 1);
}

TEST_CASE("failure toward C re-established on B is RC") {
  const std::vector<HoRecord> rs{failure(1, 1.0, 1, 3, HoOutcome::kRlfBeforeCommand, 2)};
  const auto l = classify(rs, kPair, 1.0);
  CHECK(l[0].type == HoEventType::kRc);
  const auto c = aggregate(l);
  CHECK(c.n_rc == 1);
  CHECK(c.n_f == 1);
  CHECK(c.n_all() == 0);
}

TEST_CASE("remaining issue types") {
  std::vector<HoRecord> rs{
      success(1, 0.0, 1, 2), success(1, 0.4, 2, 3),                              // SE
      success(2, 0.1, 1, 3), success(2, 0.6, 3, 2),                              // SL
      success(3, 0.2, 1, 2), failure(3, 0.9, 2, 4, HoOutcome::kRlfInSource, 4),  // StF
      failure(4, 1.0, 1, 2, HoOutcome::kRlfDuringExecution, 3),                  // WC
      failure(5, 1.1, 1, 2, HoOutcome::kRlfDuringExecution, 1),                  // FTE
      failure(6, 1.2, 1, 2, HoOutcome::kRlfBeforeCommand, 1),                    // FTL
      failure(7, 1.3, 1, 2, HoOutcome::kRlfInSource, 2),                         // FTL
  };
  std::stable_sort(rs.begin(), rs.end(), [](const HoRecord& a, const HoRecord& b) { return a.time_s < b.time_s; });
  const auto l = classify(rs, kPair, 1.0);
  auto type_of = [&](std::uint64_t ue, double t) {
    for (const auto& x : l)
      if (x.record.ue == ue && x.record.time_s == t) return x.type;
    FAIL("record not found");
    return HoEventType::kOther;
  };
  CHECK(type_of(1, 0.0) == HoEventType::kSe);
  CHECK(type_of(1, 0.4) == HoEventType::kOther);
  CHECK(type_of(2, 0.1) == HoEventType::kSl);
  CHECK(type_of(3, 0.2) == HoEventType::kStf);
  CHECK(type_of(4, 1.0) == HoEventType::kWc);
  CHECK(type_of(5, 1.1) == HoEventType::kFte);
  CHECK(type_of(6, 1.2) == HoEventType::kFtl);
  CHECK(type_of(7, 1.3) == HoEventType::kFtl);
  for (auto t : {HoEventType::kFte, HoEventType::kFtl, HoEventType::kWc, HoEventType::kRc}) {
    CHECK(is_failure_derived(t));
    CHECK_FALSE(is_success_derived(t));
  }
  for (auto t : {HoEventType::kPp, HoEventType::kSe, HoEventType::kSl, HoEventType::kStf}) CHECK(is_success_derived(t));
}

TEST_CASE("earliest follow-up decides") {
  const std::vector<HoRecord> rs{success(1, 0.0, 1, 2), success(1, 0.3, 2, 1),
                                 failure(1, 0.6, 1, 2, HoOutcome::kRlfBeforeCommand, 1)};
  CHECK(classify(rs, kPair, 1.0)[0].type == HoEventType::kPp);
}

TEST_CASE("aggregate counting examples") {
  CHECK(aggregate({}) == HoCounters{});
  std::vector<LabeledRecord> l;
  for (int i = 0; i < 3; ++i) l.push_back({success(i, i, 1, 2), HoEventType::kSuc});
  l.push_back({failure(9, 4, 1, 2, HoOutcome::kRlfDuringExecution, 1), HoEventType::kFte});
  l.push_back({success(8, 5, 1, 2), HoEventType::kPp});
  const auto c = aggregate(l, -3);
  CHECK(c.n_suc == 3);
  CHECK(c.n_fte == 1);
  CHECK(c.n_pp == 1);
  CHECK(c.n_all() == 4);
  CHECK(c.cio == -3);
}

TEST_CASE("aggregate matches a brute-force count on random streams") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rs = random_stream(rng, 40);
    const auto l = classify(rs, kPair, 1.0);
    REQUIRE(l.size() == rs.size());
    const auto c = aggregate(l);
    CHECK(c == count_oracle(l));
    CHECK(c.n_f == c.n_fte + c.n_ftl + c.n_wc + c.n_rc);
    CHECK(c.n_all() >= 0);
    // Purity.
    const auto again = classify(rs, kPair, 1.0);
    for (std::size_t i = 0; i < l.size(); ++i) CHECK(again[i].type == l[i].type);
  }
}

TEST_CASE("counters are invariant to swapping far-apart blocks") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto first = random_stream(rng, 15);
    auto second = random_stream(rng, 15);
    // Blocks use disjoint UE ids and are separated by far more than the window.
    for (auto& r : second) r.ue += 100;
    const double span1 = first.back().time_s + 5.0, span2 = second.back().time_s + 5.0;
    std::vector<HoRecord> ab = first, ba;
    for (auto r : second) {
      r.time_s += span1;
      ab.push_back(r);
    }
    ba = second;
    for (auto r : first) {
      r.time_s += span2;
      ba.push_back(r);
    }
    CHECK(aggregate(classify(ab, kPair, 1.0)) == aggregate(classify(ba, kPair, 1.0)));
  }
}

TEST_CASE("feature vector round trip and scaling") {
  HoCounters c{2, 5, 1, 2, 4, 1, 1, 0, 1, 1, 0};
  CHECK(HoCounters::from_features(c.features()) == c);
  const auto s = c.scaled(3);
  CHECK(s.cio == 2);
  CHECK(s.n_suc == 15);
  CHECK(s.n_all() == 3 * c.n_all());
}

TEST_CASE("unsorted input is rejected") {
  const std::vector<HoRecord> rs{success(1, 2.0, 1, 2), success(2, 1.0, 1, 2)};
  CHECK_THROWS_AS(classify(rs, kPair, 1.0), std::invalid_argument);
  CHECK_THROWS(classify({}, kPair, 0.0));
}

}  // TEST_SUITE
