// Copyright 2026 The Reeflabel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "reeflabel/service.h"

#include <httplib.h>

#include <gtest/gtest.h>

#include "reeflabel/errors.h"
#include "test_support.h"

namespace reeflabel {
namespace {

using nlohmann::json;

constexpr int kPredictions = 9;

// Seeds on image "s" double as gold; nine predictions on "p" await review.
void Populate(LabelStore& store) {
  std::vector<testing::SeedBox> seeds;
  for (int i = 0; i < 6; ++i) {
    seeds.push_back({"seed" + std::to_string(i), "s", 1 + i % 3,
                     {20.0 + 90 * i, 20, 90.0 + 90 * i, 100}});
  }
  testing::ImportInto(store, testing::BoxDocument({"Rockfish", "Starfish", "Sponge"},
                                                  {{"s", "seed"}, {"p", "pool"}}, seeds));
  auto tx = store.Begin();
  for (int i = 0; i < kPredictions; ++i) {
    Annotation a;
    a.ann_id = "pred" + std::to_string(i);
    a.image_id = "p";
    a.class_label = "Sponge";
    a.box = {10.0 + 60 * i, 200, 60.0 + 60 * i, 260};
    a.state = AnnotationState::kPredicted;
    a.score = 0.7;
    tx.Apply(AnnotationCreated{a});
  }
  store.Commit(std::move(tx));
}

// Answers that accept every proposal; the gold slot is answered with the
// true seed box, which the test knows but the worker-facing JSON must not.
json GoodAnswers(const json& hit, const Dataset& ds, const Hit& internal,
                 const std::string& worker) {
  json answers = json::array();
  for (std::size_t i = 0; i < internal.subtasks.size(); ++i) {
    const auto& st = internal.subtasks[i];
    const BBox box = st.is_gold ? ds.GetAnnotation(st.ann_id).box : st.proposed_box;
    answers.push_back({{"box", {box.x_min, box.y_min, box.x_max, box.y_max}},
                       {"class", hit["subtasks"][i]["proposed_class"]}});
  }
  return {{"worker_id", worker}, {"answers", answers}};
}

class ServiceTest : public ::testing::Test {
 protected:
  ServiceTest() { Populate(store_); }
  TaskService MakeService(std::uint64_t seed = 11) {
    return TaskService(store_, CrowdConfig{}, seed, [this] { return now_; });
  }
  LabelStore store_;
  TimestampMs now_ = 1000;
};

TEST_F(ServiceTest, EmptyPoolIsNoContent) {
  auto svc = MakeService();
  const auto r = svc.NextHit("w1");
  EXPECT_EQ(r.status, 204);
  EXPECT_TRUE(r.body.is_null());
  EXPECT_EQ(svc.NextHit("").status, 400);
}

TEST_F(ServiceTest, LeaseSubmitRoundTrip) {
  auto svc = MakeService();
  EXPECT_EQ(svc.PublishPending(), static_cast<std::size_t>(kPredictions));
  const auto next = svc.NextHit("w1");
  ASSERT_EQ(next.status, 200);
  const auto& hit = next.body;
  EXPECT_EQ(hit["subtasks"].size(), 10u);
  EXPECT_EQ(hit["lease_expiry_ms"], now_ + CrowdConfig{}.lease_duration_ms);
  EXPECT_EQ(hit["classes"].back(), std::string(kBackground));
  const auto internal = svc.session().pool().Find(hit["hit_id"]);
  ASSERT_TRUE(internal);

  auto body = GoodAnswers(hit, store_.Snapshot(), *internal, "w1");
  auto nine = body;
  nine["answers"].erase(nine["answers"].size() - 1);
  const auto short_r = svc.SubmitAnswers(hit["hit_id"], nine);
  EXPECT_EQ(short_r.status, 400);
  EXPECT_NE(short_r.body["error"]["message"].get<std::string>().find("expected 10"),
            std::string::npos);

  auto bad_class = body;
  bad_class["answers"][0]["class"] = "Eel";
  EXPECT_EQ(svc.SubmitAnswers(hit["hit_id"], bad_class).status, 400);

  const auto ok = svc.SubmitAnswers(hit["hit_id"], body);
  EXPECT_EQ(ok.status, 200);
  EXPECT_EQ(ok.body["status"], "approved");
  // Resubmitting the finished HIT is stale.
  EXPECT_EQ(svc.SubmitAnswers(hit["hit_id"], body).status, 409);
  EXPECT_EQ(svc.SubmitAnswers("hit-nope", body).status, 404);

  const auto progress = svc.Progress();
  EXPECT_EQ(progress.body["classes"]["Sponge"]["approved"], kPredictions);
  const auto ex = svc.Examples("Sponge");
  EXPECT_EQ(ex.status, 200);
  EXPECT_EQ(ex.body["examples"].size(), static_cast<std::size_t>(kPredictions));
  EXPECT_EQ(svc.Examples("Eel").status, 404);
}

TEST_F(ServiceTest, ExpiredLeaseSubmissionIsStale) {
  auto svc = MakeService();
  svc.PublishPending();
  const auto hit = svc.NextHit("w1").body;
  const auto internal = svc.session().pool().Find(hit["hit_id"]);
  const auto body = GoodAnswers(hit, store_.Snapshot(), *internal, "w1");
  now_ += CrowdConfig{}.lease_duration_ms + 1;
  const auto r = svc.SubmitAnswers(hit["hit_id"], body);
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body["status"], "stale");
}

// Every byte the worker can see is checked for gold markers, internal ids and
// true gold boxes.
TEST_F(ServiceTest, ResponsesNeverLeakGoldOrHiddenData) {
  auto svc = MakeService();
  svc.PublishPending();
  std::vector<std::string> seen;
  const auto ds = store_.Snapshot();
  for (int round = 0; round < 3; ++round) {
    const std::string worker = "w" + std::to_string(round);
    const auto next = svc.NextHit(worker);
    if (next.status != 200) break;
    seen.push_back(next.body.dump());
    const auto internal = svc.session().pool().Find(next.body["hit_id"]);
    seen.push_back(svc.SubmitAnswers(next.body["hit_id"],
                                     GoodAnswers(next.body, ds, *internal, worker))
                       .body.dump());
  }
  seen.push_back(svc.Progress().body.dump());
  for (const char* cls : {"Rockfish", "Sponge"}) seen.push_back(svc.Examples(cls).body.dump());
  ASSERT_GE(seen.size(), 4u);
  for (const auto& text : seen) {
    for (const char* banned : {"is_gold", "ann_id", "obj-", "hidden"}) {
      EXPECT_EQ(text.find(banned), std::string::npos) << banned << " in " << text;
    }
    for (const auto& [id, _] : ds.annotations()) {
      EXPECT_EQ(text.find('"' + id + '"'), std::string::npos) << id << " in " << text;
    }
    for (const auto* a : ds.AnnotationsInStates({AnnotationState::kSeed})) {
      const auto exact = json::array({a->box.x_min, a->box.y_min, a->box.x_max, a->box.y_max});
      EXPECT_EQ(text.find(exact.dump()), std::string::npos) << "gold box in " << text;
    }
  }
}

TEST_F(ServiceTest, HttpAndInProcessWriteIdenticalEvents) {
  // HTTP arm.
  auto svc = MakeService(21);
  svc.PublishPending();
  HttpServer server(svc, {"127.0.0.1", 0});
  const int port = server.Start();
  httplib::Client cli("127.0.0.1", port);
  const auto ds = store_.Snapshot();

  auto leased = cli.Get("/api/v1/hits/next?worker_id=w1");
  ASSERT_TRUE(leased);
  ASSERT_EQ(leased->status, 200);
  const auto hit = json::parse(leased->body);
  const auto internal = svc.session().pool().Find(hit["hit_id"]);
  const auto body = GoodAnswers(hit, ds, *internal, "w1");
  auto posted = cli.Post("/api/v1/hits/" + hit["hit_id"].get<std::string>() + "/answers",
                         body.dump(), "application/json");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 200);
  EXPECT_EQ(cli.Get("/api/v1/hits/next?worker_id=w1")->status, 204);
  auto garbage = cli.Post("/api/v1/hits/x/answers", "{nope", "application/json");
  EXPECT_EQ(garbage->status, 400);
  EXPECT_EQ(cli.Get("/api/v1/examples/Eel")->status, 404);
  EXPECT_EQ(cli.Get("/api/v1/progress")->status, 200);
  server.Stop();

  // In-process arm: CrowdSession directly, same seed, clock and answers.
  LabelStore other;
  Populate(other);
  CrowdSession session(CrowdConfig{}, other.Snapshot(), 21, "hit-");
  {
    auto tx = other.Begin();
    session.PublishPending(tx);
    other.Commit(std::move(tx));
  }
  const auto direct = session.Lease("w1", now_);
  ASSERT_TRUE(direct);
  ASSERT_EQ(direct->hit_id, hit["hit_id"]);
  const auto answer = ParseWorkerAnswer(body, *direct, other.Snapshot().catalog());
  {
    auto tx = other.Begin();
    session.Submit(tx, direct->hit_id, "w1", answer, now_);
    other.Commit(std::move(tx));
  }

  const auto a = store_.Events();
  const auto b = other.Events();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(EventToJson(a[i]).dump(), EventToJson(b[i]).dump()) << "event " << i;
  }
}

TEST_F(ServiceTest, BusyPortIsAStartupError) {
  auto svc = MakeService();
  HttpServer first(svc, {"127.0.0.1", 0});
  const int port = first.Start();
  HttpServer second(svc, {"127.0.0.1", port});
  EXPECT_THROW(second.Start(), StateError);
  first.Stop();
}

TEST(StoreLockTest, SecondLockFails) {
  testing::TempDir dir;
  {
    StoreLock lock(dir.path());
    EXPECT_THROW(StoreLock again(dir.path()), StateError);
  }
  EXPECT_NO_THROW(StoreLock after(dir.path()));
}

}  // namespace
}  // namespace reeflabel
