// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include <gtest/gtest.h>

#include <httplib.h>

#include <fstream>

#include "harness/server.hpp"
#include "helpers.hpp"
#include "zoo/errors.hpp"
#include "zoo/png_io.hpp"
#include "zoo/visualization.hpp"

namespace trojanscope::harness {
namespace {

using nlohmann::json;
using testing::TempDir;

const std::vector<std::string> kPool{"smiley emoji", "clownfish", "green star", "strawberry", "jaguar",
                                     "elephant skin", "jellybeans", "wood grain", "fork"};

// Two items: an image-based one and a caption-only one.
std::filesystem::path write_quiz(const std::filesystem::path& root) {
  Rng rng(1);
  VisualizationSet images;
  images.method_id = "feud";
  images.target_class = 3;
  images.provenance = {{"config_hash", "abc"}, {"seed", 0}};
  images.items.push_back({testing::random_image(rng, 10, 10), "smiley emoji"});
  images.items.push_back({testing::random_image(rng, 10, 10), ""});
  save_visualization_set(images, root / "vis" / "feud");
  VisualizationSet captions;
  captions.method_id = "textcavs";
  captions.target_class = 7;
  captions.provenance = {{"config_hash", "def"}, {"seed", 0}};
  captions.items.push_back({std::nullopt, "carrot"});
  save_visualization_set(captions, root / "vis" / "textcavs");
  write_png(root / "thumbs" / "carrot.png", testing::random_image(rng, 8, 8));

  Quiz quiz;
  quiz.items.push_back(build_mcq("feud--smiley", "Smiley Emoji", "smiley emoji", "feud", "vis/feud", kPool, 1));
  quiz.items.push_back(build_mcq("textcavs--carrot", "Carrot", "carrot", "textcavs", "vis/textcavs", kPool, 2));
  quiz.sessions = {"s1", "s2"};
  quiz.thumbnails["carrot"] = root / "thumbs" / "carrot.png";
  save_quiz(quiz, root / "quiz.json");
  return root / "quiz.json";
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    service_ = std::make_unique<HarnessService>(load_quiz(write_quiz(dir_.path())), dir_.path() / "responses.jsonl");
    server_ = std::make_unique<HarnessServer>(*service_);
    port_ = server_->bind("127.0.0.1", 0);
    server_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override { server_->stop(); }

  httplib::Result post(const json& body) { return client_->Post("/api/response", body.dump(), "application/json"); }
  MCQItem item(std::size_t i) const { return quiz().items.at(i); }
  Quiz quiz() const { return load_quiz(dir_.path() / "quiz.json"); }

  TempDir dir_;
  std::unique_ptr<HarnessService> service_;
  std::unique_ptr<HarnessServer> server_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

TEST_F(ServerTest, SessionPayloadHidesAnswers) {
  const auto res = client_->Get("/api/session/s1");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const json body = json::parse(res->body);
  EXPECT_EQ(body.at("session_id"), "s1");
  ASSERT_EQ(body.at("items").size(), 2u);
  const std::string dump = body.dump();
  EXPECT_EQ(dump.find("correct"), std::string::npos);
  EXPECT_EQ(dump.find("Smiley Emoji"), std::string::npos);
  EXPECT_EQ(dump.find("\"Carrot\""), std::string::npos);
  const auto& first = body.at("items")[0];
  EXPECT_EQ(first.at("options").size(), 8u);
  EXPECT_EQ(first.at("visualizations").size(), 2u);
  EXPECT_EQ(first.at("visualizations")[0].at("image"), "/vis/feud--smiley/0");
  EXPECT_FALSE(first.at("answered").get<bool>());
  const auto& second = body.at("items")[1];
  EXPECT_EQ(second.at("visualizations")[0].at("caption"), "carrot");
  EXPECT_FALSE(second.at("visualizations")[0].contains("image"));
  bool has_thumb = false;
  for (const auto& o : second.at("options"))
    if (o.at("label") == "carrot") has_thumb = o.at("thumbnail") == "/thumb/0";
  EXPECT_TRUE(has_thumb);
  EXPECT_EQ(client_->Get("/api/session/nobody")->status, 404);
}

TEST_F(ServerTest, ImagesAndThumbnailsAreServed) {
  const auto vis = client_->Get("/vis/feud--smiley/1");
  ASSERT_TRUE(vis);
  EXPECT_EQ(vis->status, 200);
  EXPECT_EQ(vis->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(vis->body.substr(1, 3), "PNG");
  EXPECT_EQ(client_->Get("/thumb/0")->status, 200);
  EXPECT_EQ(client_->Get("/vis/feud--smiley/5")->status, 404);
  EXPECT_EQ(client_->Get("/vis/textcavs--carrot/0")->status, 404);
  EXPECT_EQ(client_->Get("/thumb/3")->status, 404);
}

TEST_F(ServerTest, ResponsesAreRecordedOnceAndValidated) {
  const json ok{{"session_id", "s1"}, {"item_id", "feud--smiley"}, {"chosen_index", 2}};
  auto res = post(ok);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  EXPECT_EQ(json::parse(res->body).at("status"), "recorded");
  EXPECT_EQ(post(ok)->status, 409);
  EXPECT_EQ(post({{"session_id", "s2"}, {"item_id", "feud--smiley"}, {"chosen_index", 2}})->status, 201);
  EXPECT_EQ(post({{"session_id", "s1"}, {"item_id", "feud--smiley"}, {"chosen_index", 9}})->status, 400);
  EXPECT_EQ(post({{"session_id", "s1"}, {"item_id", "textcavs--carrot"}, {"chosen_index", 8}})->status, 400);
  EXPECT_EQ(post({{"session_id", "s1"}, {"item_id", "textcavs--carrot"}})->status, 400);
  EXPECT_EQ(post({{"session_id", "zz"}, {"item_id", "textcavs--carrot"}, {"chosen_index", 0}})->status, 404);
  EXPECT_EQ(post({{"session_id", "s1"}, {"item_id", "nope"}, {"chosen_index", 0}})->status, 404);
  EXPECT_EQ(client_->Post("/api/response", "{not json", "application/json")->status, 400);
  const json body = json::parse(client_->Get("/api/session/s1")->body);
  EXPECT_TRUE(body.at("items")[0].at("answered").get<bool>());
  EXPECT_FALSE(body.at("items")[1].at("answered").get<bool>());
}

TEST_F(ServerTest, ReportReflectsResponses) {
  const auto smiley = item(0);
  const auto carrot = item(1);
  post({{"session_id", "s1"}, {"item_id", smiley.item_id}, {"chosen_index", smiley.correct_index}});
  post({{"session_id", "s2"}, {"item_id", smiley.item_id}, {"chosen_index", (smiley.correct_index + 1) % 8}});
  post({{"session_id", "s1"}, {"item_id", carrot.item_id}, {"chosen_index", carrot.correct_index}});
  const auto res = client_->Get("/api/report");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const json r = json::parse(res->body);
  EXPECT_EQ(r.at("total"), 3);
  EXPECT_EQ(r.at("correct"), 2);
  EXPECT_DOUBLE_EQ(r.at("reference").at("random_baseline").get<double>(), 0.125);
  std::map<std::string, double> rates;
  for (const auto& e : r.at("entries")) rates[e.at("method").get<std::string>()] = e.at("rate").get<double>();
  EXPECT_DOUBLE_EQ(rates.at("feud"), 0.5);
  EXPECT_DOUBLE_EQ(rates.at("textcavs"), 1.0);
}

TEST_F(ServerTest, LogIsJsonlAndReplayedOnRestart) {
  post({{"session_id", "s1"}, {"item_id", "feud--smiley"}, {"chosen_index", 4}});
  post({{"session_id", "s2"}, {"item_id", "textcavs--carrot"}, {"chosen_index", 1}, {"responder", "simulated"}});
  std::ifstream in(dir_.path() / "responses.jsonl");
  std::string line;
  std::vector<json> lines;
  while (std::getline(in, line)) lines.push_back(json::parse(line));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[1].at("responder"), "simulated");
  EXPECT_FALSE(lines[0].at("timestamp").get<std::string>().empty());

  HarnessService replay(quiz(), dir_.path() / "responses.jsonl");
  EXPECT_EQ(replay.responses().size(), 2u);
  EXPECT_THROW(replay.submit({{"session_id", "s1"}, {"item_id", "feud--smiley"}, {"chosen_index", 0}}),
               ConflictError);
  EXPECT_EQ(replay.report().total, 2u);
}

TEST(Service, CorruptLogAndMissingVisualizationAreIngestionErrors) {
  TempDir dir;
  const auto path = write_quiz(dir.path());
  std::ofstream(dir.path() / "bad.jsonl") << "{\"session_id\": \"s1\"}\n";
  EXPECT_THROW(HarnessService(load_quiz(path), dir.path() / "bad.jsonl"), IngestionError);
  std::filesystem::remove_all(dir.path() / "vis" / "textcavs");
  EXPECT_THROW(HarnessService(load_quiz(path), dir.path() / "r.jsonl"), IngestionError);
  EXPECT_THROW(load_quiz(dir.path() / "none.json"), IngestionError);
}

}  // namespace
}  // namespace trojanscope::harness
