#include <gtest/gtest.h>

#include "guide/simulator.hpp"

using namespace guide;

namespace {

TopoMap rectangle() { return load_map_file(std::string(GUIDE_DATA_DIR) + "/maps/rectangle.map"); }

Pose at(const char* node, int deg) { return {NodeId(node), Heading::from_degrees(deg)}; }

}  // namespace

TEST(Simulator, StraightMoveAdvancesPoseOdometerAndClock) {
  SimWorld w(rectangle(), at("A", 0), {}, {}, 1);
  const MoveResult r = w.execute(MoveCommand{TurnKind::kStraight, 4.0, 1.0});
  ASSERT_TRUE(std::holds_alternative<ArrivalReport>(r.event));
  EXPECT_EQ(std::get<ArrivalReport>(r.event).odometry_distance, 4.0);
  EXPECT_EQ(w.pose(), at("B", 0));
  EXPECT_EQ(w.odometer(), 4.0);
  EXPECT_EQ(r.duration_s, 4.0);
  EXPECT_EQ(w.clock_s(), 4.0);
  EXPECT_EQ(w.legs_completed(), 1);
  EXPECT_FALSE(r.kidnapped);
}

TEST(Simulator, TurnsAndSpeed) {
  SimWorld w(rectangle(), at("B", 0), {}, {}, 1);
  const MoveResult r = w.execute(MoveCommand{TurnKind::kLeft, 3.0, 0.5});
  EXPECT_EQ(w.pose(), at("C", 90));
  EXPECT_EQ(r.duration_s, 6.0);
  w.execute(MoveCommand{TurnKind::kLeft, 4.0, 2.0});
  EXPECT_EQ(w.pose(), at("D", 180));
  w.execute(MoveCommand{TurnKind::kTurnAround, 4.0, 2.0});
  EXPECT_EQ(w.pose(), at("C", 0));
  EXPECT_EQ(w.odometer(), 11.0);
  EXPECT_EQ(w.clock_s(), 10.0);
}

TEST(Simulator, BlockedMoveLeavesPoseUnchanged) {
  SimWorld w(rectangle(), at("A", 0), {}, {}, 1);
  const MoveResult r = w.execute(MoveCommand{TurnKind::kTurnAround, 4.0, 1.0});
  EXPECT_TRUE(std::holds_alternative<MoveBlocked>(r.event));
  EXPECT_EQ(w.pose(), at("A", 0));
  EXPECT_EQ(w.odometer(), 0.0);
  EXPECT_EQ(w.clock_s(), 0.0);

  SimWorld blocked(set_edge_blocked(rectangle(), NodeId("A"), NodeId("B"), true), at("A", 0), {}, {}, 1);
  EXPECT_TRUE(std::holds_alternative<MoveBlocked>(blocked.execute(MoveCommand{TurnKind::kStraight, 4, 1}).event));
  EXPECT_EQ(blocked.pose(), at("A", 0));
}

TEST(Simulator, KidnapFiresAfterTriggerLeg) {
  SimWorld w(rectangle(), at("A", 0), {}, {Kidnap{1, NodeId("D"), Heading::from_degrees(90)}}, 1);
  const MoveResult r = w.execute(MoveCommand{TurnKind::kStraight, 4.0, 1.0});
  EXPECT_TRUE(r.kidnapped);
  EXPECT_TRUE(w.kidnap_fired());
  EXPECT_EQ(w.pose(), at("D", 90));
  // Odometry reports the commanded leg, not the teleport.
  EXPECT_EQ(std::get<ArrivalReport>(r.event).odometry_distance, 4.0);
  EXPECT_EQ(w.odometer(), 4.0);
  const MoveResult next = w.execute(MoveCommand{TurnKind::kRight, 4.0, 1.0});
  EXPECT_FALSE(next.kidnapped);
  EXPECT_EQ(w.pose(), at("C", 0));
}

TEST(Simulator, KidnapOnLaterLeg) {
  SimWorld w(rectangle(), at("A", 0), {}, {Kidnap{2, NodeId("A"), Heading::from_degrees(0)}}, 1);
  EXPECT_FALSE(w.execute(MoveCommand{TurnKind::kStraight, 4.0, 1.0}).kidnapped);
  EXPECT_TRUE(w.execute(MoveCommand{TurnKind::kLeft, 3.0, 1.0}).kidnapped);
  EXPECT_EQ(w.pose(), at("A", 0));
}

TEST(Simulator, RejectsBadSetup) {
  EXPECT_THROW(SimWorld(rectangle(), Pose{NodeId("Z"), {}}, {}, {}, 1), std::invalid_argument);
  EXPECT_THROW(SimWorld(rectangle(), at("A", 0), {{"chair", {NodeId("A"), NodeId("C")}, false}}, {}, 1),
               std::invalid_argument);
  EXPECT_THROW(SimWorld(rectangle(), at("A", 0), {}, {Kidnap{0, NodeId("B"), {}}}, 1), std::invalid_argument);
  EXPECT_THROW(SimWorld(rectangle(), at("A", 0), {}, {Kidnap{1, NodeId("Z"), {}}}, 1), std::invalid_argument);
  EXPECT_THROW(SimWorld(rectangle(), at("A", 0), {}, {NoiseSigma{-1}}, 1), std::invalid_argument);
  EXPECT_THROW(SimWorld(rectangle(), at("A", 0), {}, {}, 1, {{NodeId("A"), NodeId("Z")}}), std::invalid_argument);
}

TEST(Simulator, ObservationObjects) {
  SimWorld empty(rectangle(), at("A", 0), {}, {}, 1);
  EXPECT_TRUE(empty.observe().objects.empty());

  SimWorld w(rectangle(), at("A", 0),
             {{"wet_floor_sign", {NodeId("A"), NodeId("B")}, true}, {"chair", {NodeId("A"), NodeId("D")}, false},
              {"pot", {NodeId("B"), NodeId("C")}, false}},
             {}, 1);
  const Observation o = w.observe();
  EXPECT_EQ(o.object_labels(), (std::vector<std::string>{"wet_floor_sign", "chair"}));
  EXPECT_EQ(o.objects[0].direction, Heading::from_degrees(0));
  EXPECT_EQ(o.objects[1].direction, Heading::from_degrees(90));
}

TEST(Simulator, NoiselessObservationMatchesEnvironmentRecord) {
  const TopoMap m = rectangle();
  const VectorStore env = build_environment_store(m);
  SimWorld w(m, at("B", 0), {}, {}, 77);
  EXPECT_EQ(w.observe().embedding, env.get("env:B/0").embedding);
  EXPECT_EQ(w.observe().embedding, env.get("env:B/0").embedding);
}

TEST(Simulator, NoisyObservationsDrawFreshNoise) {
  const TopoMap m = rectangle();
  const VectorStore env = build_environment_store(m);
  SimWorld w(m, at("B", 0), {}, {NoiseSigma{0.1}}, 77);
  const Embedding a = w.observe().embedding, b = w.observe().embedding;
  EXPECT_NE(a, b);
  EXPECT_GT(cosine_similarity(a, env.get("env:B/0").embedding), 0.99);
  SimWorld again(m, at("B", 0), {}, {NoiseSigma{0.1}}, 77);
  EXPECT_EQ(again.observe().embedding, a);
}

TEST(Simulator, AppearanceAlias) {
  const TopoMap m = rectangle();
  const VectorStore env = build_environment_store(m);
  SimWorld w(m, at("C", 90), {}, {}, 1, {{NodeId("C"), NodeId("B")}});
  EXPECT_EQ(w.observe().embedding, env.get("env:B/90").embedding);
}

TEST(EnvironmentStore, SixteenRecordsSelfQuery) {
  const VectorStore env = build_environment_store(rectangle());
  ASSERT_EQ(env.size(), 16u);
  for (const auto& r : env.records()) {
    EXPECT_EQ(r.meta.source, "generated");
    const auto top = env.query_top_k(r.embedding, 1);
    EXPECT_EQ(top[0].record.id, r.id);
    EXPECT_NEAR(top[0].similarity, 1.0, 1e-12);
  }
  EXPECT_TRUE(env.contains("env:D/270"));
}
