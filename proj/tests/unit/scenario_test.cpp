#include <gtest/gtest.h>

#include "ts3ra/scenario.hpp"

namespace ts3ra {
namespace {

TEST(Scenario, EmptyDocumentGivesDefaults) {
  const Scenario s = parse_scenario("");
  EXPECT_EQ(s.network.devices, 250);
  EXPECT_DOUBLE_EQ(s.network.duration_s, 300.0);
  EXPECT_EQ(s.packets.packet_length_bytes, 512);
  EXPECT_EQ(s.network.access_points, 2);
  EXPECT_EQ(s.network.physical_switches + s.network.virtual_switches, 8);
  EXPECT_EQ(s.network.local_controllers, 3);
  EXPECT_EQ(s.network.global_controllers, 1);
  EXPECT_DOUBLE_EQ(s.network.processing_latency_s, 10e-6);
  EXPECT_DOUBLE_EQ(s.scheduler.mu1 + s.scheduler.mu2, 1.0);
  EXPECT_EQ(s, Scenario{});
}

TEST(Scenario, NegativeDevicesNamesKey) {
  try {
    parse_scenario("[network]\ndevices = -1\n");
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.key(), "devices");
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("devices"), std::string::npos);
  }
}

TEST(Scenario, UnknownKeyAndTypeErrors) {
  EXPECT_THROW(parse_scenario("[network]\nbogus = 1\n"), ScenarioError);
  EXPECT_THROW(parse_scenario("[network]\ndevices = many\n"), ScenarioError);
  EXPECT_THROW(parse_scenario("[flows]\ndevices = 3\n"), ScenarioError);
  EXPECT_THROW(parse_scenario("[nowhere]\n"), ScenarioError);
  EXPECT_THROW(parse_scenario("[network]\ndevices = 3\ndevices = 4\n"), ScenarioError);
  try {
    parse_scenario("[scheduler]\nmu1 = 0.6\nmu2 = 0.5\n");
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.key(), "mu2");
  }
}

TEST(Scenario, CommentsAndWhitespace) {
  const Scenario s = parse_scenario("# top\n\n[network]\n  devices=10   # trailing\n");
  EXPECT_EQ(s.network.devices, 10);
}

TEST(Scenario, SerializeRoundTripIsIdempotent) {
  Scenario s;
  s.network.devices = 17;
  s.network.virtual_loss = 0.1234567890123;
  s.flows.mix_embb = 0.5;
  s.flows.mix_urllc = 0.25;
  s.flows.mix_mmtc = 0.25;
  s.slicenet.model_path = "models/a.bin";
  s.registrations.push_back({DeviceId{3}, auth::to_octets("pw"), 77, 8});
  const std::string text = serialize_scenario(s);
  const Scenario back = parse_scenario(text);
  EXPECT_EQ(back, s);
  EXPECT_EQ(serialize_scenario(back), text);
}

TEST(Scenario, EveryKeyAppearsInSerialisation) {
  const std::string text = serialize_scenario(Scenario{});
  for (const auto& k : scenario_keys()) {
    EXPECT_NE(text.find("\n" + k + " = "), std::string::npos) << k;
  }
}

TEST(Scenario, SetValueValidates) {
  Scenario s;
  set_scenario_value(s, "seed", "9");
  EXPECT_EQ(s.network.seed, 9u);
  EXPECT_THROW(set_scenario_value(s, "nope", "1"), ScenarioError);
  EXPECT_THROW(set_scenario_value(s, "devices", "-4"), ScenarioError);
}

TEST(Scenario, MissingFileMessageHasPath) {
  try {
    load_scenario_file("/nonexistent/x.cfg");
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/x.cfg"), std::string::npos);
  }
}

}  // namespace
}  // namespace ts3ra
